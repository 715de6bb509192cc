/*
 * Copyright 2026 The hypoflow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "hypoflow/common.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace hypoflow {

using Json = nlohmann::ordered_json;

/// Parses the TOML subset used by experiment files: comments, [section] and
/// [a.b] headers, dotted keys, strings, numbers, booleans, (nested, multi-line)
/// arrays and inline tables. Duplicate keys are errors.
Json parse_toml(const std::string& text);

inline const std::vector<std::string> kExperiments = {
    "coupling-rate", "oscillation-decay", "smoothing", "lyapunov-check", "tv-decay", "duality"};

/// A schema-checked experiment description. `resolved` holds every key with
/// defaults filled in; `derivations` lists values that were derived rather
/// than given.
struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  Json resolved;
  std::vector<std::string> derivations;

  /// Throws ConfigError naming the offending key.
  static ExperimentConfig from_json(const Json& doc);
  static ExperimentConfig from_toml(const std::string& text);
  static ExperimentConfig load(const std::string& path);

  void set_seed(std::uint64_t seed);
  void set_output_dir(const std::string& dir);
  std::string output_dir() const;
  bool wants(const std::string& format) const;

  /// Typed access into `resolved` by dotted path.
  const Json& at(const std::string& path) const;
  bool has(const std::string& path) const;
  double number(const std::string& path) const;
  long long integer(const std::string& path) const;
  std::string string(const std::string& path) const;
  std::vector<double> numbers(const std::string& path) const;
};

}  // namespace hypoflow
