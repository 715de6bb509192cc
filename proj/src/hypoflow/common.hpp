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

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace hypoflow {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Largest per-variable dimension d supported anywhere (state dimension 2d).
inline constexpr int kMaxDim = 4;

using SmallVec = std::array<double, kMaxDim>;

enum class ErrorCode {
  invalid_input = 1,
  domain,
  cfl,
  non_finite,
  scheme_failure,
  capacity,
  config,
  io,
};

/// Base exception for everything thrown by the core. The C API maps `code()`
/// onto `hf_status`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& what)
      : Error(ErrorCode::invalid_input, what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what)
      : Error(ErrorCode::domain, what) {}
};

class CflError : public Error {
 public:
  CflError(const std::string& what, double admissible_dt)
      : Error(ErrorCode::cfl, what), admissible_dt_(admissible_dt) {}
  double admissible_dt() const noexcept { return admissible_dt_; }

 private:
  double admissible_dt_;
};

class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& what, long long step, long long index = -1)
      : Error(ErrorCode::non_finite, what), step_(step), index_(index) {}
  long long step() const noexcept { return step_; }
  long long index() const noexcept { return index_; }

 private:
  long long step_;
  long long index_;
};

class SchemeFailure : public Error {
 public:
  explicit SchemeFailure(const std::string& what)
      : Error(ErrorCode::scheme_failure, what) {}
};

class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& what)
      : Error(ErrorCode::capacity, what) {}
};

class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(ErrorCode::config, what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::io, what) {}
};

inline bool all_finite(std::span<const double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline double norm2(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x * x;
  return std::sqrt(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace hypoflow
