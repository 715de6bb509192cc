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

#include "hypoflow/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace hypoflow {

// --------------------------------------------------------------- TOML subset

namespace {

class TomlParser {
 public:
  explicit TomlParser(const std::string& text) : s_(text) {}

  Json parse() {
    Json root = Json::object();
    std::vector<std::string> table;  // current [header] path
    for (;;) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        ++i_;
        if (!eof() && peek() == '[') fail("arrays of tables are not supported");
        skip_ws();
        table = key_path();
        skip_ws();
        expect(']');
        std::string joined = join(table);
        if (!headers_.insert(joined).second) fail("table [" + joined + "] defined twice");
        Json* t = descend(root, table, joined);
        (void)t;
        end_of_line();
        continue;
      }
      std::vector<std::string> key = key_path();
      skip_ws();
      expect('=');
      skip_ws();
      Json value = parse_value();
      end_of_line();
      std::vector<std::string> full = table;
      full.insert(full.end(), key.begin(), key.end());
      std::vector<std::string> parent(full.begin(), full.end() - 1);
      Json* t = descend(root, parent, join(full));
      if (t->contains(full.back())) fail("duplicate key '" + join(full) + "'");
      (*t)[full.back()] = std::move(value);
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << "line " << line_;
    throw ConfigError(os.str(), "config parse error at line " + std::to_string(line_) + ": " + what);
  }

  bool eof() const { return i_ >= s_.size(); }
  char peek() const { return s_[i_]; }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++i_;
  }

  void skip_comment() {
    if (!eof() && peek() == '#') {
      while (!eof() && peek() != '\n') ++i_;
    }
  }

  void newline() {
    if (!eof() && peek() == '\r') ++i_;
    if (!eof() && peek() == '\n') {
      ++i_;
      ++line_;
    }
  }

  void skip_blank_lines() {
    for (;;) {
      skip_ws();
      skip_comment();
      if (eof()) return;
      if (peek() == '\n' || peek() == '\r') {
        newline();
        continue;
      }
      return;
    }
  }

  // Whitespace, comments and newlines inside arrays.
  void skip_space_multiline() { skip_blank_lines(); }

  void end_of_line() {
    skip_ws();
    skip_comment();
    if (eof()) return;
    if (peek() != '\n' && peek() != '\r') fail(std::string("unexpected '") + peek() + "' after value");
    newline();
  }

  void expect(char c) {
    if (eof() || peek() != c) fail(std::string("expected '") + c + "'");
    ++i_;
  }

  static std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (k) out += '.';
      out += parts[k];
    }
    return out;
  }

  Json* descend(Json& root, const std::vector<std::string>& path, const std::string& full) {
    Json* t = &root;
    for (const auto& p : path) {
      if (!t->contains(p)) (*t)[p] = Json::object();
      t = &(*t)[p];
      if (!t->is_object()) fail("key '" + full + "' redefines a value as a table");
    }
    return t;
  }

  std::string bare_or_quoted_key() {
    if (eof()) fail("expected a key");
    if (peek() == '"' || peek() == '\'') return parse_string();
    std::size_t b = i_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++i_;
    if (b == i_) fail("expected a key");
    return s_.substr(b, i_ - b);
  }

  std::vector<std::string> key_path() {
    std::vector<std::string> parts{bare_or_quoted_key()};
    for (;;) {
      skip_ws();
      if (!eof() && peek() == '.') {
        ++i_;
        skip_ws();
        parts.push_back(bare_or_quoted_key());
      } else {
        return parts;
      }
    }
  }

  std::string parse_string() {
    char q = peek();
    ++i_;
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = s_[i_++];
      if (c == q) break;
      if (q == '"' && c == '\\') {
        if (eof()) fail("unterminated escape");
        char e = s_[i_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 'u': {
            if (i_ + 4 > s_.size()) fail("bad \\u escape");
            unsigned cp = std::stoul(s_.substr(i_, 4), nullptr, 16);
            i_ += 4;
            if (cp < 0x80) {
              out += static_cast<char>(cp);
            } else if (cp < 0x800) {
              out += static_cast<char>(0xC0 | (cp >> 6));
              out += static_cast<char>(0x80 | (cp & 0x3F));
            } else {
              out += static_cast<char>(0xE0 | (cp >> 12));
              out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
              out += static_cast<char>(0x80 | (cp & 0x3F));
            }
            break;
          }
          default: fail(std::string("unknown escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    return out;
  }

  Json parse_number_or_word() {
    std::size_t b = i_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                      peek() == '.' || peek() == '_')) {
      ++i_;
    }
    std::string tok = s_.substr(b, i_ - b);
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string clean;
    for (char c : tok) {
      if (c != '_') clean += c;
    }
    if (clean == "inf" || clean == "+inf") return std::numeric_limits<double>::infinity();
    if (clean == "-inf") return -std::numeric_limits<double>::infinity();
    if (clean.empty()) fail("expected a value");
    bool is_int = clean.find_first_of(".eE") == std::string::npos;
    try {
      std::size_t used = 0;
      if (is_int) {
        long long v = std::stoll(clean, &used);
        if (used == clean.size()) return v;
      } else {
        double v = std::stod(clean, &used);
        if (used == clean.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("cannot parse value '" + tok + "'");
  }

  Json parse_value() {
    if (eof()) fail("expected a value");
    char c = peek();
    if (c == '"' || c == '\'') return parse_string();
    if (c == '[') {
      ++i_;
      Json arr = Json::array();
      for (;;) {
        skip_space_multiline();
        if (eof()) fail("unterminated array");
        if (peek() == ']') {
          ++i_;
          return arr;
        }
        arr.push_back(parse_value());
        skip_space_multiline();
        if (!eof() && peek() == ',') {
          ++i_;
          continue;
        }
        skip_space_multiline();
        expect(']');
        return arr;
      }
    }
    if (c == '{') {
      ++i_;
      Json tab = Json::object();
      skip_space_multiline();
      if (!eof() && peek() == '}') {
        ++i_;
        return tab;
      }
      for (;;) {
        skip_space_multiline();
        auto key = key_path();
        skip_ws();
        expect('=');
        skip_ws();
        Json v = parse_value();
        Json* t = &tab;
        for (std::size_t k = 0; k + 1 < key.size(); ++k) {
          if (!t->contains(key[k])) (*t)[key[k]] = Json::object();
          t = &(*t)[key[k]];
        }
        if (t->contains(key.back())) fail("duplicate key '" + join(key) + "' in inline table");
        (*t)[key.back()] = std::move(v);
        skip_space_multiline();
        if (!eof() && peek() == ',') {
          ++i_;
          continue;
        }
        expect('}');
        return tab;
      }
    }
    return parse_number_or_word();
  }

  const std::string& s_;
  std::size_t i_ = 0;
  int line_ = 1;
  std::set<std::string> headers_;
};

}  // namespace

Json parse_toml(const std::string& text) { return TomlParser(text).parse(); }

// ------------------------------------------------------------------- schema

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError(key, "config key '" + key + "': " + what);
}

bool is_num(const Json& j) { return j.is_number(); }

double num(const Json& j, const std::string& key) {
  if (!is_num(j)) bad(key, "expected a number");
  return j.get<double>();
}

void check_known(const Json& table, const std::string& prefix, const std::set<std::string>& allowed) {
  if (!table.is_object()) bad(prefix, "expected a table");
  for (const auto& [k, v] : table.items()) {
    (void)v;
    if (!allowed.count(k)) bad(prefix.empty() ? k : prefix + "." + k, "unknown key");
  }
}

void check_matrix(const Json& m, const std::string& key, int d) {
  if (!m.is_array() || static_cast<int>(m.size()) != d) bad(key, "expected a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
  for (const auto& row : m) {
    if (!row.is_array() || static_cast<int>(row.size()) != d) bad(key, "expected a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
    for (const auto& x : row) {
      if (!is_num(x) || !std::isfinite(x.get<double>())) bad(key, "matrix entries must be finite numbers");
    }
  }
}

void check_vector(const Json& v, const std::string& key, int n) {
  if (!v.is_array() || (n >= 0 && static_cast<int>(v.size()) != n)) {
    bad(key, "expected an array of " + std::to_string(n) + " numbers");
  }
  for (const auto& x : v) {
    if (!is_num(x) || !std::isfinite(x.get<double>())) bad(key, "entries must be finite numbers");
  }
}

Json check_potential(const Json& p, const std::string& key) {
  check_known(p, key, {"kind", "alpha", "beta", "c0", "c1"});
  Json out = Json::object();
  std::string kind = p.value("kind", std::string("quadratic"));
  if (kind != "quadratic" && kind != "cosine_perturbed") bad(key + ".kind", "must be quadratic or cosine_perturbed");
  out["kind"] = kind;
  for (const char* name : {"alpha", "beta"}) {
    if (!p.contains(name)) bad(key + "." + name, "missing required key");
    double x = num(p[name], key + "." + name);
    if (!(x > 0.0)) bad(key + "." + name, "must be positive");
    out[name] = x;
  }
  for (const char* name : {"c0", "c1"}) {
    double x = p.contains(name) ? num(p[name], key + "." + name) : 0.0;
    if (!(x >= 0.0)) bad(key + "." + name, "must be nonnegative");
    out[name] = x;
  }
  return out;
}

Json check_drift(const Json& t, const std::string& key, int d) {
  check_known(t, key, {"kind", "v", "y", "potential"});
  if (!t.contains("kind") || !t["kind"].is_string()) bad(key + ".kind", "missing required key");
  std::string kind = t["kind"];
  Json out = Json::object();
  out["kind"] = kind;
  if (kind == "zero") {
    if (t.contains("v") || t.contains("y") || t.contains("potential")) bad(key, "zero drift takes no parameters");
    return out;
  }
  if (kind != "linear" && kind != "gradient_plus_linear") {
    bad(key + ".kind", "must be one of zero, linear, gradient_plus_linear");
  }
  for (const char* part : {"v", "y"}) {
    if (!t.contains(part)) bad(key + "." + part, "missing required key");
    check_matrix(t[part], key + "." + part, d);
    out[part] = t[part];
  }
  if (kind == "gradient_plus_linear") {
    if (!t.contains("potential")) bad(key + ".potential", "missing required key");
    out["potential"] = check_potential(t["potential"], key + ".potential");
  } else if (t.contains("potential")) {
    bad(key + ".potential", "only gradient_plus_linear drifts take a potential");
  }
  return out;
}

Json check_sampler(const Json& t, const std::string& key, int n) {
  check_known(t, key, {"kind", "point", "mean", "cov", "lower", "upper", "parts", "weights"});
  if (!t.contains("kind") || !t["kind"].is_string()) bad(key + ".kind", "missing required key");
  std::string kind = t["kind"];
  Json out = Json::object();
  out["kind"] = kind;
  auto only = [&](std::set<std::string> keys) {
    keys.insert("kind");
    check_known(t, key, keys);
  };
  if (kind == "dirac") {
    only({"point"});
    if (!t.contains("point")) bad(key + ".point", "missing required key");
    check_vector(t["point"], key + ".point", n);
    out["point"] = t["point"];
  } else if (kind == "gaussian") {
    only({"mean", "cov"});
    if (!t.contains("mean")) bad(key + ".mean", "missing required key");
    if (!t.contains("cov")) bad(key + ".cov", "missing required key");
    check_vector(t["mean"], key + ".mean", n);
    check_matrix(t["cov"], key + ".cov", n);
    out["mean"] = t["mean"];
    out["cov"] = t["cov"];
  } else if (kind == "uniform_box") {
    only({"lower", "upper"});
    for (const char* b : {"lower", "upper"}) {
      if (!t.contains(b)) bad(key + "." + b, "missing required key");
      check_vector(t[b], key + "." + b, n);
      out[b] = t[b];
    }
  } else if (kind == "mixture") {
    only({"parts", "weights"});
    if (!t.contains("parts") || !t["parts"].is_array() || t["parts"].empty()) bad(key + ".parts", "expected a nonempty array of samplers");
    if (!t.contains("weights")) bad(key + ".weights", "missing required key");
    check_vector(t["weights"], key + ".weights", static_cast<int>(t["parts"].size()));
    Json parts = Json::array();
    for (std::size_t k = 0; k < t["parts"].size(); ++k) {
      parts.push_back(check_sampler(t["parts"][k], key + ".parts[" + std::to_string(k) + "]", n));
    }
    out["parts"] = parts;
    out["weights"] = t["weights"];
  } else {
    bad(key + ".kind", "must be one of dirac, gaussian, uniform_box, mixture");
  }
  return out;
}

enum class T { integer, number, string, boolean, numbers, strings, custom };

struct Rule {
  std::string path;
  T type;
  /// Experiments needing the key ("*" = all); empty = optional.
  std::set<std::string> required;
  Json fallback;  // null = no default
  std::function<void(const Json&, const std::string&)> check;
};

const std::set<std::string> kGridExperiments = {"oscillation-decay", "smoothing", "tv-decay", "duality"};

void positive(const Json& j, const std::string& key) {
  if (!(j.get<double>() > 0.0)) bad(key, "must be positive");
}
void nonneg(const Json& j, const std::string& key) {
  if (!(j.get<double>() >= 0.0)) bad(key, "must be nonnegative");
}
std::function<void(const Json&, const std::string&)> one_of(std::set<std::string> names) {
  return [names](const Json& j, const std::string& key) {
    if (!names.count(j.get<std::string>())) {
      std::string list;
      for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
      bad(key, "must be one of " + list);
    }
  };
}

std::vector<Rule> rules() {
  auto all = std::set<std::string>{"*"};
  return {
      {"experiment", T::string, all, nullptr, one_of({kExperiments.begin(), kExperiments.end()})},
      {"seed", T::integer, {}, 0, nonneg},
      {"model.d", T::integer, all, nullptr,
       [](const Json& j, const std::string& k) {
         if (j.get<long long>() < 1 || j.get<long long>() > 2) bad(k, "must be 1 or 2");
       }},
      {"model.kappa", T::number, {}, 0.0, nonneg},
      {"model.H", T::custom, all, nullptr, nullptr},
      {"model.B", T::custom, all, nullptr, nullptr},
      {"model.constants", T::custom, {}, nullptr, nullptr},
      {"metric.mu_override", T::number, {}, nullptr, positive},
      {"metric.lambda_override", T::number, {}, nullptr, positive},
      {"metric.eps_reg", T::number, {}, 0.0, nonneg},
      {"psi.c2", T::number, {}, 1.0,
       [](const Json& j, const std::string& k) {
         if (!(j.get<double>() >= 1.0)) bad(k, "must be >= 1");
       }},
      {"psi.theta", T::number, {}, 1.0,
       [](const Json& j, const std::string& k) {
         if (!(j.get<double>() > 0.0 && j.get<double>() <= 1.0)) bad(k, "must lie in (0, 1]");
       }},
      {"psi.variant", T::string, {}, "exponential", one_of({"exponential", "almost_linear"})},
      {"psi.beta", T::number, {}, 0.0, nonneg},
      {"psi.delta_cap", T::number, {}, 1.0, positive},
      {"lyapunov.potential", T::custom, {}, nullptr, nullptr},
      {"lyapunov.samples", T::integer, {}, 10000, positive},
      {"lyapunov.half_width", T::number, {}, 10.0, positive},
      {"lyapunov.omega0_candidate", T::number, {}, 0.0, nullptr},
      {"lyapunov.shells", T::integer, {}, 8, positive},
      {"coupling.tau", T::number, {}, 2.0,
       [](const Json& j, const std::string& k) {
         if (!(j.get<double>() >= 0.0 && j.get<double>() <= 2.0)) bad(k, "must lie in [0, 2]");
       }},
      {"coupling.switch_threshold", T::number, {}, nullptr, positive},
      {"coupling.merge_tolerance", T::number, {}, nullptr, positive},
      {"coupling.far_radius", T::number, {}, nullptr, positive},
      {"coupling.K", T::number, {}, 1.0, positive},
      {"coupling.L", T::number, {}, 1.0, nonneg},
      {"run.n_pairs", T::integer, {"coupling-rate"}, nullptr, positive},
      {"run.dt", T::number, {"coupling-rate"}, nullptr, positive},
      {"run.horizon", T::number, {"coupling-rate"}, nullptr, positive},
      {"run.record_times", T::numbers, {"coupling-rate"}, nullptr, nullptr},
      {"run.seed", T::integer, {}, nullptr, nonneg},
      {"run.w1_support_cap", T::integer, {}, 4000,
       [](const Json& j, const std::string& k) {
         if (j.get<long long>() < 2) bad(k, "must be at least 2");
       }},
      {"initial.first", T::custom, {"coupling-rate", "tv-decay", "duality"}, nullptr, nullptr},
      {"initial.second", T::custom, {"coupling-rate", "tv-decay"}, nullptr, nullptr},
      {"initial.u0", T::string, {"oscillation-decay", "smoothing"}, nullptr,
       one_of({"tanh_sum", "tanh_v", "clipped_sign_v", "sign_v", "v", "constant"})},
      {"initial.u0_width", T::number, {}, 0.1, positive},
      {"initial.zetas", T::strings, {}, Json::array({"one", "v", "tanh_v"}), nullptr},
      {"grid.L_v", T::number, kGridExperiments, nullptr, positive},
      {"grid.L_y", T::number, kGridExperiments, nullptr, positive},
      {"grid.n_v", T::integer, kGridExperiments, nullptr, nullptr},
      {"grid.n_y", T::integer, kGridExperiments, nullptr, nullptr},
      {"solver.dt", T::custom, kGridExperiments, nullptr, nullptr},
      {"solver.t_end", T::number, kGridExperiments, nullptr, positive},
      {"solver.boundary", T::string, {}, "neumann_copy", one_of({"neumann_copy", "dirichlet_extrapolate"})},
      {"solver.cfl_safety", T::number, {}, 0.5,
       [](const Json& j, const std::string& k) {
         if (!(j.get<double>() > 0.0 && j.get<double>() <= 1.0)) bad(k, "must lie in (0, 1]");
       }},
      {"solver.record_times", T::numbers, {}, nullptr, nullptr},
      {"analysis.fit_t_min", T::number, {}, nullptr, nullptr},
      {"analysis.fit_t_max", T::number, {}, nullptr, nullptr},
      {"analysis.omega_min", T::number, {}, 0.0, nullptr},
      {"analysis.omega_max", T::number, {}, nullptr, nullptr},
      {"analysis.r2_min", T::number, {}, 0.0, nullptr},
      {"analysis.mean_checkpoints", T::integer, {}, 10, positive},
      {"analysis.se_factor", T::number, {}, 3.0, positive},
      {"analysis.theta", T::number, {}, 1.0,
       [](const Json& j, const std::string& k) {
         if (!(j.get<double>() > 0.0 && j.get<double>() <= 1.0)) bad(k, "must lie in (0, 1]");
       }},
      {"analysis.pair_budget", T::integer, {}, 2000,
       [](const Json& j, const std::string& k) {
         if (j.get<long long>() < 1000) bad(k, "must be at least 1000");
       }},
      {"analysis.margin", T::number, {}, 0.1,
       [](const Json& j, const std::string& k) {
         if (!(j.get<double>() >= 0.0 && j.get<double>() < 0.5)) bad(k, "must lie in [0, 0.5)");
       }},
      {"analysis.ratio_max", T::number, {}, 3.0, positive},
      {"analysis.smoothing_t_min", T::number, {}, 0.05, positive},
      {"analysis.villani", T::custom, {}, nullptr, nullptr},
      {"analysis.villani_tol", T::number, {}, 0.05, nonneg},
      {"analysis.gap_max", T::number, {}, 0.05, positive},
      {"analysis.gap_one_max", T::number, {}, 1e-10, positive},
      {"analysis.refine", T::boolean, {}, true, nullptr},
      {"analysis.refine_ratio_min", T::number, {}, 1.4, positive},
      {"analysis.refine_ratio_max", T::number, {}, 2.6, positive},
      {"analysis.mass_tol", T::number, {}, 1e-10, positive},
      {"analysis.d1phi_family", T::integer, {}, 0, nonneg},
      {"output.dir", T::string, {}, "out", nullptr},
      {"output.formats", T::strings, {}, Json::array({"csv", "json", "svg"}), nullptr},
  };
}

const Json* find(const Json& doc, const std::string& path) {
  const Json* j = &doc;
  std::size_t b = 0;
  while (true) {
    std::size_t e = path.find('.', b);
    std::string part = path.substr(b, e == std::string::npos ? std::string::npos : e - b);
    if (!j->is_object() || !j->contains(part)) return nullptr;
    j = &(*j)[part];
    if (e == std::string::npos) return j;
    b = e + 1;
  }
}

void put(Json& doc, const std::string& path, Json value) {
  Json* j = &doc;
  std::size_t b = 0;
  while (true) {
    std::size_t e = path.find('.', b);
    std::string part = path.substr(b, e == std::string::npos ? std::string::npos : e - b);
    if (e == std::string::npos) {
      (*j)[part] = std::move(value);
      return;
    }
    if (!j->contains(part)) (*j)[part] = Json::object();
    j = &(*j)[part];
    b = e + 1;
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const Json& doc) {
  if (!doc.is_object()) bad("", "document must be a table");
  const auto rs = rules();
  // Unknown keys: anything outside the rule set (custom tables check their own keys).
  std::set<std::string> sections, top;
  for (const auto& r : rs) {
    auto dot = r.path.find('.');
    if (dot == std::string::npos) {
      top.insert(r.path);
    } else {
      sections.insert(r.path.substr(0, dot));
    }
  }
  for (const auto& [k, v] : doc.items()) {
    if (top.count(k)) continue;
    if (!sections.count(k)) bad(k, "unknown key");
    if (!v.is_object()) bad(k, "expected a table");
    for (const auto& [k2, v2] : v.items()) {
      (void)v2;
      std::string p = k + "." + k2;
      bool known = std::any_of(rs.begin(), rs.end(), [&](const Rule& r) { return r.path == p; });
      if (!known) bad(p, "unknown key");
    }
  }

  ExperimentConfig cfg;
  const Json* exp = find(doc, "experiment");
  if (!exp) bad("experiment", "missing required key");
  if (!exp->is_string()) bad("experiment", "expected a string");
  cfg.experiment = exp->get<std::string>();
  Json out = Json::object();
  int d = 1;
  for (const auto& r : rs) {
    const Json* v = find(doc, r.path);
    if (!v) {
      if (r.required.count("*") || r.required.count(cfg.experiment)) bad(r.path, "missing required key");
      if (!r.fallback.is_null()) put(out, r.path, r.fallback);
      continue;
    }
    Json value = *v;
    switch (r.type) {
      case T::integer:
        if (!value.is_number_integer()) bad(r.path, "expected an integer");
        break;
      case T::number:
        if (!value.is_number()) bad(r.path, "expected a number");
        if (std::isnan(value.get<double>())) bad(r.path, "must not be NaN");
        value = value.get<double>();
        break;
      case T::string:
        if (!value.is_string()) bad(r.path, "expected a string");
        break;
      case T::boolean:
        if (!value.is_boolean()) bad(r.path, "expected true or false");
        break;
      case T::numbers:
        check_vector(value, r.path, -1);
        if (value.empty()) bad(r.path, "must not be empty");
        for (std::size_t k = 1; k < value.size(); ++k) {
          if (!(value[k].get<double>() > value[k - 1].get<double>())) bad(r.path, "must be strictly increasing");
        }
        break;
      case T::strings:
        if (!value.is_array()) bad(r.path, "expected an array of strings");
        for (const auto& s : value) {
          if (!s.is_string()) bad(r.path, "expected an array of strings");
        }
        break;
      case T::custom:
        break;
    }
    if (r.check) r.check(value, r.path);
    if (r.path == "model.d") d = static_cast<int>(value.get<long long>());
    put(out, r.path, value);
  }

  // Structured values that need d.
  for (const char* part : {"H", "B"}) {
    std::string key = std::string("model.") + part;
    put(out, key, check_drift(*find(doc, key), key, d));
  }
  if (const Json* c = find(doc, "model.constants")) {
    check_known(*c, "model.constants", {"gamma", "ell_H", "ell_B"});
    Json cc = Json::object();
    for (const char* name : {"gamma", "ell_H", "ell_B"}) {
      if (!c->contains(name)) bad(std::string("model.constants.") + name, "missing required key");
      double x = num((*c)[name], std::string("model.constants.") + name);
      if (!(x >= 0.0)) bad(std::string("model.constants.") + name, "must be nonnegative");
      cc[name] = x;
    }
    put(out, "model.constants", cc);
  }
  if (const Json* p = find(doc, "lyapunov.potential")) {
    put(out, "lyapunov.potential", check_potential(*p, "lyapunov.potential"));
  } else {
    const Json& B = *find(out, "model.B");
    if (B.contains("potential")) {
      put(out, "lyapunov.potential", B["potential"]);
      cfg.derivations.push_back("lyapunov.potential taken from model.B.potential");
    } else {
      put(out, "lyapunov.potential",
          Json{{"kind", "quadratic"}, {"alpha", 1.0}, {"beta", 1.0}, {"c0", 1.0}, {"c1", 0.0}});
      cfg.derivations.push_back("lyapunov.potential defaulted to quadratic alpha=beta=c0=1, c1=0");
    }
  }
  for (const char* s : {"initial.first", "initial.second"}) {
    if (const Json* t = find(doc, s)) put(out, s, check_sampler(*t, s, 2 * d));
  }
  if (const Json* z = find(out, "initial.zetas")) {
    for (const auto& name : *z) {
      std::string n = name.get<std::string>();
      if (n != "one" && n != "v" && n != "tanh_v" && n != "y") bad("initial.zetas", "entries must be one, v, y or tanh_v");
    }
  }
  if (const Json* f = find(out, "output.formats")) {
    for (const auto& name : *f) {
      std::string n = name.get<std::string>();
      if (n != "csv" && n != "json" && n != "svg") bad("output.formats", "entries must be csv, json or svg");
    }
  }
  if (const Json* dt = find(doc, "solver.dt")) {
    if (dt->is_string()) {
      if (dt->get<std::string>() != "auto") bad("solver.dt", "must be a positive number or \"auto\"");
    } else {
      if (!dt->is_number() || !(dt->get<double>() > 0.0)) bad("solver.dt", "must be a positive number or \"auto\"");
      put(out, "solver.dt", dt->get<double>());
    }
  }
  for (const char* a : {"grid.n_v", "grid.n_y"}) {
    if (const Json* n = find(out, a)) {
      if (n->get<long long>() < 8) bad(a, "must be at least 8");
    }
  }
  if (const Json* vil = find(doc, "analysis.villani")) {
    check_known(*vil, "analysis.villani", {"lambda", "eps", "delta"});
    Json vv = Json::object();
    for (const char* name : {"lambda", "eps", "delta"}) {
      std::string key = std::string("analysis.villani.") + name;
      if (!vil->contains(name)) bad(key, "missing required key");
      double x = num((*vil)[name], key);
      if (!(x > 0.0)) bad(key, "must be positive");
      vv[name] = x;
    }
    if (!(vv["eps"].get<double>() * vv["eps"].get<double>() < vv["delta"].get<double>())) {
      bad("analysis.villani.eps", "requires eps^2 < delta");
    }
    put(out, "analysis.villani", vv);
  } else if (cfg.experiment == "smoothing") {
    bad("analysis.villani", "missing required key");
  }

  // Seed: run.seed and the top-level seed must agree when both are given.
  const Json* s_top = find(doc, "seed");
  const Json* s_run = find(doc, "run.seed");
  if (s_top && s_run && s_top->get<long long>() != s_run->get<long long>()) {
    bad("run.seed", "conflicts with the top-level seed");
  }
  long long seed = s_run ? s_run->get<long long>() : (s_top ? s_top->get<long long>() : 0);
  cfg.seed = static_cast<std::uint64_t>(seed);
  put(out, "seed", seed);
  if (s_run) out["run"].erase("seed");
  cfg.resolved = std::move(out);
  return cfg;
}

ExperimentConfig ExperimentConfig::from_toml(const std::string& text) { return from_json(parse_toml(text)); }

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_toml(ss.str());
}

void ExperimentConfig::set_seed(std::uint64_t s) {
  seed = s;
  resolved["seed"] = s;
  derivations.push_back("seed overridden to " + std::to_string(s));
}

void ExperimentConfig::set_output_dir(const std::string& dir) { resolved["output"]["dir"] = dir; }

std::string ExperimentConfig::output_dir() const { return resolved["output"]["dir"].get<std::string>(); }

bool ExperimentConfig::wants(const std::string& format) const {
  for (const auto& f : resolved["output"]["formats"]) {
    if (f.get<std::string>() == format) return true;
  }
  return false;
}

const Json& ExperimentConfig::at(const std::string& path) const {
  const Json* j = find(resolved, path);
  if (!j) bad(path, "missing required key");
  return *j;
}

bool ExperimentConfig::has(const std::string& path) const { return find(resolved, path) != nullptr; }

double ExperimentConfig::number(const std::string& path) const {
  const Json& j = at(path);
  if (!j.is_number()) bad(path, "expected a number");
  return j.get<double>();
}

long long ExperimentConfig::integer(const std::string& path) const {
  const Json& j = at(path);
  if (!j.is_number_integer()) bad(path, "expected an integer");
  return j.get<long long>();
}

std::string ExperimentConfig::string(const std::string& path) const {
  const Json& j = at(path);
  if (!j.is_string()) bad(path, "expected a string");
  return j.get<std::string>();
}

std::vector<double> ExperimentConfig::numbers(const std::string& path) const {
  const Json& j = at(path);
  std::vector<double> out;
  for (const auto& x : j) out.push_back(x.get<double>());
  return out;
}

}  // namespace hypoflow
