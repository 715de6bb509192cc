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

#include "support.hpp"

#include "hypoflow/config.hpp"
#include "hypoflow/experiments.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hypoflow;

namespace fs = std::filesystem;

namespace {

const char* kLyapunov = R"(
experiment = "lyapunov-check"
seed = 13

[model]
d = 1
kappa = 0.0
H = { kind = "linear", v = [[1.0]], y = [[0.0]] }
B = { kind = "gradient_plus_linear", v = [[1.0]], y = [[0.0]],
      potential = { kind = "quadratic", alpha = 1.0, beta = 1.0, c0 = 1.0, c1 = 0.0 } }

[lyapunov]
samples = 2000
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string config_error_key(const std::string& text) {
  try {
    ExperimentConfig::from_toml(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("TOML subset") {
    auto j = parse_toml(R"(
# comment
a = 1
b = "two" # trailing
[s]
x = [1, 2.5,
     -3e-2]
t = { p = true, q = [[1, 2], [3, 4]] }
[s.sub]
k.l = "dotted"
)");
    CHECK(j["a"] == 1);
    CHECK(j["b"] == "two");
    CHECK(j["s"]["x"][2].get<double>() == doctest::Approx(-0.03));
    CHECK(j["s"]["t"]["p"] == true);
    CHECK(j["s"]["t"]["q"][1][0] == 3);
    CHECK(j["s"]["sub"]["k"]["l"] == "dotted");
    CHECK_THROWS_AS(parse_toml("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_toml("a = [1, 2\n"), ConfigError);
  }

  TEST_CASE("valid config resolves defaults") {
    auto cfg = ExperimentConfig::from_toml(kLyapunov);
    CHECK(cfg.experiment == "lyapunov-check");
    CHECK(cfg.seed == 13);
    CHECK(cfg.integer("lyapunov.samples") == 2000);
    CHECK(cfg.has("output.dir"));
    CHECK(cfg.number("model.kappa") == 0.0);
  }

  TEST_CASE("missing model.d names the key") {
    CHECK(config_error_key(replace(kLyapunov, "d = 1\n", "")) == "model.d");
  }

  TEST_CASE("unknown keys are rejected") {
    CHECK(config_error_key(replace(kLyapunov, "samples = 2000", "samples = 2000\nsample_count = 3")) ==
          "lyapunov.sample_count");
    CHECK(config_error_key(std::string(kLyapunov) + "\n[extra]\nx = 1\n") == "extra");
  }

  TEST_CASE("bad values are rejected with their key") {
    CHECK(config_error_key(replace(kLyapunov, "lyapunov-check", "no-such-experiment")) == "experiment");
    CHECK(config_error_key(replace(kLyapunov, "kappa = 0.0", "kappa = -1.0")) == "model.kappa");
    CHECK(config_error_key(replace(kLyapunov, "kappa = 0.0", "kappa = \"zero\"")) == "model.kappa");
  }

  TEST_CASE("seed and output overrides") {
    auto cfg = ExperimentConfig::from_toml(kLyapunov);
    cfg.set_seed(77);
    cfg.set_output_dir("/tmp/somewhere");
    CHECK(cfg.seed == 77);
    CHECK(cfg.output_dir() == "/tmp/somewhere");
    CHECK(cfg.resolved["seed"] == 77);
  }

  TEST_CASE("shipped configs validate") {
    const fs::path dir = fs::path(HYPOFLOW_SOURCE_DIR) / "configs";
    int count = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() != ".toml") continue;
      CAPTURE(e.path().string());
      CHECK_NOTHROW(ExperimentConfig::load(e.path().string()));
      ++count;
    }
    CHECK(count == 6);
    CHECK_THROWS_AS(ExperimentConfig::load((dir / "missing.toml").string()), IoError);
  }
}

TEST_SUITE("experiments") {
  TEST_CASE("CSV formatting") {
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(2.0) == "2");
    Table t;
    t.header = {"a", "b,c"};
    t.add({"1", "say \"hi\""});
    CHECK(t.to_csv() == "a,\"b,c\"\r\n1,\"say \"\"hi\"\"\"\r\n");
  }

  TEST_CASE("lyapunov experiment is deterministic and self-describing") {
    auto cfg = ExperimentConfig::from_toml(kLyapunov);
    auto a = compute_experiment(cfg);
    auto b = compute_experiment(cfg);
    CHECK(a.passed());
    CHECK(a.table.to_csv() == b.table.to_csv());
    CHECK(a.summary.dump() == b.summary.dump());
    CHECK(a.summary["experiment"] == "lyapunov-check");
    CHECK(a.summary["claim"].get<std::string>().size() > 10);
    CHECK(a.summary["seed"] == 13);
    CHECK(a.artifacts.empty());
  }

  TEST_CASE("run_experiment writes manifest, summary and CSV") {
    auto cfg = ExperimentConfig::from_toml(kLyapunov);
    auto dir = fresh_dir("hypoflow_run_test");
    cfg.set_output_dir(dir.string());
    auto res = run_experiment(cfg);
    for (const char* name : {"results.csv", "summary.json", "manifest.json"}) {
      CHECK(fs::exists(dir / name));
    }
    auto manifest = Json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest["config"] == cfg.resolved);
    CHECK(manifest["seed"] == 13);
    auto first_csv = slurp(dir / "results.csv");
    run_experiment(cfg);
    CHECK(slurp(dir / "results.csv") == first_csv);
    fs::remove_all(dir);
  }

  TEST_CASE("plot annotation matches the fit") {
    PlotSpec p;
    p.title = "decay";
    p.y_label = "value";
    for (int t = 0; t < 4; ++t) p.series.emplace_back(t, 3.0 * std::exp(-0.7 * t));
    p.fit = fit_decay(p.series);
    auto svg = render_plot(p);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("omega = 0.7") != std::string::npos);
    CHECK(svg.find("K = 3") != std::string::npos);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg == render_plot(p));
  }

  TEST_CASE("plot files are byte-identical for identical input") {
    PlotSpec p;
    for (int t = 0; t < 6; ++t) p.series.emplace_back(t, 1.0 / (1.0 + t));
    auto dir = fresh_dir("hypoflow_plot_test");
    fs::create_directories(dir);
    emit_plot(p, (dir / "a.svg").string());
    emit_plot(p, (dir / "b.svg").string());
    CHECK(slurp(dir / "a.svg") == slurp(dir / "b.svg"));
    fs::remove_all(dir);
  }

  TEST_CASE("plot falls back to linear scale for nonpositive values") {
    PlotSpec p;
    p.series = {{0, 1.0}, {1, 0.0}, {2, -0.5}};
    auto svg = render_plot(p);
    CHECK(svg.find("warning: nonpositive values, linear scale") != std::string::npos);
  }

  TEST_CASE("empty or non-finite series is rejected") {
    PlotSpec p;
    CHECK_THROWS_AS(render_plot(p), InvalidInput);
    p.series = {{0, std::nan("")}};
    CHECK_THROWS_AS(render_plot(p), InvalidInput);
  }

  TEST_CASE("named fields and densities") {
    auto g = Grid::create(1, 4.0, 4.0, 32, 32);
    auto s = named_field("clipped_sign_v", g);
    CHECK(s.max() == 1.0);
    CHECK(s.min() == -1.0);
    CHECK_THROWS(named_field("nope", g));
    auto dirac = density_on_grid(Json::parse(R"({"kind": "dirac", "point": [0.3, -0.2]})"), g);
    CHECK(dirac.integral() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(dirac.min() >= 0.0);
    // Multilinear deposit keeps the first moment.
    double mv = 0.0, my = 0.0, z[2];
    for (std::size_t i = 0; i < g.size(); ++i) {
      g.node(i, z);
      mv += dirac.values[i] * z[0] * g.cell_volume();
      my += dirac.values[i] * z[1] * g.cell_volume();
    }
    CHECK(mv == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(my == doctest::Approx(-0.2).epsilon(1e-12));
  }

  TEST_CASE("oracle text for the kinetic OU") {
    auto text = oracle_text("kinetic-ou");
    CHECK(text.find("-0.5") != std::string::npos);
    CHECK_THROWS(oracle_text("unknown-model"));
  }
}
