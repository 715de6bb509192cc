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

#include "hypoflow/experiments.hpp"

#include "hypoflow/grid.hpp"
#include "hypoflow/oracles.hpp"
#include "hypoflow/parallel.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace hypoflow {

// ------------------------------------------------------------------ tables

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

}  // namespace

std::string Table::to_csv() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      if (k) out += ',';
      out += csv_field(cells[k]);
    }
    out += "\r\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

bool ExperimentResult::passed() const {
  return std::all_of(criteria.begin(), criteria.end(), [](const Criterion& c) { return c.passed; });
}

// ---------------------------------------------------------------- builders

namespace {

Matrix matrix_of(const Json& j) {
  const int n = static_cast<int>(j.size());
  Matrix m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) m(r, c) = j[r][c].get<double>();
  return m;
}

Vector vector_of(const Json& j) {
  Vector v(static_cast<int>(j.size()));
  for (int k = 0; k < v.size(); ++k) v[k] = j[k].get<double>();
  return v;
}

DriftSpec build_drift(const Json& spec, int d) {
  const std::string kind = spec["kind"];
  if (kind == "zero") return DriftSpec::zero(d);
  if (kind == "linear") return DriftSpec::linear(matrix_of(spec["v"]), matrix_of(spec["y"]));
  return DriftSpec::gradient_plus_linear(matrix_of(spec["v"]), matrix_of(spec["y"]),
                                         build_potential(spec["potential"]));
}

}  // namespace

PotentialSpec build_potential(const Json& spec) {
  const std::string kind = spec.value("kind", std::string("quadratic"));
  const double a = spec["alpha"], b = spec["beta"], c0 = spec.value("c0", 0.0), c1 = spec.value("c1", 0.0);
  if (kind == "cosine_perturbed") return PotentialSpec::cosine_perturbed(a, b, c0, c1);
  return PotentialSpec::quadratic(a, b, c0, c1);
}

KineticModel build_model(const ExperimentConfig& cfg) {
  const int d = static_cast<int>(cfg.integer("model.d"));
  std::optional<StructuralConstants> constants;
  if (cfg.has("model.constants")) {
    const Json& c = cfg.at("model.constants");
    constants = StructuralConstants{c["gamma"], c["ell_H"], c["ell_B"]};
  }
  return KineticModel::create(d, cfg.number("model.kappa"), build_drift(cfg.at("model.H"), d),
                              build_drift(cfg.at("model.B"), d), constants);
}

RotatedMetric build_metric(const ExperimentConfig& cfg, const KineticModel& model) {
  const double eps = cfg.number("metric.eps_reg");
  const bool mu_o = cfg.has("metric.mu_override"), la_o = cfg.has("metric.lambda_override");
  if (mu_o && la_o) return RotatedMetric::create(cfg.number("metric.mu_override"), cfg.number("metric.lambda_override"), eps);
  if (!(model.gamma() > 0.0)) {
    throw ConfigError("metric.mu_override", "config key 'metric.mu_override': the model has gamma = 0, so mu and lambda must be given");
  }
  RotatedMetric m = default_metric(model.gamma(), model.ell_H(), model.ell_B());
  double mu = mu_o ? cfg.number("metric.mu_override") : m.mu;
  double lambda = la_o ? cfg.number("metric.lambda_override") : m.lambda;
  return RotatedMetric::create(mu, lambda, eps);
}

PsiProfile build_psi(const ExperimentConfig& cfg) {
  if (cfg.string("psi.variant") == "almost_linear") {
    return PsiProfile::almost_linear(cfg.number("psi.beta"), cfg.number("psi.theta"), cfg.number("psi.delta_cap"));
  }
  return PsiProfile::exponential(cfg.number("psi.c2"), cfg.number("psi.theta"));
}

MeasureSampler build_sampler(const Json& spec) {
  const std::string kind = spec["kind"];
  if (kind == "dirac") return MeasureSampler::dirac(vector_of(spec["point"]));
  if (kind == "gaussian") return MeasureSampler::gaussian(vector_of(spec["mean"]), matrix_of(spec["cov"]));
  if (kind == "uniform_box") {
    Box box;
    for (const auto& x : spec["lower"]) box.lower.push_back(x.get<double>());
    for (const auto& x : spec["upper"]) box.upper.push_back(x.get<double>());
    return MeasureSampler::uniform_box(std::move(box));
  }
  std::vector<MeasureSampler> parts;
  for (const auto& p : spec["parts"]) parts.push_back(build_sampler(p));
  std::vector<double> w;
  for (const auto& x : spec["weights"]) w.push_back(x.get<double>());
  return MeasureSampler::mixture(std::move(parts), std::move(w));
}

Grid build_grid(const ExperimentConfig& cfg, int refine) {
  return Grid::create(static_cast<int>(cfg.integer("model.d")), cfg.number("grid.L_v"), cfg.number("grid.L_y"),
                      static_cast<int>(cfg.integer("grid.n_v")) * refine,
                      static_cast<int>(cfg.integer("grid.n_y")) * refine);
}

Field density_on_grid(const Json& spec, const Grid& grid) {
  const std::string kind = spec["kind"];
  const int D = grid.axes();
  std::vector<double> vals(grid.size(), 0.0);
  if (kind == "gaussian") {
    Vector mean = vector_of(spec["mean"]);
    Matrix cov = matrix_of(spec["cov"]);
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw InvalidInput("density_on_grid: gaussian covariance must be positive definite (use a dirac)");
    }
    Matrix inv = llt.solve(Matrix::Identity(D, D));
    std::vector<double> z(D);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      grid.node(i, z);
      Vector dz(D);
      for (int k = 0; k < D; ++k) dz[k] = z[k] - mean[k];
      vals[i] = std::exp(-0.5 * dz.dot(inv * dz));
    }
  } else if (kind == "dirac") {
    Vector p = vector_of(spec["point"]);
    // Multilinear weights on the 2^D surrounding centres.
    std::array<int, 2 * kMaxDim> lo{};
    std::array<double, 2 * kMaxDim> frac{};
    for (int a = 0; a < D; ++a) {
      double s = (p[a] + grid.L(a)) / grid.h(a) - 0.5;
      if (s < 0.0 || s > grid.n(a) - 1) throw InvalidInput("density_on_grid: dirac point outside the cell centres");
      lo[a] = std::min(static_cast<int>(std::floor(s)), grid.n(a) - 2);
      frac[a] = s - lo[a];
    }
    std::array<int, 2 * kMaxDim> idx{};
    for (int corner = 0; corner < (1 << D); ++corner) {
      double w = 1.0;
      for (int a = 0; a < D; ++a) {
        int bit = (corner >> a) & 1;
        idx[a] = lo[a] + bit;
        w *= bit ? frac[a] : 1.0 - frac[a];
      }
      vals[grid.flatten({idx.data(), std::size_t(D)})] += w;
    }
  } else if (kind == "uniform_box") {
    Vector lo = vector_of(spec["lower"]), hi = vector_of(spec["upper"]);
    std::vector<double> z(D);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      grid.node(i, z);
      bool in = true;
      for (int a = 0; a < D; ++a) in = in && z[a] >= lo[a] && z[a] <= hi[a];
      vals[i] = in ? 1.0 : 0.0;
    }
  } else {
    double total = 0.0;
    for (const auto& w : spec["weights"]) total += w.get<double>();
    for (std::size_t k = 0; k < spec["parts"].size(); ++k) {
      Field part = density_on_grid(spec["parts"][k], grid);
      double w = spec["weights"][k].get<double>() / total;
      for (std::size_t i = 0; i < grid.size(); ++i) vals[i] += w * part.values[i];
    }
  }
  double mass = 0.0;
  for (double v : vals) mass += v;
  if (!(mass > 0.0)) throw InvalidInput("density_on_grid: initial law has no mass on the grid");
  return normalize_density(Field::create(grid, std::move(vals)));
}

Field named_field(const std::string& name, const Grid& grid, double width) {
  const int d = grid.d;
  std::function<double(std::span<const double>)> f;
  if (name == "tanh_sum") {
    f = [d](std::span<const double> z) {
      double s = 0.0;
      for (int k = 0; k < 2 * d; ++k) s += std::tanh(z[k]);
      return s;
    };
  } else if (name == "tanh_v") {
    f = [](std::span<const double> z) { return std::tanh(z[0]); };
  } else if (name == "clipped_sign_v") {
    f = [width](std::span<const double> z) {
      double s = z[0] > 0 ? 1.0 : (z[0] < 0 ? -1.0 : 0.0);
      return s * std::min(1.0, std::abs(z[0]) / width);
    };
  } else if (name == "sign_v") {
    f = [](std::span<const double> z) { return z[0] > 0 ? 1.0 : (z[0] < 0 ? -1.0 : 0.0); };
  } else if (name == "v") {
    f = [](std::span<const double> z) { return z[0]; };
  } else if (name == "y") {
    f = [d](std::span<const double> z) { return z[d]; };
  } else if (name == "constant" || name == "one") {
    f = [](std::span<const double>) { return 1.0; };
  } else {
    throw InvalidInput("unknown field '" + name + "'");
  }
  return Field::sample(grid, f);
}

// ------------------------------------------------------------- experiments

namespace {

struct FitWindow {
  double lo, hi;
};

FitWindow fit_window(const ExperimentConfig& cfg, double horizon, std::vector<std::string>* notes) {
  FitWindow w{0.0, horizon};
  if (cfg.has("analysis.fit_t_min")) {
    w.lo = cfg.number("analysis.fit_t_min");
  } else if (notes) {
    notes->push_back("analysis.fit_t_min defaulted to 0");
  }
  if (cfg.has("analysis.fit_t_max")) {
    w.hi = cfg.number("analysis.fit_t_max");
  } else if (notes) {
    notes->push_back("analysis.fit_t_max defaulted to the horizon " + format_number(horizon));
  }
  return w;
}

Criterion rate_criterion(const std::string& name, const std::vector<std::pair<double, double>>& series,
                         const ExperimentConfig& cfg, FitWindow w, Json& summary) {
  Criterion c{name, false, ""};
  for (const auto& [t, v] : series) {
    if (t >= w.lo && t <= w.hi && !(v > 0.0)) {
      c.detail = "nonpositive value " + format_number(v) + " at t=" + format_number(t) + " inside the fit window";
      summary["fit"] = nullptr;
      return c;
    }
  }
  DecayFit fit = fit_decay(series, w.lo, w.hi);
  const double omin = cfg.number("analysis.omega_min");
  const double omax = cfg.has("analysis.omega_max") ? cfg.number("analysis.omega_max") : std::numeric_limits<double>::infinity();
  const double r2min = cfg.number("analysis.r2_min");
  summary["fit"] = {{"K", fit.K}, {"omega", fit.omega}, {"r2", fit.r2}, {"points", fit.points},
                    {"t_min", w.lo}, {"t_max", w.hi}};
  bool range_ok = cfg.has("analysis.omega_max") ? (fit.omega >= omin && fit.omega <= omax) : fit.omega > omin;
  c.passed = range_ok && fit.r2 >= r2min;
  std::ostringstream os;
  os << "omega=" << fmt("%.4f", fit.omega) << " R2=" << fmt("%.4f", fit.r2) << " over t in [" << w.lo << ", "
     << w.hi << "]; required omega " << (cfg.has("analysis.omega_max") ? "in [" + fmt("%g", omin) + ", " + fmt("%g", omax) + "]" : "> " + fmt("%g", omin))
     << ", R2 >= " << r2min;
  c.detail = os.str();
  return c;
}

SolverParams solver_params(const ExperimentConfig& cfg, const KineticModel& model, const Grid& grid,
                           std::vector<std::string>& notes, bool both_schemes, double scale = 1.0) {
  SolverParams p;
  p.t_end = cfg.number("solver.t_end");
  p.boundary = boundary_from_name(cfg.string("solver.boundary"));
  p.cfl_safety = cfg.number("solver.cfl_safety");
  p.record_times = cfg.has("solver.record_times") ? cfg.numbers("solver.record_times") : std::vector<double>{p.t_end};
  const Json& dt = cfg.at("solver.dt");
  if (dt.is_string()) {
    double a = admissible_dt(model, grid, SchemeKind::adjoint, p.boundary, p.cfl_safety);
    if (both_schemes) a = std::min(a, admissible_dt(model, grid, SchemeKind::fokker_planck, p.boundary, p.cfl_safety));
    p.dt = a * scale;
    notes.push_back("solver.dt derived as " + format_number(p.dt) + " from the CFL bound on the " +
                    std::to_string(grid.n_v) + "x" + std::to_string(grid.n_y) + " grid");
  } else {
    p.dt = dt.get<double>() * scale;
  }
  return p;
}

// ---- coupling-rate

ExperimentResult coupling_rate(const ExperimentConfig& cfg, std::vector<std::string>& notes) {
  ExperimentResult res;
  KineticModel model = build_model(cfg);
  RotatedMetric metric = build_metric(cfg, model);
  CouplingPolicy policy;
  policy.tau = cfg.number("coupling.tau");
  if (cfg.has("coupling.switch_threshold")) policy.switch_threshold = cfg.number("coupling.switch_threshold");
  if (cfg.has("coupling.merge_tolerance")) policy.merge_tolerance = cfg.number("coupling.merge_tolerance");
  if (cfg.has("coupling.far_radius")) policy.far_radius = cfg.number("coupling.far_radius");
  MeasureSampler s1 = build_sampler(cfg.at("initial.first"));
  MeasureSampler s2 = build_sampler(cfg.at("initial.second"));
  EnsembleRun run;
  run.n_pairs = cfg.integer("run.n_pairs");
  run.dt = cfg.number("run.dt");
  run.horizon = cfg.number("run.horizon");
  run.seed = cfg.seed;
  run.record_times = cfg.numbers("run.record_times");
  LyapunovFunction phi = build_quadratic_lyapunov(build_potential(cfg.at("lyapunov.potential")), model.d());
  SemimetricOptions semi;
  semi.K = cfg.number("coupling.K");
  semi.L = cfg.number("coupling.L");
  semi.psi = build_psi(cfg);
  semi.phi = &phi;
  EnsembleOutput out =
      run_ensemble(model, metric, policy, s1, s2, run, semi, static_cast<std::size_t>(cfg.integer("run.w1_support_cap")));

  res.table.header = {"time", "mean_rho", "q10_rho", "q90_rho", "mean_G", "coalesced_frac", "w1"};
  std::vector<std::pair<double, double>> w1;
  for (const auto& r : out.records) {
    res.table.add({format_number(r.time), format_number(r.mean_rho), format_number(r.q10_rho),
                   format_number(r.q90_rho), format_number(r.mean_G), format_number(r.coalesced_frac),
                   format_number(r.w1)});
    w1.emplace_back(r.time, r.w1);
  }
  if (!cfg.has("coupling.switch_threshold")) notes.push_back("coupling.switch_threshold defaulted to sqrt(dt) = " + format_number(out.switch_threshold));
  res.summary["metric"] = {{"mu", metric.mu}, {"lambda", metric.lambda}};
  res.summary["w1_pairs"] = out.w1_pairs;
  res.summary["final_coalesced_frac"] = out.records.back().coalesced_frac;
  FitWindow w = fit_window(cfg, run.horizon, &notes);
  res.criteria.push_back(rate_criterion("w1_decay_rate", w1, cfg, w, res.summary));

  if (model.H().is_affine() && model.B().is_affine() && model.d() <= 2) {
    auto mats = LinearModelMatrices::from_model(model);
    res.summary["oracle_rate"] = -spectral_abscissa(mats);
    // Mean oracle on evenly spaced positive record times.
    std::vector<std::size_t> pos;
    for (std::size_t k = 0; k < out.records.size(); ++k) {
      if (out.records[k].time > 0.0) pos.push_back(k);
    }
    const std::size_t want = std::min<std::size_t>(pos.size(), cfg.integer("analysis.mean_checkpoints"));
    std::vector<std::size_t> chosen;
    for (std::size_t j = 0; j < want; ++j) {
      chosen.push_back(pos[want == 1 ? pos.size() - 1 : (j * (pos.size() - 1)) / (want - 1)]);
    }
    std::vector<double> times;
    for (auto k : chosen) times.push_back(out.records[k].time);
    Criterion c{"mean_oracle", true, ""};
    if (!times.empty()) {
      const double ode_dt = std::min(1e-3, run.dt * 10);
      auto traj_1 = integrate_moments(mats, s1.mean(), s1.covariance(), times.back(), ode_dt, times);
      auto traj_2 = integrate_moments(mats, s2.mean(), s2.covariance(), times.back(), ode_dt, times);
      const double f = cfg.number("analysis.se_factor");
      double worst = 0.0;
      auto score = [&](double mean, double se, double oracle) {
        double dev = std::abs(mean - oracle);
        double z = se > 0.0 ? dev / se : (dev > 1e-12 ? std::numeric_limits<double>::infinity() : 0.0);
        worst = std::max(worst, z);
        if (z > f) c.passed = false;
      };
      for (std::size_t j = 0; j < chosen.size(); ++j) {
        const auto& rec = out.records[chosen[j]];
        for (int a = 0; a < model.state_dim(); ++a) {
          score(rec.mean_first[a], rec.se_first[a], traj_1[j].mean[a]);
          score(rec.mean_second[a], rec.se_second[a], traj_2[j].mean[a]);
        }
      }
      c.detail = "worst |mean - oracle| / SE = " + fmt("%.3f", worst) + " over " + std::to_string(chosen.size()) +
                 " checkpoints, both marginals (limit " + fmt("%g", f) + ")";
      res.summary["mean_oracle_worst_z"] = worst;
    } else {
      c.passed = false;
      c.detail = "no positive record times";
    }
    res.criteria.push_back(c);
  }
  res.plot = PlotSpec{"W1 between coupled marginals", "t", "W1", w1, std::nullopt};
  if (!res.summary["fit"].is_null()) {
    const auto& f = res.summary["fit"];
    res.plot->fit = DecayFit{f["K"], f["omega"], f["r2"], f["points"]};
  }
  return res;
}

// ---- oscillation-decay

ExperimentResult oscillation_decay(const ExperimentConfig& cfg, std::vector<std::string>& notes) {
  ExperimentResult res;
  KineticModel model = build_model(cfg);
  Grid grid = build_grid(cfg);
  SolverParams p = solver_params(cfg, model, grid, notes, false);
  Field u0 = named_field(cfg.string("initial.u0"), grid, cfg.number("initial.u0_width"));
  LyapunovFunction phi = build_quadratic_lyapunov(build_potential(cfg.at("lyapunov.potential")), model.d());
  SolveStats stats;
  auto series = solve_adjoint(model, u0, p, &stats);
  const double theta = cfg.number("analysis.theta");
  const long long budget = cfg.integer("analysis.pair_budget");
  const double margin = cfg.number("analysis.margin");
  res.table.header = {"time", "seminorm", "sup_grad_v", "sup_grad_y"};
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < series.size(); ++k) {
    double s = oscillation_seminorm(series[k], phi, theta, budget, derive_seed(cfg.seed, k, 0x05c1),
                                    SeminormOptions{margin, 16});
    auto g = gradient_norms(series[k], margin);
    res.table.add({format_number(series[k].time), format_number(s), format_number(g.sup_grad_v), format_number(g.sup_grad_y)});
    pts.emplace_back(series[k].time, s);
  }
  FitWindow w = fit_window(cfg, p.t_end, &notes);
  Criterion dec{"strictly_decreasing", true, ""};
  double prev = std::numeric_limits<double>::infinity();
  int checked = 0;
  for (const auto& [t, s] : pts) {
    if (t < w.lo || t > w.hi) continue;
    if (!(s < prev)) {
      dec.passed = false;
      dec.detail = "seminorm did not decrease at t=" + format_number(t);
    }
    prev = s;
    ++checked;
  }
  if (dec.passed) dec.detail = "decreasing across " + std::to_string(checked) + " record times";
  res.criteria.push_back(dec);
  res.criteria.push_back(rate_criterion("seminorm_decay_rate", pts, cfg, w, res.summary));
  res.summary["steps"] = stats.steps;
  res.summary["dt"] = p.dt;
  res.plot = PlotSpec{"oscillation seminorm of the adjoint solution", "t", "[u(t)]", pts, std::nullopt};
  if (!res.summary["fit"].is_null()) {
    const auto& f = res.summary["fit"];
    res.plot->fit = DecayFit{f["K"], f["omega"], f["r2"], f["points"]};
  }
  return res;
}

// ---- smoothing

ExperimentResult smoothing(const ExperimentConfig& cfg, std::vector<std::string>& notes) {
  ExperimentResult res;
  KineticModel model = build_model(cfg);
  Grid grid = build_grid(cfg);
  SolverParams p = solver_params(cfg, model, grid, notes, false);
  Field u0 = named_field(cfg.string("initial.u0"), grid, cfg.number("initial.u0_width"));
  LyapunovFunction phi = build_quadratic_lyapunov(build_potential(cfg.at("lyapunov.potential")), model.d());
  auto series = solve_adjoint(model, u0, p);
  const double margin = cfg.number("analysis.margin");
  const Json& vil = cfg.at("analysis.villani");
  const double lambda = vil["lambda"], eps = vil["eps"], delta = vil["delta"];
  auto W = villani_functional(series, lambda, eps, delta, margin);
  const double u0max = std::max(std::abs(u0.min()), std::abs(u0.max()));
  const double wbound = 0.5 * lambda * u0max * u0max;
  const double tmin = cfg.number("analysis.smoothing_t_min");
  FitWindow w = fit_window(cfg, p.t_end, nullptr);

  res.table.header = {"time", "sup_grad_v", "sup_grad_y", "combined", "villani_sup", "weighted_grad_ratio"};
  std::vector<std::pair<double, double>> comb;
  double cmin = std::numeric_limits<double>::infinity(), cmax = 0.0, gy_first = -1.0, wworst = 0.0;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double t = series[k].time;
    auto g = gradient_norms(series[k], margin);
    double c = std::sqrt(t) * g.sup_grad_v + t * std::sqrt(t) * g.sup_grad_y;
    double ratio = t > 0.0 ? weighted_gradient_ratio(u0, series[k], phi, margin) : 0.0;
    res.table.add({format_number(t), format_number(g.sup_grad_v), format_number(g.sup_grad_y), format_number(c),
                   format_number(W[k].second), format_number(ratio)});
    if (t >= tmin && t <= w.hi) {
      comb.emplace_back(t, c);
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
      if (gy_first < 0.0) gy_first = g.sup_grad_y;
    }
    if (t > 0.0) wworst = std::max(wworst, W[k].second);
  }
  const double rmax = cfg.number("analysis.ratio_max");
  Criterion bounded{"gradient_bound_bounded", false, ""};
  if (comb.size() >= 2 && cmin > 0.0) {
    bounded.passed = cmax / cmin < rmax;
    bounded.detail = "max/min of sqrt(t)|grad_v u| + t^1.5 |grad_y u| = " + fmt("%.4f", cmax / cmin) +
                     " over " + std::to_string(comb.size()) + " times in [" + fmt("%g", tmin) + ", " + fmt("%g", w.hi) +
                     "] (limit " + fmt("%g", rmax) + ")";
  } else {
    bounded.detail = "need at least two record times with a positive bound in the window";
  }
  res.criteria.push_back(bounded);
  Criterion gy{"y_regularization", gy_first > 0.0, "sup |grad_y u| at the first record time >= t_min: " + format_number(gy_first)};
  res.criteria.push_back(gy);
  const double tol = cfg.number("analysis.villani_tol");
  Criterion vc{"villani_max_principle", wworst <= wbound * (1.0 + tol),
               "max_t sup W = " + fmt("%.6g", wworst) + " vs (lambda/2)|u0|^2 (1+tol) = " + fmt("%.6g", wbound * (1.0 + tol))};
  res.criteria.push_back(vc);
  res.summary["villani_bound"] = wbound;
  res.summary["villani_max"] = wworst;
  res.summary["bound_ratio"] = cmin > 0.0 ? cmax / cmin : 0.0;
  res.plot = PlotSpec{"hypoelliptic gradient bound", "t", "sqrt(t)|grad_v u| + t^1.5 |grad_y u|", comb, std::nullopt};
  return res;
}

// ---- lyapunov-check

ExperimentResult lyapunov_check(const ExperimentConfig& cfg, std::vector<std::string>&) {
  ExperimentResult res;
  KineticModel model = build_model(cfg);
  PotentialSpec pot = build_potential(cfg.at("lyapunov.potential"));
  LyapunovFunction phi = build_quadratic_lyapunov(pot, model.d());
  SampleSettings settings{cfg.number("lyapunov.half_width"), cfg.integer("lyapunov.samples")};
  SampledCheck lb = check_lyapunov_lower_bound(model, phi, settings);
  CertifyOptions opts;
  opts.shells = static_cast<int>(cfg.integer("lyapunov.shells"));
  LyapunovReport rep = certify_lyapunov(model, phi, Box::symmetric(model.state_dim(), settings.half_width),
                                        settings.count, cfg.number("lyapunov.omega0_candidate"), opts);
  SampledCheck diss = check_dissipativity(model, pot, settings);
  SampledCheck conf = check_potential_confinement(pot, model.d(), settings);

  res.criteria.push_back({"pointwise_lower_bound", lb.passed && lb.violations == 0,
                          std::to_string(lb.violations) + " violations in " + std::to_string(lb.samples) +
                              " samples, worst slack " + fmt("%.3e", lb.worst_slack)});
  res.criteria.push_back({"liploc", rep.cond_liploc, "worst ratio " + fmt("%.4f", rep.liploc_worst_ratio)});
  res.criteria.push_back({"phi_squared_lower_bound", rep.cond_vfi2, "L(phi^2) >= " + fmt("%.4g", rep.vfi2_worst_value) + " over all samples, positive on the outer shell"});
  res.criteria.push_back({"segment_integral", rep.cond_vfi3, "best c " + fmt("%.4f", rep.vfi3_best_c)});
  res.criteria.push_back({"growth_rate", rep.certified,
                          "omega0_hat " + fmt("%.4f", rep.omega0_hat) + " at radius " + fmt("%g", rep.radius_R)});
  res.criteria.push_back({"dissipativity", diss.passed && conf.passed,
                          "b-dissipativity worst slack " + fmt("%.3e", diss.worst_slack) + ", potential confinement worst slack " +
                              fmt("%.3e", conf.worst_slack)});
  res.summary["eps"] = phi.eps();
  res.summary["delta"] = phi.delta();
  res.summary["C_eps"] = phi.lower_bound_constant(model.kappa());
  res.summary["omega0_hat"] = rep.omega0_hat;
  res.summary["k0_hat"] = rep.k0_hat;
  res.summary["sample_count"] = rep.sample_count;
  res.table.header = {"radius", "inf_ratio"};
  std::vector<std::pair<double, double>> shells;
  for (const auto& [r, v] : rep.shell_infima) {
    res.table.add({format_number(r), format_number(v)});
    shells.emplace_back(r, v);
  }
  res.plot = PlotSpec{"shell infimum of L[phi]/phi", "radius", "inf L[phi]/phi", shells, std::nullopt};
  return res;
}

// ---- tv-decay

ExperimentResult tv_decay(const ExperimentConfig& cfg, std::vector<std::string>& notes) {
  ExperimentResult res;
  KineticModel model = build_model(cfg);
  Grid grid = build_grid(cfg);
  SolverParams p = solver_params(cfg, model, grid, notes, true);
  Field m1 = density_on_grid(cfg.at("initial.first"), grid);
  Field m2 = density_on_grid(cfg.at("initial.second"), grid);
  LyapunovFunction phi = build_quadratic_lyapunov(build_potential(cfg.at("lyapunov.potential")), model.d());
  SolveStats st1, st2;
  auto s1 = solve_fokker_planck(model, m1, p, &st1);
  auto s2 = solve_fokker_planck(model, m2, p, &st2);
  const long long fam = cfg.integer("analysis.d1phi_family");
  res.table.header = {"time", "tv_phi", "mass_1", "mass_2"};
  if (fam > 0) res.table.header.push_back("d1phi_lower_bound");
  std::vector<std::pair<double, double>> pts;
  double worst_mass = 0.0;
  for (std::size_t k = 0; k < s1.size(); ++k) {
    double tv = weighted_tv(s1[k], s2[k], phi);
    double a = s1[k].integral(), b = s2[k].integral();
    worst_mass = std::max({worst_mass, std::abs(a - 1.0), std::abs(b - 1.0)});
    std::vector<std::string> row = {format_number(s1[k].time), format_number(tv), format_number(a), format_number(b)};
    if (fam > 0) {
      row.push_back(format_number(d1phi_lower_bound(s1[k], s2[k], phi, static_cast<int>(fam), derive_seed(cfg.seed, k, 0xd1)).value));
    }
    res.table.add(std::move(row));
    pts.emplace_back(s1[k].time, tv);
  }
  FitWindow w = fit_window(cfg, p.t_end, &notes);
  res.criteria.push_back(rate_criterion("tv_phi_decay_rate", pts, cfg, w, res.summary));
  const double mtol = cfg.number("analysis.mass_tol");
  res.criteria.push_back({"mass_conservation", worst_mass <= mtol,
                          "worst |mass - 1| = " + fmt("%.3e", worst_mass) + " (limit " + fmt("%g", mtol) + ")"});
  res.summary["dt"] = p.dt;
  res.summary["max_step_mass_drift"] = std::max(st1.max_mass_drift, st2.max_mass_drift);
  res.plot = PlotSpec{"phi-weighted total variation", "t", "|m1 - m2|_TV,phi", pts, std::nullopt};
  if (!res.summary["fit"].is_null()) {
    const auto& f = res.summary["fit"];
    res.plot->fit = DecayFit{f["K"], f["omega"], f["r2"], f["points"]};
  }
  return res;
}

// ---- duality

ExperimentResult duality(const ExperimentConfig& cfg, std::vector<std::string>& notes) {
  ExperimentResult res;
  KineticModel model = build_model(cfg);
  const bool refine = cfg.at("analysis.refine").get<bool>();
  const double t = cfg.number("solver.t_end");
  const Json& dtj = cfg.at("solver.dt");
  // With an automatic step the coarse run uses twice the fine admissible step,
  // so h and dt are both halved under refinement.
  std::vector<int> levels = refine ? std::vector<int>{1, 2} : std::vector<int>{1};
  std::vector<SolverParams> params;
  {
    Grid fine = build_grid(cfg, levels.back());
    SolverParams pf = solver_params(cfg, model, fine, notes, true);
    for (int lv : levels) {
      SolverParams p = pf;
      p.record_times = {t};
      if (dtj.is_string()) {
        p.dt = pf.dt * static_cast<double>(levels.back() / lv);
      } else {
        p.dt = dtj.get<double>() / lv;
      }
      params.push_back(p);
    }
  }
  res.table.header = {"zeta", "n_v", "n_y", "dt", "lhs", "rhs", "gap"};
  const double gmax = cfg.number("analysis.gap_max"), g1max = cfg.number("analysis.gap_one_max");
  Json gaps = Json::object();
  for (const auto& zj : cfg.at("initial.zetas")) {
    const std::string zname = zj;
    std::vector<double> g;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      Grid grid = build_grid(cfg, levels[l]);
      Field m0 = density_on_grid(cfg.at("initial.first"), grid);
      Field zeta = named_field(zname, grid);
      DualityResult r = duality_check(model, m0, zeta, t, params[l]);
      res.table.add({zname, std::to_string(grid.n_v), std::to_string(grid.n_y), format_number(params[l].dt),
                     format_number(r.lhs), format_number(r.rhs), format_number(r.gap)});
      g.push_back(r.gap);
    }
    gaps[zname] = g;
    const double limit = zname == "one" ? g1max : gmax;
    res.criteria.push_back({"gap_" + zname, g[0] <= limit, "gap " + fmt("%.3e", g[0]) + " (limit " + fmt("%g", limit) + ")"});
    if (refine && zname == "tanh_v") {
      double ratio = g[1] > 0.0 ? g[0] / g[1] : std::numeric_limits<double>::infinity();
      double lo = cfg.number("analysis.refine_ratio_min"), hi = cfg.number("analysis.refine_ratio_max");
      res.criteria.push_back({"refinement_tanh_v", ratio >= lo && ratio <= hi,
                              "coarse/fine gap ratio " + fmt("%.3f", ratio) + " (required in [" + fmt("%g", lo) + ", " +
                                  fmt("%g", hi) + "])"});
      res.summary["refinement_ratio"] = ratio;
    }
  }
  res.summary["gaps"] = gaps;
  return res;
}

const char* claim_of(const std::string& experiment) {
  if (experiment == "coupling-rate") return "W1 between the marginals of reflection-coupled pairs decays exponentially";
  if (experiment == "oscillation-decay") return "the phi-weighted oscillation seminorm of adjoint solutions decays exponentially";
  if (experiment == "smoothing") return "sqrt(t)|grad_v u| + t^(3/2)|grad_y u| <= C |u0|_inf for the degenerate adjoint equation";
  if (experiment == "lyapunov-check") return "the quadratic Lyapunov function satisfies L[phi] >= alpha/4 |v|^2 + eps beta/4 |y|^2 - C_eps";
  if (experiment == "tv-decay") return "the phi-weighted total variation between two Fokker-Planck solutions decays exponentially";
  return "int zeta dm(t) = int u(t) dm0 with u the adjoint solution started from zeta";
}

}  // namespace

ExperimentResult compute_experiment(const ExperimentConfig& cfg) {
  std::vector<std::string> notes;
  ExperimentResult res;
  const std::string& e = cfg.experiment;
  if (e == "coupling-rate") {
    res = coupling_rate(cfg, notes);
  } else if (e == "oscillation-decay") {
    res = oscillation_decay(cfg, notes);
  } else if (e == "smoothing") {
    res = smoothing(cfg, notes);
  } else if (e == "lyapunov-check") {
    res = lyapunov_check(cfg, notes);
  } else if (e == "tv-decay") {
    res = tv_decay(cfg, notes);
  } else if (e == "duality") {
    res = duality(cfg, notes);
  } else {
    throw ConfigError("experiment", "config key 'experiment': unknown experiment '" + e + "'");
  }
  res.experiment = e;
  res.claim = claim_of(e);
  Json crit = Json::array();
  for (const auto& c : res.criteria) crit.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  Json summary = {{"experiment", e}, {"claim", res.claim}, {"seed", cfg.seed}, {"passed", res.passed()}, {"criteria", crit}};
  for (const auto& [k, v] : res.summary.items()) summary[k] = v;
  Json derivs = Json::array();
  for (const auto& d : cfg.derivations) derivs.push_back(d);
  for (const auto& d : notes) derivs.push_back(d);
  summary["derivations"] = derivs;
  res.summary = std::move(summary);
  return res;
}

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + p.string() + "'");
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path dir = cfg.output_dir();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  ExperimentResult res = compute_experiment(cfg);
  if (cfg.wants("csv")) {
    write_text(dir / "results.csv", res.table.to_csv());
    res.artifacts.push_back((dir / "results.csv").string());
  }
  if (cfg.wants("json")) {
    write_text(dir / "summary.json", res.summary.dump(2) + "\n");
    res.artifacts.push_back((dir / "summary.json").string());
  }
  if (cfg.wants("svg") && res.plot && !res.plot->series.empty()) {
    emit_plot(*res.plot, (dir / "plot.svg").string());
    res.artifacts.push_back((dir / "plot.svg").string());
  }
  Json manifest = {{"tool", "hypoflow"}, {"version", kVersion}, {"experiment", cfg.experiment},
                   {"seed", cfg.seed},  {"config", cfg.resolved}, {"derivations", res.summary["derivations"]}};
  Json arts = Json::array();
  for (const auto& a : res.artifacts) arts.push_back(fs::path(a).filename().string());
  manifest["artifacts"] = arts;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  res.artifacts.push_back((dir / "manifest.json").string());
  return res;
}

// -------------------------------------------------------------------- plot

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// 1, 2, 5 x 10^k step giving about `target` intervals.
double nice_step(double span, int target) {
  double raw = span / target;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double r = raw / mag;
  double s = r < 1.5 ? 1.0 : (r < 3.5 ? 2.0 : (r < 7.5 ? 5.0 : 10.0));
  return s * mag;
}

}  // namespace

std::string render_plot(const PlotSpec& plot) {
  if (plot.series.empty()) throw InvalidInput("plot: empty series");
  for (const auto& [x, y] : plot.series) {
    if (!std::isfinite(x) || !std::isfinite(y)) throw InvalidInput("plot: non-finite point");
  }
  const bool logy = std::all_of(plot.series.begin(), plot.series.end(), [](const auto& p) { return p.second > 0.0; });
  const double W = 640, H = 420, left = 80, right = 20, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  auto ty = [&](double y) { return logy ? std::log10(y) : y; };
  double x0 = plot.series.front().first, x1 = x0, y0 = ty(plot.series.front().second), y1 = y0;
  for (const auto& [x, y] : plot.series) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, ty(y));
    y1 = std::max(y1, ty(y));
  }
  if (plot.fit && logy) {
    for (double x : {x0, x1}) {
      double v = plot.fit->K * std::exp(-plot.fit->omega * x);
      if (v > 0.0 && std::isfinite(std::log10(v))) {
        y0 = std::min(y0, std::log10(v));
        y1 = std::max(y1, std::log10(v));
      }
    }
  }
  if (x1 == x0) {
    x0 -= 0.5;
    x1 += 0.5;
  }
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double ypad = 0.05 * (y1 - y0);
  y0 -= ypad;
  y1 += ypad;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double yt) { return top + (1.0 - (yt - y0) / (y1 - y0)) * ph; };

  std::string s;
  auto add = [&](const std::string& x) { s += x; };
  add("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
  add("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n");
  add("<rect width=\"640\" height=\"420\" fill=\"white\"/>\n");
  add("<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + xml_escape(plot.title) + "</text>\n");
  add("<rect x=\"" + fmt("%.2f", left) + "\" y=\"" + fmt("%.2f", top) + "\" width=\"" + fmt("%.2f", pw) +
      "\" height=\"" + fmt("%.2f", ph) + "\" fill=\"none\" stroke=\"black\"/>\n");
  // x ticks
  double xs = nice_step(x1 - x0, 6);
  for (double x = std::ceil(x0 / xs) * xs; x <= x1 + 1e-12 * std::abs(x1); x += xs) {
    double X = px(x);
    add("<line x1=\"" + fmt("%.2f", X) + "\" y1=\"" + fmt("%.2f", top + ph) + "\" x2=\"" + fmt("%.2f", X) + "\" y2=\"" +
        fmt("%.2f", top + ph + 5) + "\" stroke=\"black\"/>\n");
    add("<text x=\"" + fmt("%.2f", X) + "\" y=\"" + fmt("%.2f", top + ph + 18) + "\" text-anchor=\"middle\">" +
        fmt("%g", std::abs(x) < 1e-12 * xs ? 0.0 : x) + "</text>\n");
  }
  // y ticks
  if (logy) {
    double step = std::max(1.0, std::floor((y1 - y0) / 6.0));
    for (double e = std::ceil(y0 / step) * step; e <= y1; e += step) {
      double Y = py(e);
      add("<line x1=\"" + fmt("%.2f", left - 5) + "\" y1=\"" + fmt("%.2f", Y) + "\" x2=\"" + fmt("%.2f", left) +
          "\" y2=\"" + fmt("%.2f", Y) + "\" stroke=\"black\"/>\n");
      add("<text x=\"" + fmt("%.2f", left - 8) + "\" y=\"" + fmt("%.2f", Y + 4) + "\" text-anchor=\"end\">1e" +
          fmt("%g", e) + "</text>\n");
    }
  } else {
    double ys = nice_step(y1 - y0, 6);
    for (double y = std::ceil(y0 / ys) * ys; y <= y1; y += ys) {
      double Y = py(y);
      add("<line x1=\"" + fmt("%.2f", left - 5) + "\" y1=\"" + fmt("%.2f", Y) + "\" x2=\"" + fmt("%.2f", left) +
          "\" y2=\"" + fmt("%.2f", Y) + "\" stroke=\"black\"/>\n");
      add("<text x=\"" + fmt("%.2f", left - 8) + "\" y=\"" + fmt("%.2f", Y + 4) + "\" text-anchor=\"end\">" +
          fmt("%g", std::abs(y) < 1e-12 * ys ? 0.0 : y) + "</text>\n");
    }
  }
  add("<text x=\"" + fmt("%.2f", left + pw / 2) + "\" y=\"" + fmt("%.2f", H - 15) + "\" text-anchor=\"middle\">" +
      xml_escape(plot.x_label) + "</text>\n");
  add("<text x=\"18\" y=\"" + fmt("%.2f", top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
      fmt("%.2f", top + ph / 2) + ")\">" + xml_escape(plot.y_label + (logy ? " (log scale)" : "")) + "</text>\n");
  for (const auto& [x, y] : plot.series) {
    add("<circle cx=\"" + fmt("%.2f", px(x)) + "\" cy=\"" + fmt("%.2f", py(ty(y))) + "\" r=\"3\" fill=\"#1f4e9c\"/>\n");
  }
  if (plot.fit) {
    const DecayFit& f = *plot.fit;
    if (logy) {
      std::string pts;
      for (int k = 0; k <= 50; ++k) {
        double x = x0 + (x1 - x0) * k / 50.0;
        double v = std::log10(f.K) - f.omega * x / std::log(10.0);
        if (k) pts += ' ';
        pts += fmt("%.2f", px(x)) + "," + fmt("%.2f", py(v));
      }
      add("<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>\n");
    }
    add("<text x=\"" + fmt("%.2f", left + pw - 8) + "\" y=\"" + fmt("%.2f", top + 18) + "\" text-anchor=\"end\">K = " +
        fmt("%.4g", f.K) + ", omega = " + fmt("%.4g", f.omega) + ", R^2 = " + fmt("%.4f", f.r2) + "</text>\n");
  }
  if (!logy) {
    add("<text x=\"" + fmt("%.2f", left + 8) + "\" y=\"" + fmt("%.2f", top + 18) +
        "\" fill=\"#c0392b\">warning: nonpositive values, linear scale</text>\n");
  }
  add("</svg>\n");
  return s;
}

void emit_plot(const PlotSpec& plot, const std::string& path) {
  std::string svg = render_plot(plot);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << svg;
}

// ------------------------------------------------------------------ oracle

std::string oracle_text(const std::string& name) {
  if (name != "kinetic-ou") throw InvalidInput("unknown oracle '" + name + "' (available: kinetic-ou)");
  Matrix one = Matrix::Identity(1, 1), zero = Matrix::Zero(1, 1);
  KineticModel model = KineticModel::create(1, 0.0, DriftSpec::linear(one, zero), DriftSpec::linear(one, one));
  auto mats = LinearModelMatrices::from_model(model);
  auto eig = eigenvalues_small(mats.A);
  RotatedMetric m = default_metric(model.gamma(), model.ell_H(), model.ell_B());
  LyapunovFunction phi = build_quadratic_lyapunov(PotentialSpec::quadratic(1.0, 1.0, 1.0, 0.0), 1);
  Matrix sigma = stationary_covariance(mats);
  Vector a0(2);
  a0 << 1.0, 0.0;
  Vector c1 = linear_adjoint_solution(mats, a0, 1.0);
  Vector mean1 = expm(mats.A) * a0;

  std::ostringstream os;
  os << "kinetic OU: d=1, kappa=0, H(v,y)=v, B(v,y)=v+y\n";
  os << "drift matrix A = [[" << mats.A(0, 0) << ", " << mats.A(0, 1) << "], [" << mats.A(1, 0) << ", " << mats.A(1, 1) << "]]\n";
  os << "eigenvalues = ";
  for (std::size_t k = 0; k < eig.size(); ++k) {
    os << (k ? ", " : "") << fmt("%.12g", eig[k].real()) << (eig[k].imag() >= 0 ? " + " : " - ")
       << fmt("%.12g", std::abs(eig[k].imag())) << "i";
  }
  os << "\n";
  os << "spectral abscissa = " << fmt("%.12g", spectral_abscissa(mats)) << "\n";
  os << "mean decay rate = " << fmt("%.12g", -spectral_abscissa(mats)) << "\n";
  os << "structural constants (gamma, ell_H, ell_B) = (" << model.gamma() << ", " << model.ell_H() << ", "
     << model.ell_B() << ")\n";
  os << "default metric mu = " << fmt("%.12g", m.mu) << ", lambda = " << fmt("%.12g", m.lambda) << "\n";
  os << "stationary covariance = [[" << fmt("%.12g", sigma(0, 0)) << ", " << fmt("%.12g", sigma(0, 1)) << "], ["
     << fmt("%.12g", sigma(1, 0)) << ", " << fmt("%.12g", sigma(1, 1)) << "]]\n";
  os << "Lyapunov (alpha=beta=c0=1, c1=0): eps = delta = " << fmt("%.12g", phi.eps())
     << ", C_eps = " << fmt("%.12g", phi.lower_bound_constant(0.0)) << "\n";
  os << "adjoint coefficients c(1) from (1, 0) = (" << fmt("%.12g", c1[0]) << ", " << fmt("%.12g", c1[1]) << ")\n";
  os << "mean at t=1 from (1, 0) = (" << fmt("%.12g", mean1[0]) << ", " << fmt("%.12g", mean1[1]) << ")\n";
  return os.str();
}

}  // namespace hypoflow
