#pragma once

// Experiment commands. Each returns its main table plus auxiliary series and
// trajectories; writing is left to the caller so that it stays serialized.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ifsm/config.hpp"
#include "ifsm/diagnostics.hpp"
#include "ifsm/dynamics.hpp"
#include "ifsm/model.hpp"
#include "ifsm/operators.hpp"
#include "ifsm/steady.hpp"
#include "ifsm/table.hpp"

namespace ifsm {

struct CommandOutput {
  ResultTable table;
  std::vector<std::pair<std::string, ResultTable>> series;        // stem -> table
  std::vector<std::pair<std::string, TrajectoryFile>> trajectories;  // file name -> frames

  void merge(CommandOutput&& part) {
    for (std::size_t i = 0; i < part.table.size(); ++i) table.append_row(part.table, i);
    for (auto& s : part.series) series.push_back(std::move(s));
    for (auto& t : part.trajectories) trajectories.push_back(std::move(t));
  }

  bool has_status(const std::string& s) const {
    for (std::size_t i = 0; i < table.size(); ++i)
      if (table.status(i) == s) return true;
    return false;
  }
};

/// Runs f(0..n-1) on up to `jobs` threads. f must not throw.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) f(i);
    });
  for (auto& t : pool) t.join();
}

inline std::string eps_label(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", eps);
  return buf;
}

inline void stamp(ResultTable& t, const ExperimentConfig& cfg, std::chrono::steady_clock::time_point start) {
  t.config_hash = cfg.hash;
  t.seed = cfg.seed;
  t.code_version = kCodeVersion;
  t.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline void write_outputs(const CommandOutput& out, const std::filesystem::path& dir) {
  out.table.write(dir, out.table.command());
  for (const auto& [stem, t] : out.series) t.write(dir, stem);
  for (const auto& [name, tf] : out.trajectories) write_trajectory(dir / name, tf.frames, tf.stride);
}

namespace detail {

inline void error_row(ResultTable::RowRef row, const Error& e, const std::string& prefix = {}) {
  row.status(std::string(to_string(e.kind()))).message(prefix + e.what());
}

inline SteadyProblem steady_problem(const ExperimentConfig& cfg, const SelectionFunction& m, double eps) {
  SteadyProblem p;
  p.data = selection_data(m, eps, cfg.K, cfg.rule());
  p.tol = cfg.steady_tol;
  p.max_iterations = cfg.steady_max_iterations;
  p.C = cfg.C;
  return p;
}

inline Grid n_grid(const ExperimentConfig& cfg) { return Grid::symmetric(cfg.grid_half_width, cfg.grid_points); }

inline std::pair<double, double> mass_parameters(const ExperimentConfig& cfg, const SelectionFunction& m) {
  if (!cfg.raw) return {1.0, 1.0};
  RawModel raw = *cfg.raw;
  raw.m = m;
  const NondimModel nd = nondimensionalize(raw);
  return {nd.r_tilde, nd.kappa_tilde};
}

}  // namespace detail

// ------------------------------------------------------------------ nondim

inline ResultTable nondim_table() {
  return ResultTable("nondim", {{"eps", "", "segregational scale alpha sqrt(|m''(x0)|/r)"},
                                {"r_tilde", "", "1 - m(x0)/r"},
                                {"kappa_tilde", "", "kappa/r"},
                                {"trait_scale", "trait", "sqrt(r/|m''(x0)|)"},
                                {"time_scale", "time", "1/r"},
                                {"curvature_sign", "", "+1 minimum, -1 maximum"},
                                {"m(-2)", "", "normalized m sampled at y = -2"},
                                {"m(-1)", "", ""},
                                {"m(1)", "", ""},
                                {"m(2)", "", ""}});
}

inline CommandOutput cmd_nondim(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  if (!cfg.raw) fail(ErrorKind::config, "nondim needs model.r, model.kappa, model.alpha or model.x0");
  CommandOutput out;
  out.table = nondim_table();
  auto row = out.table.add_row();
  try {
    RawModel raw = *cfg.raw;
    raw.m = cfg.selection_function();
    const NondimModel nd = nondimensionalize(raw);
    row.set("eps", nd.eps)
        .set("r_tilde", nd.r_tilde)
        .set("kappa_tilde", nd.kappa_tilde)
        .set("trait_scale", nd.trait_scale)
        .set("time_scale", nd.time_scale)
        .set("curvature_sign", nd.curvature_sign);
    for (int y : {-2, -1, 1, 2}) row.set("m(" + std::to_string(y) + ")", nd.m(static_cast<double>(y)));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config) throw;
    detail::error_row(row, e);
  }
  stamp(out.table, cfg, start);
  return out;
}

// ------------------------------------------------------------------ steady

inline ResultTable steady_table() {
  std::vector<Column> cols{{"eps", "", ""},
                           {"margin", "", "min m + 1 - m(0); admissible when positive"},
                           {"alpha1", "", "first Hermite coefficient"},
                           {"alpha1_over_eps", "", ""},
                           {"alpha2_norm", "", "||(alpha_k)_{k>=2}||, the gaussian distance"},
                           {"distance_over_eps2", "", ""},
                           {"residual", "", "||Galerkin right-hand side|| at the solution"},
                           {"certified", "", "residual <= 10 tol"},
                           {"iterations", "", ""},
                           {"membership_C", "", "max(|alpha1|/eps, ||alpha2||/eps^2)"},
                           {"k0", "", "measured index for the L-inverse bound"},
                           {"l_bound_ok", "", "every L solve within 2^(k0+2)"},
                           {"m1_over_eps2", "", "|M1|/eps^2, q-frame"}};
  for (int k = 2; k <= 6; ++k)
    cols.push_back({"dev" + std::to_string(k), "eps^" + std::to_string(k + 2), "|M_k - eps^k sigma_k|/eps^(k+2), q-frame"});
  cols.push_back({"rho_bar", "", "steady population size (r~ - int m q)/kappa~"});
  cols.push_back({"oracle_discrepancy", "", "relative L2(G^-1) distance to the grid oracle"});
  cols.push_back({"oracle_iterations", "", ""});
  cols.push_back({"omega_excess", "", "min over eta of mass on Omega_eta minus eta/(1+eta)"});
  return ResultTable("steady", std::move(cols));
}

inline CommandOutput steady_task(const ExperimentConfig& cfg, const SelectionFunction& m, double eps) {
  CommandOutput out;
  out.table = steady_table();
  auto row = out.table.add_row();
  row.set("eps", eps);
  const std::string label = eps_label(eps);
  try {
    const Admissibility adm = check_admissibility(m, 0.0);
    row.set("margin", adm.margin);
    if (!adm.admissible && !cfg.override_admissibility) {
      row.status("refused").message("extremum at 0 is inadmissible (margin " + format_double(adm.margin) +
                                    "); pass --override-admissibility to solve anyway");
      return out;
    }
  } catch (const Error& e) {
    if (!cfg.override_admissibility) {
      detail::error_row(row, e, "admissibility: ");
      return out;
    }
  }

  SteadyProblem p = detail::steady_problem(cfg, m, eps);
  std::vector<std::pair<int, double>> trace;
  p.on_iteration = [&](int it, double update) { trace.emplace_back(it, update); };
  SteadySolution sol;
  try {
    sol = steady_fixed_point(p);
  } catch (const Error& e) {
    std::string where;
    if (e.kind() == ErrorKind::divergence) {
      ResultTable t("steady_trace", {{"iteration", "", ""}, {"update", "", "||alpha2 change||"}});
      for (const auto& [it, u] : trace) {
        auto r = t.add_row();
        r.set("iteration", it);
        if (std::isfinite(u)) r.set("update", u);
        else r.status("non-finite");
      }
      const std::string stem = "steady_trace_eps" + label;
      out.series.emplace_back(stem, std::move(t));
      where = " (trace in " + stem + ".csv)";
    }
    row.status(std::string(to_string(e.kind()))).message(e.what() + where);
    return out;
  }

  const auto conc = concentration_table(moments_from_coeffs(sol.alpha, 6), eps, 6);
  const auto [r_tilde, kappa_tilde] = detail::mass_parameters(cfg, m);
  row.set("alpha1", sol.alpha1())
      .set("alpha1_over_eps", sol.alpha1() / eps)
      .set("alpha2_norm", sol.alpha2_norm())
      .set("distance_over_eps2", gaussian_distance(sol.alpha) / (eps * eps))
      .set("residual", sol.residual)
      .set("certified", sol.certified)
      .set("iterations", sol.iterations)
      .set("membership_C", sol.membership)
      .set("l_bound_ok", sol.l_bound_ok)
      .set("m1_over_eps2", conc.first_moment_ratio)
      .set("rho_bar", sol.steady_mass(r_tilde, kappa_tilde));
  if (sol.k0) row.set("k0", *sol.k0);
  for (int k = 2; k <= 6; ++k) row.set("dev" + std::to_string(k), conc.row(k).ratio);

  std::vector<std::string> problems;
  if (!sol.certified) problems.push_back("residual above 10 tol");
  GridDensity density = sol.density(Frame::q, detail::n_grid(cfg));
  if (cfg.oracle) {
    GridOracleOptions go;
    go.half_width = cfg.grid_half_width;
    go.points = cfg.grid_points;
    go.tol = cfg.oracle_tol;
    go.theta = cfg.oracle_theta;
    go.max_iterations = cfg.oracle_max_iterations;
    go.override_admissibility = cfg.override_admissibility;
    go.method = cfg.grid_method;
    try {
      const GridOracleResult g = steady_grid_oracle(m, eps, go);
      row.set("oracle_discrepancy", oracle_discrepancy(sol, g.q)).set("oracle_iterations", g.iterations);
      density = g.q;
    } catch (const Error& e) {
      detail::error_row(row, e, "grid oracle: ");
      return out;
    }
  }
  try {
    double excess = INFINITY;
    for (double eta : cfg.eta) {
      const OmegaEtaMass om = omega_eta_mass(density, m, eta);
      excess = std::min(excess, om.mass_in_omega - om.bound);
      if (om.violated) problems.push_back("mass on Omega_eta below eta/(1+eta) at eta = " + format_double(eta));
    }
    row.set("omega_excess", excess);
  } catch (const Error& e) {
    problems.push_back(std::string("omega_eta: ") + e.what());
  }
  if (!problems.empty()) {
    std::string msg;
    for (const auto& s : problems) msg += (msg.empty() ? "" : "; ") + s;
    row.status(sol.certified ? "omega-violated" : "uncertified").message(msg);
  }
  return out;
}

// ------------------------------------------------------------------ evolve

inline ResultTable evolve_table() {
  return ResultTable("evolve", {{"eps", "", ""},
                                {"lambda", "1/time", "fitted decay rate of ||beta(t)||, Galerkin"},
                                {"r2", "", "fit coefficient of determination"},
                                {"fit_points", "", ""},
                                {"distance_initial", "", "||beta(0)||"},
                                {"distance_final", "", "||beta(T)||"},
                                {"end_time", "time", ""},
                                {"odd_leakage", "", "max odd coefficient deviation, Galerkin"},
                                {"rho_final", "", "population size at T from rho(0) = 1"},
                                {"grid_lambda", "1/time", "fitted decay rate, grid"},
                                {"grid_r2", "", ""},
                                {"grid_distance_final", "", ""},
                                {"grid_mass_drift", "1/time", "max |mass - 1|/h before renormalization"},
                                {"grid_odd_leakage", "", "max odd coefficient of the projected grid state"},
                                {"grid_min_value", "", "most negative grid value"},
                                {"lambda_rel_diff", "", "|grid_lambda - lambda|/lambda"}});
}

inline ResultTable series_table(const Trajectory& tr) {
  ResultTable t("series", {{"t", "time", ""},
                           {"distance", "", "||beta(t)||"},
                           {"selection_mean", "", "int m q"},
                           {"first_moment", "", "M1 in the frame of the state"}});
  for (std::size_t i = 0; i < tr.size(); ++i)
    t.add_row()
        .set("t", tr.t[i])
        .set("distance", tr.distance[i])
        .set("selection_mean", tr.selection_mean[i])
        .set("first_moment", tr.first_moment[i]);
  return t;
}

inline CommandOutput evolve_task(const ExperimentConfig& cfg, const SelectionFunction& m, double eps) {
  CommandOutput out;
  out.table = evolve_table();
  auto row = out.table.add_row();
  row.set("eps", eps);
  const std::string label = eps_label(eps);

  SteadyProblem p = detail::steady_problem(cfg, m, eps);
  SteadySolution sol;
  try {
    sol = steady_fixed_point(p);
  } catch (const Error& e) {
    detail::error_row(row, e, "steady reference: ");
    return out;
  }
  Coefficients init = sol.alpha;
  for (int k : cfg.perturbation.modes) init[static_cast<std::size_t>(k)] += cfg.perturbation.amplitude;

  GalerkinOptions go;
  go.T = cfg.T;
  go.h_max = cfg.h_max;
  go.reference = sol.alpha;
  go.snapshot_stride = cfg.snapshot_stride;
  std::vector<std::string> problems;
  std::string status = "ok";
  double lambda = 0.0;
  bool have_lambda = false;
  try {
    const Trajectory tr = integrate_galerkin(init, p.data, go);
    row.set("distance_initial", tr.distance.front())
        .set("distance_final", tr.distance.back())
        .set("end_time", tr.end_time)
        .set("odd_leakage", tr.max_odd_leakage);
    out.series.emplace_back("evolve_series_eps" + label, series_table(tr));
    if (cfg.snapshot_stride > 0)
      out.trajectories.emplace_back("evolve_eps" + label + ".ifsm", TrajectoryFile{kTrajectoryVersion, cfg.snapshot_stride, tr.snapshots});
    const auto [r_tilde, kappa_tilde] = detail::mass_parameters(cfg, m);
    row.set("rho_final", integrate_mass(1.0, tr.t, tr.selection_mean, r_tilde, kappa_tilde, tr.end_time).final_value());
    if (tr.status == RunStatus::blowup) {
      status = "blowup";
      problems.push_back("coefficients exceeded the blow-up threshold at t = " + format_double(tr.end_time));
    } else {
      try {
        const DecayFit fit = decay_rate(tr, cfg.fit);
        row.set("lambda", fit.lambda).set("r2", fit.r2).set("fit_points", fit.points);
        lambda = fit.lambda;
        have_lambda = true;
      } catch (const Error& e) {
        status = std::string(to_string(e.kind()));
        problems.push_back(e.what());
      }
    }
  } catch (const Error& e) {
    detail::error_row(row, e);
    return out;
  }

  if (cfg.evolve_grid) {
    try {
      const GridDensity q0 = to_frame(synthesize_grid(init, detail::n_grid(cfg), Frame::n, eps), Frame::q);
      GridDynamicsOptions gopt;
      gopt.T = cfg.T;
      gopt.h_max = cfg.h_max;
      gopt.method = cfg.grid_method;
      gopt.reference = sol.alpha;
      gopt.snapshot_stride = cfg.snapshot_stride;
      const Trajectory gt = integrate_grid(q0, m, eps, gopt);
      row.set("grid_distance_final", gt.distance.back())
          .set("grid_mass_drift", gt.max_mass_drift_rate)
          .set("grid_odd_leakage", gt.max_odd_leakage)
          .set("grid_min_value", gt.min_value);
      out.series.emplace_back("evolve_grid_series_eps" + label, series_table(gt));
      if (cfg.snapshot_stride > 0)
        out.trajectories.emplace_back("evolve_grid_eps" + label + ".ifsm",
                                      TrajectoryFile{kTrajectoryVersion, cfg.snapshot_stride, gt.snapshots});
      if (gt.status == RunStatus::blowup) {
        if (status == "ok") status = "blowup";
        problems.push_back("grid run blew up at t = " + format_double(gt.end_time));
      } else {
        try {
          const DecayFit fit = decay_rate(gt, cfg.fit);
          row.set("grid_lambda", fit.lambda).set("grid_r2", fit.r2);
          if (have_lambda && lambda != 0.0) row.set("lambda_rel_diff", std::abs(fit.lambda - lambda) / std::abs(lambda));
        } catch (const Error& e) {
          if (status == "ok") status = std::string(to_string(e.kind()));
          problems.push_back(std::string("grid: ") + e.what());
        }
      }
    } catch (const Error& e) {
      if (status == "ok") status = std::string(to_string(e.kind()));
      problems.push_back(std::string("grid: ") + e.what());
    }
  }
  if (status != "ok") row.status(status);
  if (!problems.empty()) {
    std::string msg;
    for (const auto& s : problems) msg += (msg.empty() ? "" : "; ") + s;
    row.message(msg);
  }
  return out;
}

// ------------------------------------------------------------ pooled runs

using Task = std::function<CommandOutput()>;

/// Runs tasks on the pool and merges them in task order.
inline CommandOutput run_tasks(ResultTable empty, const std::vector<Task>& tasks, int jobs) {
  std::vector<CommandOutput> parts(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    try {
      parts[i] = tasks[i]();
    } catch (const Error& e) {
      parts[i].table = empty;
      detail::error_row(parts[i].table.add_row(), e);
    } catch (const std::exception& e) {
      parts[i].table = empty;
      parts[i].table.add_row("internal").message(e.what());
    }
  });
  CommandOutput out;
  out.table = std::move(empty);
  for (auto& p : parts) out.merge(std::move(p));
  return out;
}

inline CommandOutput cmd_steady(const ExperimentConfig& cfg, int jobs = 1) {
  const auto start = std::chrono::steady_clock::now();
  const SelectionFunction m = cfg.selection_function();
  std::vector<Task> tasks;
  for (double eps : cfg.eps) tasks.push_back([&cfg, m, eps] { return steady_task(cfg, m, eps); });
  CommandOutput out = run_tasks(steady_table(), tasks, jobs);
  stamp(out.table, cfg, start);
  return out;
}

inline CommandOutput cmd_evolve(const ExperimentConfig& cfg, int jobs = 1) {
  const auto start = std::chrono::steady_clock::now();
  const SelectionFunction m = cfg.selection_function();
  std::vector<Task> tasks;
  for (double eps : cfg.eps) tasks.push_back([&cfg, m, eps] { return evolve_task(cfg, m, eps); });
  CommandOutput out = run_tasks(evolve_table(), tasks, jobs);
  stamp(out.table, cfg, start);
  for (auto& [stem, t] : out.series) stamp(t, cfg, start);
  return out;
}

// ------------------------------------------------------------------- sweep

inline ResultTable sweep_table() {
  return ResultTable("sweep", {{"eps_coarse", "", ""},
                               {"eps_fine", "", "eps_coarse / eps_fine is the refinement factor"},
                               {"distance_ratio", "", "(distance/eps^2) fine over coarse"},
                               {"dev2_ratio", "", "dev2 fine over coarse"},
                               {"dev4_ratio", "", "dev4 fine over coarse"},
                               {"lambda_ratio", "", "lambda coarse over lambda fine"},
                               {"grid_lambda_ratio", "", "grid_lambda coarse over grid_lambda fine"}});
}

struct SweepOutput {
  CommandOutput steady;
  CommandOutput evolve;
  CommandOutput summary;
};

/// Steady and evolve rows for every eps in one pool, then ratios between
/// consecutive eps.
inline SweepOutput cmd_sweep(const ExperimentConfig& cfg, int jobs = 1) {
  const auto start = std::chrono::steady_clock::now();
  const SelectionFunction m = cfg.selection_function();
  const std::size_t n = cfg.eps.size();
  std::vector<Task> tasks;
  for (double eps : cfg.eps) tasks.push_back([&cfg, m, eps] { return steady_task(cfg, m, eps); });
  for (double eps : cfg.eps) tasks.push_back([&cfg, m, eps] { return evolve_task(cfg, m, eps); });
  std::vector<CommandOutput> parts(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    try {
      parts[i] = tasks[i]();
    } catch (const std::exception& e) {
      parts[i].table = i < n ? steady_table() : evolve_table();
      parts[i].table.add_row("internal").message(e.what());
    }
  });
  SweepOutput out;
  out.steady.table = steady_table();
  out.evolve.table = evolve_table();
  for (std::size_t i = 0; i < n; ++i) out.steady.merge(std::move(parts[i]));
  for (std::size_t i = 0; i < n; ++i) out.evolve.merge(std::move(parts[n + i]));

  out.summary.table = sweep_table();
  const ResultTable& st = out.steady.table;
  const ResultTable& ev = out.evolve.table;
  auto ok = [](const ResultTable& t, std::size_t i, const std::string& col) {
    return std::holds_alternative<double>(t.at(i, col)) || std::holds_alternative<std::int64_t>(t.at(i, col));
  };
  for (std::size_t i = 1; i < n; ++i) {
    auto row = out.summary.table.add_row();
    row.set("eps_coarse", cfg.eps[i - 1]).set("eps_fine", cfg.eps[i]);
    std::vector<std::string> missing;
    auto ratio = [&](const ResultTable& t, const std::string& col, const std::string& out_col, bool coarse_over_fine) {
      if (!ok(t, i - 1, col) || !ok(t, i, col) || t.number(coarse_over_fine ? i : i - 1, col) == 0.0) {
        missing.push_back(col);
        return;
      }
      const double a = t.number(i - 1, col), b = t.number(i, col);
      row.set(out_col, coarse_over_fine ? a / b : b / a);
    };
    ratio(st, "distance_over_eps2", "distance_ratio", false);
    ratio(st, "dev2", "dev2_ratio", false);
    ratio(st, "dev4", "dev4_ratio", false);
    ratio(ev, "lambda", "lambda_ratio", true);
    if (cfg.evolve_grid) ratio(ev, "grid_lambda", "grid_lambda_ratio", true);
    if (!missing.empty()) {
      std::string msg = "missing inputs:";
      for (const auto& s : missing) msg += " " + s;
      row.status("incomplete").message(msg);
    }
  }
  stamp(out.steady.table, cfg, start);
  stamp(out.evolve.table, cfg, start);
  stamp(out.summary.table, cfg, start);
  return out;
}

// ---------------------------------------------------------------- validate

inline ResultTable validate_table() {
  return ResultTable("validate", {{"suite", "", ""},
                                  {"check", "", ""},
                                  {"measured", "", "worst value over the samples"},
                                  {"threshold", "", "pass when measured <= threshold"},
                                  {"margin", "", "threshold - measured"}});
}

namespace detail {

inline void check_row(ResultTable& t, const std::string& suite, const std::string& check, double measured,
                      double threshold) {
  const bool pass = measured <= threshold;
  auto r = t.add_row(pass ? "pass" : "fail");
  r.set("suite", suite).set("check", check).set("threshold", threshold);
  if (std::isfinite(measured)) r.set("measured", measured).set("margin", threshold - measured);
  else r.message("non-finite measurement");
}

inline void report_row(ResultTable& t, const std::string& suite, const std::string& check, double measured,
                       const std::string& note) {
  auto r = t.add_row("report");
  r.set("suite", suite).set("check", check).message(note);
  if (std::isfinite(measured)) r.set("measured", measured);
}

inline Coefficients unit_vector(std::size_t n, std::size_t k) {
  Coefficients a(n, 0.0);
  a[k] = 1.0;
  return a;
}

/// sqrt((k+l)!) / (2^(k+l) sqrt(k!) sqrt(l!)) in log space.
inline double product_rule_coefficient(int k, int l) {
  return std::exp(0.5 * std::lgamma(k + l + 1.0) - 0.5 * std::lgamma(k + 1.0) - 0.5 * std::lgamma(l + 1.0) -
                  (k + l) * std::log(2.0));
}

inline GridDensity skewed_density(const Grid& grid, double eps) {
  auto q = sample(
      grid,
      [eps](double x) {
        const double y = x / eps;
        return std::exp(-0.5 * y * y) * (1.0 + 0.4 * std::tanh(y)) / eps;
      },
      Frame::q, eps);
  q.normalize();
  return q;
}

inline GridDensity bimodal_density(const Grid& grid, double eps) {
  auto q = sample(
      grid,
      [eps](double x) {
        const double a = (x - 1.2 * eps) / (0.6 * eps), b = (x + 1.2 * eps) / (0.6 * eps);
        return std::exp(-0.5 * a * a) + 0.6 * std::exp(-0.5 * b * b);
      },
      Frame::q, eps);
  q.normalize();
  return q;
}

/// Coefficients with alpha_0 = 1, |alpha_1| ~ 0.3 and ||alpha_2|| <= 0.3.
inline Coefficients random_state(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> nd;
  Coefficients a(n, 0.0);
  a[0] = 1.0;
  a[1] = 0.3 * nd(rng);
  double s = 0.0;
  for (std::size_t k = 2; k < n; ++k) {
    a[k] = nd(rng) / static_cast<double>(k * k);
    s += a[k] * a[k];
  }
  const double scale = std::uniform_real_distribution<double>(0.0, 0.3)(rng) / std::sqrt(s);
  for (std::size_t k = 2; k < n; ++k) a[k] *= scale;
  return a;
}

/// Central moments of (sum alpha_k H_k) G by Gauss-Hermite quadrature.
inline std::vector<double> quadrature_moments(const Coefficients& alpha, int k_max, double& mean) {
  const auto rule = gauss_hermite_rule(128);
  double m0 = 0.0, m1 = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double f = rule.weights[i] * synthesize(alpha, rule.nodes[i]);
    m0 += f;
    m1 += f * rule.nodes[i];
  }
  mean = m1 / m0;
  std::vector<double> c(static_cast<std::size_t>(k_max) + 1, 0.0);
  for (std::size_t i = 0; i < rule.size(); ++i) {
    const double f = rule.weights[i] * synthesize(alpha, rule.nodes[i]);
    const double d = rule.nodes[i] - mean;
    double p = 1.0;
    for (int k = 0; k <= k_max; ++k, p *= d) c[static_cast<std::size_t>(k)] += f * p;
  }
  return c;
}

}  // namespace detail

/// T1[H_k, H_l] against the closed form for k + l <= max_degree; one summary
/// row plus a failure row per offending pair.
inline void validate_product_identity(ResultTable& t, const ProductTable& table, int max_degree) {
  const std::size_t n = static_cast<std::size_t>(table.max_degree()) + 1;
  double worst = 0.0;
  for (int k = 0; k <= max_degree; ++k)
    for (int l = 0; k + l <= max_degree; ++l) {
      const auto g = reproduction_spectral(table, detail::unit_vector(n, static_cast<std::size_t>(k)),
                                           detail::unit_vector(n, static_cast<std::size_t>(l)));
      double err = 0.0;
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double expect = static_cast<int>(j) == k + l ? detail::product_rule_coefficient(k, l) : 0.0;
        err = std::max(err, std::abs(g[j] - expect));
      }
      if (err > 1e-12) detail::check_row(t, "product_identity", "k=" + std::to_string(k) + " l=" + std::to_string(l), err, 1e-12);
      worst = std::max(worst, err);
    }
  detail::check_row(t, "product_identity", "all k+l<=" + std::to_string(max_degree), worst, 1e-12);
}

inline void validate_bilinear_bound(ResultTable& t, const ProductTable& table, int samples, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  const std::size_t n = static_cast<std::size_t>(table.max_degree()) + 1;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Coefficients a(n), b(n);
    for (double& v : a) v = nd(rng);
    for (double& v : b) v = nd(rng);
    worst = std::max(worst, weighted_l2_norm(reproduction_spectral(table, a, b)) / (weighted_l2_norm(a) * weighted_l2_norm(b)));
  }
  detail::check_row(t, "bilinear_bound", std::to_string(samples) + " random pairs, ||T1[a,b]||/(||a|| ||b||)", worst, 1.0);
}

/// Grid reproduction against the moment law through order 6, error relative
/// to max(eps^k, |predicted M_k|); and the variance identity on the grid.
inline void validate_moment_law(ResultTable& t, double eps, ConvolutionMethod method = ConvolutionMethod::direct) {
  const Grid grid = default_grid(Frame::q, eps);
  const std::vector<std::pair<std::string, GridDensity>> inputs{
      {"gaussian", gaussian_on_grid(grid, 0.0, eps * eps, Frame::q, eps)},
      {"bimodal", detail::bimodal_density(grid, eps)},
      {"skewed", detail::skewed_density(grid, eps)}};
  for (const auto& [name, q] : inputs) {
    const auto in = moments_from_grid(q, 6);
    const auto predicted = reproduction_central_moments(in, eps, 6);
    const auto measured = moments_from_grid(reproduction_grid(q, eps, method), 6);
    double worst = std::abs(measured.m1 - predicted.m1) / eps;
    for (int k = 2; k <= 6; ++k)
      worst = std::max(worst, std::abs(measured[k] - predicted[k]) / std::max(std::pow(eps, k), std::abs(predicted[k])));
    const std::string e = " eps=" + eps_label(eps);
    detail::check_row(t, "moment_law", name + e, worst, 1e-6);
    const double var = eps * eps / 2.0 + in[2] / 2.0;
    detail::check_row(t, "variance_identity", name + e, std::abs(measured[2] - var) / var, 1e-8);
  }
}

inline void validate_coefficient_moments(ResultTable& t, int samples, std::mt19937_64& rng) {
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const auto a = detail::random_state(rng, 9);
    const auto m = moments_from_coeffs(a, 6);
    double mean = 0.0;
    const auto q = detail::quadrature_moments(a, 6, mean);
    worst = std::max(worst, std::abs(m.m1 - mean));
    for (int k = 2; k <= 6; ++k)
      worst = std::max(worst, std::abs(m[k] - q[static_cast<std::size_t>(k)]) / std::max(1.0, std::abs(q[static_cast<std::size_t>(k)])));
  }
  detail::check_row(t, "coefficient_moments", std::to_string(samples) + " random states, order <= 6", worst, 1e-8);
}

/// Operator norm of L^-1 on random right-hand sides against 2^(k0+2).
inline void validate_linear_inverse(ResultTable& t, const SelectionFunction& m, double eps, int K, int samples,
                                    std::mt19937_64& rng) {
  const auto d = selection_data(m, eps, K);
  const auto k0 = measured_k0(d.min_at_nodes);
  const std::string check = m.name + " eps=" + eps_label(eps);
  if (!k0) {
    detail::report_row(t, "linear_inverse", check, NAN, "min m + 1 <= 0: no k0");
    return;
  }
  const LinearPart L(assemble_L(d), k0);
  std::normal_distribution<double> nd;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd rhs(K - 1);
    for (Eigen::Index i = 0; i < rhs.size(); ++i) rhs[i] = nd(rng);
    worst = std::max(worst, solve_L(L, rhs).x.norm() / rhs.norm());
  }
  detail::check_row(t, "linear_inverse", check + " k0=" + std::to_string(*k0), worst, std::ldexp(1.0, *k0 + 2));
}

/// ||m_eps||/eps^2, |m_1|/eps^3 and max_k |m_k|/eps^k across the eps list.
/// Reported, not asserted: the constants exist but their values are not fixed.
inline void report_source_scaling(ResultTable& t, const SelectionFunction& m, const std::vector<double>& eps, int K) {
  std::vector<double> norm, first, high;
  for (double e : eps) {
    const auto d = selection_data(m, e, K);
    norm.push_back(d.l2_norm / (e * e));
    first.push_back(std::abs(d.m1()) / (e * e * e));
    double h = 0.0;
    for (int k = 1; k <= 6; ++k) h = std::max(h, std::abs(d.m[static_cast<std::size_t>(k)]) / std::pow(e, k));
    high.push_back(h);
  }
  auto spread = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi > 0.0 ? (*hi - *lo) / *hi : 0.0;
  };
  detail::report_row(t, "source_scaling", m.name + " ||m_eps||/eps^2 spread", spread(norm), "relative spread across eps");
  detail::report_row(t, "source_scaling", m.name + " |m_1|/eps^3 spread", spread(first), "relative spread across eps");
  detail::report_row(t, "source_scaling", m.name + " max_k |m_k|/eps^k", *std::max_element(high.begin(), high.end()),
                     "largest over k <= 6 and eps");
}

inline CommandOutput cmd_validate(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  CommandOutput out;
  out.table = validate_table();
  ResultTable& t = out.table;
  std::mt19937_64 rng(cfg.seed);

  ProductTable table(std::max(cfg.K, cfg.validate_max_degree));
  if (cfg.break_product) {
    const auto [k, l] = *cfg.break_product;
    require(k <= table.max_degree(), ErrorKind::config, "validate.break_product beyond the table");
    table.override_entry(k, l, 2.0 * table(k, l) + 0.5);
  }
  validate_product_identity(t, table, cfg.validate_max_degree);
  validate_bilinear_bound(t, table, cfg.validate_samples, rng);
  for (double eps : cfg.eps) validate_moment_law(t, eps, cfg.grid_method);
  validate_coefficient_moments(t, 100, rng);
  const std::vector<SelectionFunction> builtins{selection::quadratic(), selection::even_quartic(), selection::nonsymmetric()};
  for (const auto& m : builtins)
    for (double eps : cfg.eps) validate_linear_inverse(t, m, eps, cfg.K, 100, rng);
  for (const auto& m : builtins) report_source_scaling(t, m, cfg.eps, cfg.K);
  stamp(t, cfg, start);
  return out;
}

inline bool validation_failed(const ResultTable& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto s = t.status(i);
    if (s != "pass" && s != "report") return true;
  }
  return false;
}

}  // namespace ifsm
