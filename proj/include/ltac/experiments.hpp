// SPDX-License-Identifier: Apache-2.0
//
// Metrics, single trials, Monte Carlo sweeps, status grids and ADMM timing.
// Every trial derives its scenario and channels from (master seed, trial), so
// tables do not depend on how tasks are spread over workers.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltac/admm.hpp"
#include "ltac/baselines.hpp"
#include "ltac/channel.hpp"
#include "ltac/csv.hpp"
#include "ltac/model.hpp"
#include "ltac/reference_oracle.hpp"
#include "ltac/rng.hpp"
#include "ltac/sum_solvers.hpp"
#include "ltac/worker_pool.hpp"

namespace ltac {

enum class AlgorithmKind { no_control, offline, online, channel_strength };

struct Algorithm {
  AlgorithmKind kind = AlgorithmKind::offline;
  int samples = 9;  // J, online only

  std::string label() const {
    switch (kind) {
      case AlgorithmKind::no_control: return "no_control";
      case AlgorithmKind::offline: return "offline";
      case AlgorithmKind::online: return "online_J" + std::to_string(samples);
      case AlgorithmKind::channel_strength: return "channel_strength";
    }
    return "?";
  }
};

/// "no_control", "offline", "channel_strength", "online" (J = 9) or "online_J<n>".
inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "no_control") return {AlgorithmKind::no_control};
  if (s == "offline") return {AlgorithmKind::offline};
  if (s == "channel_strength") return {AlgorithmKind::channel_strength};
  if (s == "online") return {AlgorithmKind::online, 9};
  if (s.rfind("online_J", 0) == 0) {
    std::size_t used = 0;
    int J = -1;
    try {
      J = std::stoi(s.substr(8), &used);
    } catch (const std::exception&) {
    }
    if (J >= 1 && used == s.size() - 8) return {AlgorithmKind::online, J};
  }
  throw ConfigError("unknown algorithm '" + s + "'");
}

struct RunMetrics {
  double admission_ratio = 0.0;
  double switching_frequency = 0.0;  // switches per slice transition
  int switches = 0;
  CostBreakdown cost;
  double wall_time_s = 0.0;
  long admm_iterations = 0;
  int sum_iterations = 0;
  int deflations = 0;
};

inline RunMetrics compute_metrics(const HorizonPlan& plan, const ProblemConfig& cfg) {
  detail::check_plan(plan, cfg);
  const int M = cfg.num_users, T = cfg.num_slices;
  RunMetrics r;
  int rejected = 0;
  for (int t = 0; t < T; ++t)
    for (int m = 0; m < M; ++m) {
      const int now = indicator(plan.slack[static_cast<std::size_t>(t)][m]);
      rejected += now;
      if (t + 1 < T) r.switches += std::abs(indicator(plan.slack[static_cast<std::size_t>(t + 1)][m]) - now);
    }
  r.admission_ratio = 1.0 - static_cast<double>(rejected) / (M * T);
  r.switching_frequency = T >= 2 ? static_cast<double>(r.switches) / (T - 1) : 0.0;
  r.cost = true_cost(plan, cfg);
  return r;
}

/// User drop and channel horizon of one trial.
inline ChannelSet trial_channels(const Scenario& base, const ProblemConfig& cfg, std::uint64_t seed) {
  const auto scen = place_users(base, cfg.num_users, seed);
  return sample_horizon(scen, cfg.num_antennas, cfg.num_slices, seed);
}

struct TrialResult {
  RunMetrics metrics;
  HorizonPlan plan;
  // (slice, row) per SUM iteration; slice -1 marks the whole-horizon solve
  std::vector<std::pair<int, SumTraceRow>> sum_trace;
};

/// Per-slice admitted counts of a plan (slack exactly zero).
inline std::vector<int> admitted_counts(const HorizonPlan& plan) {
  std::vector<int> K;
  for (const auto& v : plan.slack) K.push_back(static_cast<int>((v.array() == 0.0).count()));
  return K;
}

/// Runs one algorithm on given channels. Channel strength needs the admitted
/// counts K of an online (J = 9) run on the same channels; when absent, that
/// run is done here.
inline TrialResult run_algorithm(const Algorithm& alg, const ChannelSet& ch, const ProblemConfig& cfg,
                                 std::uint64_t seed, std::optional<std::vector<int>> K = std::nullopt) {
  const auto start = std::chrono::steady_clock::now();
  TrialResult out;
  SolveStats stats;
  switch (alg.kind) {
    case AlgorithmKind::no_control: {
      auto r = solve_no_control(ch, cfg);
      out.plan = std::move(r.plan);
      stats = r.stats;
      break;
    }
    case AlgorithmKind::offline: {
      auto r = solve_offline(ch, cfg);
      for (const auto& row : r.sum.trace) out.sum_trace.emplace_back(-1, row);
      out.plan = std::move(r.plan);
      stats = r.stats;
      break;
    }
    case AlgorithmKind::online: {
      OnlineOptions o;
      o.samples = alg.samples;
      auto r = solve_online(ch, cfg, o, seed);
      for (std::size_t t = 0; t < r.slices.size(); ++t)
        for (const auto& row : r.slices[t].trace) out.sum_trace.emplace_back(static_cast<int>(t), row);
      out.plan = std::move(r.plan);
      stats = r.stats;
      break;
    }
    case AlgorithmKind::channel_strength: {
      if (!K) K = admitted_counts(solve_online(ch, cfg, OnlineOptions{}, seed).plan);
      auto r = channel_strength_plan(ch, cfg, *K);
      out.plan = std::move(r.plan);
      stats.deflations = r.deflations;
      break;
    }
  }
  out.metrics = compute_metrics(out.plan, cfg);
  out.metrics.admm_iterations = stats.admm_iterations;
  out.metrics.sum_iterations = stats.sum_iterations;
  out.metrics.deflations = stats.deflations;
  out.metrics.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline TrialResult run_trial(const Algorithm& alg, std::uint64_t seed, const ProblemConfig& cfg,
                             const Scenario& scenario = {}) {
  return run_algorithm(alg, trial_channels(scenario, cfg, seed), cfg, seed);
}

/// Runs a list of algorithms on one trial's channels. Channel strength reuses
/// the online J = 9 plan when that algorithm is in the list.
inline std::vector<TrialResult> run_trial_set(const std::vector<Algorithm>& algs, std::uint64_t seed,
                                              const ProblemConfig& cfg, const Scenario& scenario = {}) {
  const auto ch = trial_channels(scenario, cfg, seed);
  std::vector<TrialResult> out(algs.size());
  std::optional<std::vector<int>> K;
  for (std::size_t i = 0; i < algs.size(); ++i)
    if (algs[i].kind != AlgorithmKind::channel_strength) {
      out[i] = run_algorithm(algs[i], ch, cfg, seed);
      if (algs[i].kind == AlgorithmKind::online && algs[i].samples == 9) K = admitted_counts(out[i].plan);
    }
  for (std::size_t i = 0; i < algs.size(); ++i)
    if (algs[i].kind == AlgorithmKind::channel_strength) {
      const auto start = std::chrono::steady_clock::now();
      if (!K) K = admitted_counts(solve_online(ch, cfg, OnlineOptions{}, seed).plan);
      out[i] = run_algorithm(algs[i], ch, cfg, seed, K);
      out[i].metrics.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  return out;
}

struct SweepSpec {
  std::string parameter = "gamma";  // gamma | lambda1 | lambda2 | M | J
  std::vector<double> values{1.0};
  int trials = 1;
  std::uint64_t master_seed = 1;
  std::vector<Algorithm> algorithms{{AlgorithmKind::offline}};
  ProblemConfig config;
  Scenario scenario;
  int workers = 1;

  void validate() const {
    if (trials < 1) throw ConfigError("sweep: trials must be >= 1");
    if (values.empty()) throw ConfigError("sweep: values must be nonempty");
    if (algorithms.empty()) throw ConfigError("sweep: algorithms must be nonempty");
    if (parameter != "gamma" && parameter != "lambda1" && parameter != "lambda2" && parameter != "M" &&
        parameter != "J")
      throw ConfigError("sweep: unknown parameter '" + parameter + "'");
  }
};

/// Config and algorithm list for one swept value. J overrides the sample
/// count of every online algorithm.
inline std::pair<ProblemConfig, std::vector<Algorithm>> apply_sweep_value(const SweepSpec& spec, double value) {
  ProblemConfig cfg = spec.config;
  auto algs = spec.algorithms;
  const auto as_int = [&](const char* what) {
    if (value != std::floor(value) || value < 1) throw ConfigError(std::string("sweep: ") + what + " values must be positive integers");
    return static_cast<int>(value);
  };
  if (spec.parameter == "gamma") cfg.qos_target = value;
  else if (spec.parameter == "lambda1") cfg.reject_weight = value;
  else if (spec.parameter == "lambda2") cfg.switch_weight = value;
  else if (spec.parameter == "M") cfg.num_users = as_int("M");
  else if (spec.parameter == "J") {
    const int J = as_int("J");
    for (auto& a : algs)
      if (a.kind == AlgorithmKind::online) a.samples = J;
  }
  cfg.validate();
  return {cfg, algs};
}

struct SweepRow {
  double value = 0.0;
  std::string algorithm;
  int trial = 0;
  std::uint64_t seed = 0;
  RunMetrics metrics;
  std::string error;  // empty on success
};

struct SweepSummaryRow {
  double value = 0.0;
  std::string algorithm;
  int trials = 0;    // successful trials
  int failures = 0;
  std::map<std::string, std::pair<double, double>> stats;  // column -> (mean, stderr)
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ordered by (value, algorithm, trial)
  std::vector<SweepSummaryRow> summary;
  int failures = 0;
};

inline std::uint64_t trial_seed(std::uint64_t master, int trial) {
  return rng::derive_seed(master, static_cast<std::uint64_t>(trial));
}

inline const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> cols{"admission_ratio", "switching_frequency", "switches",
                                             "transmit_power",  "reject_cost",         "switch_cost",
                                             "total_cost",      "admm_iterations",     "sum_iterations",
                                             "deflations"};
  return cols;
}

inline std::vector<double> metric_values(const RunMetrics& m) {
  return {m.admission_ratio,
          m.switching_frequency,
          static_cast<double>(m.switches),
          m.cost.transmit_power,
          m.cost.reject_cost,
          m.cost.switch_cost,
          m.cost.total,
          static_cast<double>(m.admm_iterations),
          static_cast<double>(m.sum_iterations),
          static_cast<double>(m.deflations)};
}

/// Trials are the unit of parallel work; all algorithms of a trial share its
/// channels. A numerical failure is recorded on the row, not thrown.
inline SweepResult run_sweep(const SweepSpec& spec) {
  spec.validate();
  const std::size_t V = spec.values.size(), A = spec.algorithms.size();
  const auto Tr = static_cast<std::size_t>(spec.trials);
  std::vector<std::vector<SweepRow>> slots(V * Tr);
  {
    WorkerPool pool(spec.workers);
    pool.run(V * Tr, [&](std::size_t task) {
      const std::size_t vi = task / Tr;
      const int trial = static_cast<int>(task % Tr);
      const double value = spec.values[vi];
      const auto [cfg, algs] = apply_sweep_value(spec, value);
      const auto seed = trial_seed(spec.master_seed, trial);
      auto& out = slots[task];
      out.resize(A);
      for (std::size_t a = 0; a < A; ++a) out[a] = {value, algs[a].label(), trial, seed, {}, {}};
      try {
        const auto res = run_trial_set(algs, seed, cfg, spec.scenario);
        for (std::size_t a = 0; a < A; ++a) out[a].metrics = res[a].metrics;
      } catch (const NumericalError& e) {
        for (auto& row : out) row.error = e.what();
      }
    });
  }
  SweepResult res;
  for (std::size_t vi = 0; vi < V; ++vi)
    for (std::size_t a = 0; a < A; ++a) {
      SweepSummaryRow s;
      s.value = spec.values[vi];
      const std::size_t ncol = metric_columns().size();
      std::vector<double> sum(ncol, 0.0), sq(ncol, 0.0);
      for (std::size_t t = 0; t < Tr; ++t) {
        const auto& row = slots[vi * Tr + t][a];
        s.algorithm = row.algorithm;
        res.rows.push_back(row);
        if (!row.error.empty()) {
          ++s.failures;
          continue;
        }
        ++s.trials;
        const auto vals = metric_values(row.metrics);
        for (std::size_t c = 0; c < ncol; ++c) {
          sum[c] += vals[c];
          sq[c] += vals[c] * vals[c];
        }
      }
      for (std::size_t c = 0; c < ncol; ++c) {
        const double n = s.trials;
        const double mean = n > 0 ? sum[c] / n : std::nan("");
        const double var = n > 1 ? std::max(0.0, (sq[c] - n * mean * mean) / (n - 1)) : 0.0;
        s.stats[metric_columns()[c]] = {mean, n > 0 ? std::sqrt(var / n) : std::nan("")};
      }
      res.failures += s.failures;
      res.summary.push_back(std::move(s));
    }
  return res;
}

inline std::string sweep_rows_csv(const SweepSpec& spec, const SweepResult& r) {
  std::string out = csv::header_comment("sweep_trials");
  std::vector<std::string> head{spec.parameter, "algorithm", "trial", "seed"};
  for (const auto& c : metric_columns()) head.push_back(c);
  head.push_back("error");
  out += csv::join(head) + '\n';
  for (const auto& row : r.rows) {
    std::vector<std::string> cells{csv::num(row.value), row.algorithm, std::to_string(row.trial),
                                   std::to_string(row.seed)};
    for (double x : metric_values(row.metrics)) cells.push_back(row.error.empty() ? csv::num(x) : "");
    cells.push_back(row.error.empty() ? "" : "numerical_failure");
    out += csv::join(cells) + '\n';
  }
  return out;
}

inline std::string sweep_summary_csv(const SweepSpec& spec, const SweepResult& r) {
  std::string out = csv::header_comment("sweep_summary");
  std::vector<std::string> head{spec.parameter, "algorithm", "trials", "failures"};
  for (const auto& c : metric_columns()) {
    head.push_back(c + "_mean");
    head.push_back(c + "_stderr");
  }
  out += csv::join(head) + '\n';
  for (const auto& s : r.summary) {
    std::vector<std::string> cells{csv::num(s.value), s.algorithm, std::to_string(s.trials),
                                   std::to_string(s.failures)};
    for (const auto& c : metric_columns()) {
      cells.push_back(csv::num(s.stats.at(c).first));
      cells.push_back(csv::num(s.stats.at(c).second));
    }
    out += csv::join(cells) + '\n';
  }
  return out;
}

/// T x M grid, 1 = admissible (zero slack).
inline std::string emit_status_grid(const HorizonPlan& plan) {
  std::string out = csv::header_comment("status_grid");
  const int M = plan.slack.empty() ? 0 : static_cast<int>(plan.slack.front().size());
  std::vector<std::string> head{"t"};
  for (int m = 0; m < M; ++m) head.push_back("user" + std::to_string(m));
  out += csv::join(head) + '\n';
  for (int t = 0; t < plan.num_slices(); ++t) {
    std::vector<std::string> cells{std::to_string(t)};
    for (int m = 0; m < M; ++m) cells.push_back(std::to_string(1 - indicator(plan.slack[static_cast<std::size_t>(t)][m])));
    out += csv::join(cells) + '\n';
  }
  return out;
}

inline std::string plan_csv(const HorizonPlan& plan, const std::vector<CMatrix>& H, const ProblemConfig& cfg) {
  std::string out = csv::header_comment("plan");
  out += "t,m,admitted,slack,beam_power,sinr\n";
  for (int t = 0; t < plan.num_slices(); ++t) {
    const auto ut = static_cast<std::size_t>(t);
    for (int m = 0; m < cfg.num_users; ++m)
      out += csv::join({std::to_string(t), std::to_string(m), std::to_string(1 - indicator(plan.slack[ut][m])),
                        csv::num(plan.slack[ut][m]), csv::num(plan.beams[ut].col(m).squaredNorm()),
                        csv::num(sinr(H[ut], plan.beams[ut], cfg.noise_power, m))}) +
             '\n';
  }
  return out;
}

inline std::string sum_trace_csv(const std::vector<std::pair<int, SumTraceRow>>& trace) {
  std::string out = csv::header_comment("sum_trace");
  out += "slice,iteration,objective,accepted,admm_iterations,admm_converged,primal,dual\n";
  for (const auto& [t, r] : trace)
    out += csv::join({std::to_string(t), std::to_string(r.iteration), csv::num(r.objective),
                      std::to_string(int(r.accepted)), std::to_string(r.admm_iterations),
                      std::to_string(int(r.admm_converged)), csv::num(r.primal), csv::num(r.dual)}) +
           '\n';
  return out;
}

inline std::string metrics_csv(const std::vector<std::string>& labels, const std::vector<RunMetrics>& ms) {
  std::string out = csv::header_comment("metrics");
  std::vector<std::string> head{"algorithm"};
  for (const auto& c : metric_columns()) head.push_back(c);
  out += csv::join(head) + '\n';
  for (std::size_t i = 0; i < ms.size(); ++i) {
    std::vector<std::string> cells{labels[i]};
    for (double x : metric_values(ms[i])) cells.push_back(csv::num(x));
    out += csv::join(cells) + '\n';
  }
  return out;
}

struct BenchSpec {
  std::vector<int> users{4, 8, 16};
  std::vector<int> samples{9};  // J values
  int iterations = 200;
  int repeats = 3;              // best of
  bool oracle = true;
  int oracle_max_variables = 600;  // skip the dense interior-point timing above this size
  std::uint64_t seed = 1;
};

struct BenchRow {
  int M = 0, N = 0, J = 0;
  double serial_s = 0.0;    // per ADMM iteration
  double parallel_s = 0.0;  // serial / (J + 1): one core group per node
  std::optional<double> oracle_s;  // per convex solve
};

/// Per-iteration ADMM time on an online star graph. Iterations run without
/// the convergence stop so every point does the same amount of work.
inline std::vector<BenchRow> bench_timing(const BenchSpec& spec, const ProblemConfig& base, const Scenario& scenario = {}) {
  std::vector<BenchRow> rows;
  for (int M : spec.users) {
    detail::require(M >= 1 && M <= 64, "bench_timing: M must lie in [1, 64]");
    for (int J : spec.samples) {
      ProblemConfig cfg = base;
      cfg.num_users = M;
      cfg.num_slices = 1;
      cfg.validate();
      const auto ch = trial_channels(scenario, cfg, spec.seed);
      const auto future = sample_future(ch.variances, cfg.num_antennas, J, rng::derive_seed(spec.seed, 1));
      const auto g = online_star_graph(ch.H.front(), future, StatusVector(static_cast<std::size_t>(M), 0), cfg);
      const std::vector<RVector> vt(static_cast<std::size_t>(g.num_nodes()), RVector::Zero(M));
      auto opts = admm::AdmmOptions::from(cfg.solver);
      opts.max_iter = spec.iterations;
      opts.stop_on_convergence = false;
      opts.workers = 1;
      double best = std::numeric_limits<double>::infinity();
      for (int rep = 0; rep < spec.repeats; ++rep) {
        admm::AdmmSolver solver(g, cfg.kappa, cfg.qos_target, cfg.noise_power, cfg.power_budget, opts);
        const auto t0 = std::chrono::steady_clock::now();
        const auto sol = solver.solve(vt);
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        best = std::min(best, dt / std::max(1, sol.iterations));
      }
      BenchRow row{M, cfg.num_antennas, J, best, best / (J + 1), std::nullopt};
      const int vars = g.num_nodes() * (2 * cfg.num_antennas * M + M);
      if (spec.oracle && vars <= spec.oracle_max_variables) {
        const auto r = oracle::reference_oracle(g, vt, cfg.kappa, cfg.qos_target, cfg.noise_power, cfg.power_budget);
        row.oracle_s = r.seconds;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

/// Normalized columns divide by the largest value of the same column.
inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  double ms = 0, mp = 0, mo = 0;
  for (const auto& r : rows) {
    ms = std::max(ms, r.serial_s);
    mp = std::max(mp, r.parallel_s);
    if (r.oracle_s) mo = std::max(mo, *r.oracle_s);
  }
  std::string out = csv::header_comment("bench");
  out += "M,N,J,serial_s_per_iter,parallel_s_per_iter,oracle_s_per_solve,serial_norm,parallel_norm,oracle_norm\n";
  for (const auto& r : rows)
    out += csv::join({std::to_string(r.M), std::to_string(r.N), std::to_string(r.J), csv::num(r.serial_s),
                      csv::num(r.parallel_s), r.oracle_s ? csv::num(*r.oracle_s) : "", csv::num(r.serial_s / ms),
                      csv::num(r.parallel_s / mp), r.oracle_s ? csv::num(*r.oracle_s / mo) : ""}) +
           '\n';
  return out;
}

}  // namespace ltac
