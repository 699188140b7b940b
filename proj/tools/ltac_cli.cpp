// SPDX-License-Identifier: Apache-2.0
//
// ltac: run single trials, sweeps, the status-grid demo, timing benchmarks
// and the oracle self-check.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ltac/config.hpp"
#include "ltac/experiments.hpp"
#include "ltac/oracle_check.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Flags {
  std::string config;
  std::uint64_t seed = 1;
  bool seed_set = false;
  std::string out = ".";
  int workers = 1;
  bool trace = false;
};

ltac::RunConfig load(const Flags& f) {
  ltac::RunConfig rc = f.config.empty() ? ltac::RunConfig{} : ltac::load_config(f.config);
  if (f.config.empty())
    rc.simulate_algorithms = {{ltac::AlgorithmKind::no_control},
                              {ltac::AlgorithmKind::offline},
                              {ltac::AlgorithmKind::online, 9},
                              {ltac::AlgorithmKind::channel_strength}};
  rc.problem.solver.workers = 1;  // parallelism is across trials
  return rc;
}

void write(const Flags& f, const std::string& name, const std::string& content) {
  std::filesystem::create_directories(f.out);
  ltac::csv::write_file((std::filesystem::path(f.out) / name).string(), content);
}

bool finite(const ltac::RunMetrics& m) { return std::isfinite(m.cost.total) && std::isfinite(m.admission_ratio); }

int cmd_simulate(const Flags& f) {
  const auto rc = load(f);
  const auto ch = ltac::trial_channels(rc.scenario, rc.problem, f.seed);
  write(f, "channels.csv", ltac::channels_to_csv(ch));
  std::vector<std::string> labels;
  std::vector<ltac::RunMetrics> metrics;
  std::optional<std::vector<int>> K;
  // online J = 9 first so channel strength can reuse its counts
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < rc.simulate_algorithms.size(); ++i)
    if (rc.simulate_algorithms[i].kind != ltac::AlgorithmKind::channel_strength) order.push_back(i);
  for (std::size_t i = 0; i < rc.simulate_algorithms.size(); ++i)
    if (rc.simulate_algorithms[i].kind == ltac::AlgorithmKind::channel_strength) order.push_back(i);
  std::vector<ltac::TrialResult> results(rc.simulate_algorithms.size());
  for (auto i : order) {
    const auto& alg = rc.simulate_algorithms[i];
    results[i] = ltac::run_algorithm(alg, ch, rc.problem, f.seed, alg.kind == ltac::AlgorithmKind::channel_strength
                                                                     ? K
                                                                     : std::nullopt);
    if (alg.kind == ltac::AlgorithmKind::online && alg.samples == 9) K = ltac::admitted_counts(results[i].plan);
  }
  bool ok = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto label = rc.simulate_algorithms[i].label();
    const auto& r = results[i];
    labels.push_back(label);
    metrics.push_back(r.metrics);
    ok = ok && finite(r.metrics);
    write(f, "plan_" + label + ".csv", ltac::plan_csv(r.plan, ch.H, rc.problem));
    write(f, "grid_" + label + ".csv", ltac::emit_status_grid(r.plan));
    if (f.trace && !r.sum_trace.empty()) write(f, "trace_" + label + ".csv", ltac::sum_trace_csv(r.sum_trace));
    std::cout << label << ": admission_ratio " << r.metrics.admission_ratio << " switching_frequency "
              << r.metrics.switching_frequency << " total_cost " << r.metrics.cost.total << "\n";
  }
  write(f, "metrics.csv", ltac::metrics_csv(labels, metrics));
  return ok ? 0 : kExitNumerical;
}

int cmd_sweep(const Flags& f) {
  if (f.config.empty()) throw ltac::ConfigError("sweep needs --config with a [sweep] section");
  const auto rc = load(f);
  if (!rc.sweep) throw ltac::ConfigError("missing config key 'sweep.parameter'");
  auto spec = *rc.sweep;
  spec.config.solver.workers = 1;
  if (f.seed_set) spec.master_seed = f.seed;
  spec.workers = f.workers;
  const auto res = ltac::run_sweep(spec);
  write(f, "sweep_trials.csv", ltac::sweep_rows_csv(spec, res));
  write(f, "sweep_summary.csv", ltac::sweep_summary_csv(spec, res));
  std::cout << res.rows.size() << " rows, " << res.failures << " failed\n";
  return res.failures == 0 ? 0 : kExitNumerical;
}

// Status grids of one trial at the demo profile (M = 10, N = 5, T = 20)
// unless a config is given.
int cmd_grid(const Flags& f) {
  auto rc = load(f);
  if (f.config.empty()) {
    rc.problem.num_users = 10;
    rc.problem.num_antennas = 5;
    rc.problem.num_slices = 20;
  }
  const std::vector<ltac::Algorithm> algs{
      {ltac::AlgorithmKind::offline}, {ltac::AlgorithmKind::online, rc.online_samples}, {ltac::AlgorithmKind::no_control}};
  const auto res = ltac::run_trial_set(algs, f.seed, rc.problem, rc.scenario);
  std::vector<std::string> labels;
  std::vector<ltac::RunMetrics> metrics;
  for (std::size_t i = 0; i < algs.size(); ++i) {
    labels.push_back(algs[i].label());
    metrics.push_back(res[i].metrics);
    write(f, "grid_" + labels.back() + ".csv", ltac::emit_status_grid(res[i].plan));
    std::cout << labels.back() << ": switches " << res[i].metrics.switches << "\n";
  }
  write(f, "grid_metrics.csv", ltac::metrics_csv(labels, metrics));
  return 0;
}

int cmd_bench(const Flags& f) {
  auto rc = load(f);
  if (f.seed_set) rc.bench.seed = f.seed;
  const auto rows = ltac::bench_timing(rc.bench, rc.problem, rc.scenario);
  write(f, "bench.csv", ltac::bench_csv(rows));
  for (const auto& r : rows)
    std::cout << "M " << r.M << " J " << r.J << ": " << r.serial_s * 1e6 << " us/iter serial, " << r.parallel_s * 1e6
              << " us/iter per node group\n";
  return 0;
}

int cmd_oracle_check(const Flags& f) {
  const auto rc = load(f);
  int failures = 0;
  double worst = 0.0;
  for (auto topo : {ltac::Topology::star, ltac::Topology::chain}) {
    for (int i = 0; i < rc.oracle_instances; ++i) {
      const auto inst = ltac::random_oracle_instance(topo, ltac::rng::derive_seed(f.seed, static_cast<std::uint64_t>(topo), i));
      const auto c = ltac::compare_with_oracle(inst, rc.oracle_max_iter);
      worst = std::max(worst, c.relative_error);
      if (!(c.relative_error <= 1e-3)) ++failures;
      if (f.trace)
        std::cerr << (topo == ltac::Topology::star ? "star" : "chain") << " " << i << ": admm " << c.admm_objective
                  << " oracle " << c.oracle_objective << " rel " << c.relative_error << " iters " << c.admm_iterations
                  << "\n";
    }
  }
  std::cout << "oracle-check: " << 2 * rc.oracle_instances << " instances, " << failures
            << " above 1e-3, worst relative error " << worst << "\n";
  return failures == 0 ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-term admission control and beamforming simulator"};
  app.require_subcommand(1);
  Flags f;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "INI configuration file");
    sub->add_option("--seed", f.seed, "trial or master seed")->each([&](const std::string&) { f.seed_set = true; });
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--trace", f.trace, "write SUM traces / per-instance diagnostics");
  };
  struct Cmd {
    const char* name;
    const char* help;
    int (*run)(const Flags&);
  };
  const Cmd cmds[] = {{"simulate", "one trial of every configured algorithm", cmd_simulate},
                      {"sweep", "Monte Carlo sweep from the [sweep] section", cmd_sweep},
                      {"grid", "admission status grids of one demo trial", cmd_grid},
                      {"bench", "ADMM per-iteration timing", cmd_bench},
                      {"oracle-check", "ADMM against the interior-point reference on small instances", cmd_oracle_check}};
  std::vector<std::pair<CLI::App*, const Cmd*>> subs;
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    subs.emplace_back(sub, &c);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  try {
    for (const auto& [sub, cmd] : subs)
      if (sub->parsed()) return cmd->run(f);
  } catch (const ltac::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ltac::InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ltac::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
