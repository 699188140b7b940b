// SPDX-License-Identifier: Apache-2.0
//
// INI run configuration. Sections: [problem] (required keys), [solver],
// [scenario], [online], [simulate], [sweep], [bench], [oracle]. The key
// reference is in README.md.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ltac/channel.hpp"
#include "ltac/experiments.hpp"
#include "ltac/model.hpp"

namespace ltac {

struct RunConfig {
  ProblemConfig problem;
  Scenario scenario;
  int online_samples = 9;
  std::vector<Algorithm> simulate_algorithms;
  std::optional<SweepSpec> sweep;
  BenchSpec bench;
  int oracle_instances = 5;  // per topology
  int oracle_max_iter = 50000;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

inline double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double x = std::stod(text, &used);
    if (trim(text.substr(used)).empty()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': not a number: '" + text + "'");
}

inline std::uint64_t parse_seed(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const auto x = std::stoull(text, &used);
    if (used == text.size() && text.front() != '-') return x;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected an unsigned 64-bit integer, got '" + text + "'");
}

/// Linear value, or decibels with a "dB" suffix ("3dB" -> 10^0.3).
inline double parse_linear_or_db(const std::string& key, std::string text) {
  text = trim(text);
  if (text.size() > 2 && (text.ends_with("dB") || text.ends_with("db")))
    return std::pow(10.0, parse_double(key, text.substr(0, text.size() - 2)) / 10.0);
  return parse_double(key, text);
}

class IniReader {
 public:
  explicit IniReader(boost::property_tree::ptree tree) : tree_(std::move(tree)) {}

  std::optional<std::string> find(const std::string& key) const {
    if (auto v = tree_.get_optional<std::string>(key)) return trim(*v);
    return std::nullopt;
  }
  std::string required(const std::string& key) const {
    if (auto v = find(key)) return *v;
    throw ConfigError("missing config key '" + key + "'");
  }
  bool has_section(const std::string& name) const { return tree_.find(name) != tree_.not_found(); }

  double number(const std::string& key, double fallback) const {
    auto v = find(key);
    return v ? parse_double(key, *v) : fallback;
  }
  double required_number(const std::string& key) const { return parse_double(key, required(key)); }
  int integer(const std::string& key, int fallback) const {
    const double x = number(key, fallback);
    return as_int(key, x);
  }
  int required_integer(const std::string& key) const { return as_int(key, required_number(key)); }
  bool boolean(const std::string& key, bool fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + *v + "'");
  }

 private:
  static int as_int(const std::string& key, double x) {
    if (x != std::floor(x) || std::abs(x) > 1e9) throw ConfigError("config key '" + key + "': expected an integer");
    return static_cast<int>(x);
  }
  boost::property_tree::ptree tree_;
};

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  const detail::IniReader ini(std::move(tree));
  RunConfig rc;
  auto& p = rc.problem;
  p.num_users = ini.required_integer("problem.users");
  p.num_antennas = ini.required_integer("problem.antennas");
  p.num_slices = ini.required_integer("problem.slices");
  p.power_budget = ini.required_number("problem.power_budget");
  p.noise_power = ini.required_number("problem.noise_power");
  p.qos_target = detail::parse_linear_or_db("problem.gamma", ini.required("problem.gamma"));
  p.reject_weight = ini.required_number("problem.lambda1");
  p.switch_weight = ini.required_number("problem.lambda2");
  p.kappa = ini.number("problem.kappa", p.kappa);
  p.count_initial_switch = ini.boolean("problem.count_initial_switch", p.count_initial_switch);

  auto& s = p.solver;
  s.rho = ini.number("solver.rho", s.rho);
  s.relaxation = ini.number("solver.relaxation", s.relaxation);
  s.residual_balancing = ini.boolean("solver.residual_balancing", s.residual_balancing);
  s.admm_tol = ini.number("solver.admm_tol", s.admm_tol);
  s.admm_max_iter = ini.integer("solver.admm_max_iter", s.admm_max_iter);
  s.sum_inner_max_iter = ini.integer("solver.sum_inner_max_iter", s.sum_inner_max_iter);
  s.bisect_tol = ini.number("solver.bisect_tol", s.bisect_tol);
  s.bisect_max_iter = ini.integer("solver.bisect_max_iter", s.bisect_max_iter);
  s.sum_tol = ini.number("solver.sum_tol", s.sum_tol);
  s.sum_max_iter = ini.integer("solver.sum_max_iter", s.sum_max_iter);
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }

  auto& sc = rc.scenario;
  sc.corner_distance = ini.number("scenario.corner_distance", sc.corner_distance);
  sc.reference_distance = ini.number("scenario.reference_distance", sc.reference_distance);
  sc.pathloss_exponent = ini.number("scenario.pathloss_exponent", sc.pathloss_exponent);
  sc.shadow_std_db = ini.number("scenario.shadow_std_db", sc.shadow_std_db);
  sc.min_user_distance = ini.number("scenario.min_user_distance", sc.min_user_distance);
  if (!(sc.corner_distance > 0 && sc.reference_distance > 0 && sc.shadow_std_db >= 0 && sc.min_user_distance >= 0))
    throw ConfigError("config: scenario distances must be positive");

  rc.online_samples = ini.integer("online.samples", rc.online_samples);
  if (rc.online_samples < 1) throw ConfigError("config key 'online.samples' must be >= 1");

  const auto sim = ini.find("simulate.algorithms").value_or("no_control,offline,online_J" +
                                                             std::to_string(rc.online_samples) + ",channel_strength");
  for (const auto& a : detail::split_list(sim)) rc.simulate_algorithms.push_back(parse_algorithm(a));

  if (ini.has_section("sweep")) {
    SweepSpec sw;
    sw.parameter = ini.required("sweep.parameter");
    sw.values.clear();
    for (const auto& v : detail::split_list(ini.required("sweep.values")))
      sw.values.push_back(sw.parameter == "gamma" ? detail::parse_linear_or_db("sweep.values", v)
                                                  : detail::parse_double("sweep.values", v));
    sw.trials = ini.required_integer("sweep.trials");
    if (auto seed = ini.find("sweep.seed")) sw.master_seed = detail::parse_seed("sweep.seed", *seed);
    sw.algorithms.clear();
    for (const auto& a : detail::split_list(ini.required("sweep.algorithms"))) sw.algorithms.push_back(parse_algorithm(a));
    sw.config = p;
    sw.scenario = sc;
    sw.validate();
    rc.sweep = sw;
  }

  auto& b = rc.bench;
  if (auto u = ini.find("bench.users")) {
    b.users.clear();
    for (const auto& x : detail::split_list(*u)) b.users.push_back(static_cast<int>(detail::parse_double("bench.users", x)));
  }
  if (auto j = ini.find("bench.samples")) {
    b.samples.clear();
    for (const auto& x : detail::split_list(*j)) b.samples.push_back(static_cast<int>(detail::parse_double("bench.samples", x)));
  }
  b.iterations = ini.integer("bench.iterations", b.iterations);
  b.repeats = ini.integer("bench.repeats", b.repeats);
  b.oracle = ini.boolean("bench.oracle", b.oracle);
  if (b.users.empty() || b.samples.empty() || b.iterations < 1 || b.repeats < 1)
    throw ConfigError("config: bench lists must be nonempty and counts >= 1");
  rc.oracle_instances = ini.integer("oracle.instances", rc.oracle_instances);
  rc.oracle_max_iter = ini.integer("oracle.max_iter", rc.oracle_max_iter);
  if (rc.oracle_instances < 1 || rc.oracle_max_iter < 1) throw ConfigError("config: oracle counts must be >= 1");
  return rc;
}

inline RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = csv::read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

}  // namespace ltac
