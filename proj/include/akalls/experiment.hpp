#pragma once

// Seeded experiment runner and report emission (CSV, JSON, SVG).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "engine.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "problem.hpp"
#include "registry.hpp"
#include "rng.hpp"

namespace akalls {

struct BaselineConfig {
  bool enabled = true;
  /// "auto" (n^{2a/(2a+d)} when alpha is declared, else sqrt n), "sqrt", or a positive integer.
  std::string k_rule = "auto";
};

struct EvalConfig {
  RiskMethod method = RiskMethod::quadrature;
  std::size_t m = 1000000;
  double tol = 1e-10;
};

struct ExperimentConfig {
  std::string problem = "example1d:alpha=0.6";
  std::vector<std::size_t> budgets = {250, 500, 1000, 2000, 4000};
  /// 0 selects the default rule (see `pool_size_for`).
  std::size_t pool_size = 0;
  /// Optional CSV pool shared by every trial; overrides pool_size.
  std::string pool_csv;
  std::size_t trials = 20;
  std::uint64_t base_seed = 1;
  EngineParams engine;
  BaselineConfig baseline;
  EvalConfig eval;
  std::size_t threads = 1;

  void validate() const;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Shortest decimal that round-trips.
inline std::string fmt_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Config as flat JSON.

inline nlohmann::ordered_json to_flat_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["problem"] = c.problem;
  j["budgets"] = c.budgets;
  j["pool_size"] = c.pool_size;
  j["pool_csv"] = c.pool_csv;
  j["trials"] = c.trials;
  j["base_seed"] = c.base_seed;
  j["engine.L"] = c.engine.L;
  j["engine.C"] = c.engine.C;
  j["engine.delta"] = c.engine.delta;
  j["engine.epsilon"] = c.engine.epsilon;
  j["engine.c_scale"] = c.engine.stats.c_scale;
  j["engine.c_theory"] = c.engine.stats.c_theory;
  j["baseline.enabled"] = c.baseline.enabled;
  j["baseline.k"] = c.baseline.k_rule;
  j["eval.method"] = c.eval.method == RiskMethod::monte_carlo ? "mc" : "quadrature";
  j["eval.m"] = c.eval.m;
  j["eval.tol"] = c.eval.tol;
  j["threads"] = c.threads;
  return j;
}

/// Hash of every field that affects results (thread count excluded).
inline std::string config_hash(const ExperimentConfig& c) {
  auto j = to_flat_json(c);
  j.erase("threads");
  return detail::hex64(detail::fnv1a(j.dump()));
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  auto number = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    return v.get<double>();
  };
  auto count = [&](const nlohmann::json& v, const std::string& key) {
    const double d = number(v, key);
    if (d < 0 || d != std::floor(d)) throw ConfigError("config key '" + key + "' must be a nonnegative integer");
    return static_cast<std::size_t>(d);
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "problem") {
      if (!v.is_string()) throw ConfigError("config key 'problem' must be a string");
      c.problem = v.get<std::string>();
    } else if (key == "budgets") {
      if (!v.is_array()) throw ConfigError("config key 'budgets' must be an array");
      c.budgets.clear();
      for (const auto& b : v) c.budgets.push_back(count(b, key));
    } else if (key == "pool_size") {
      c.pool_size = count(v, key);
    } else if (key == "pool_csv") {
      if (!v.is_string()) throw ConfigError("config key 'pool_csv' must be a string");
      c.pool_csv = v.get<std::string>();
    } else if (key == "trials") {
      c.trials = count(v, key);
    } else if (key == "base_seed") {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ConfigError("config key 'base_seed' must be a nonnegative integer");
      }
      c.base_seed = v.get<std::uint64_t>();
    } else if (key == "engine.L") {
      c.engine.L = number(v, key);
    } else if (key == "engine.C") {
      c.engine.C = number(v, key);
    } else if (key == "engine.delta") {
      c.engine.delta = number(v, key);
    } else if (key == "engine.epsilon") {
      c.engine.epsilon = number(v, key);
    } else if (key == "engine.c_scale") {
      c.engine.stats.c_scale = number(v, key);
    } else if (key == "engine.c_theory") {
      c.engine.stats.c_theory = number(v, key);
    } else if (key == "baseline.enabled") {
      if (!v.is_boolean()) throw ConfigError("config key 'baseline.enabled' must be a boolean");
      c.baseline.enabled = v.get<bool>();
    } else if (key == "baseline.k") {
      if (v.is_string()) {
        c.baseline.k_rule = v.get<std::string>();
      } else {
        c.baseline.k_rule = std::to_string(count(v, key));
      }
    } else if (key == "eval.method") {
      const auto m = v.is_string() ? v.get<std::string>() : std::string();
      if (m == "mc" || m == "monte-carlo") {
        c.eval.method = RiskMethod::monte_carlo;
      } else if (m == "quadrature") {
        c.eval.method = RiskMethod::quadrature;
      } else {
        throw ConfigError("config key 'eval.method' must be \"mc\" or \"quadrature\"");
      }
    } else if (key == "eval.m") {
      c.eval.m = count(v, key);
    } else if (key == "eval.tol") {
      c.eval.tol = number(v, key);
    } else if (key == "threads") {
      c.threads = count(v, key);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

inline ExperimentConfig parse_config(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline void ExperimentConfig::validate() const {
  if (budgets.empty()) throw ConfigError("budgets must not be empty");
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    if (budgets[i] < 1) throw ConfigError("budgets must be >= 1");
    if (i > 0 && budgets[i] <= budgets[i - 1]) throw ConfigError("budgets must be strictly increasing");
  }
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (eval.m < 1) throw ConfigError("eval.m must be >= 1");
  if (!(eval.tol > 0.0)) throw ConfigError("eval.tol must be positive");
  if (baseline.k_rule != "auto" && baseline.k_rule != "sqrt") {
    try {
      std::size_t used = 0;
      const long long k = std::stoll(baseline.k_rule, &used);
      if (used != baseline.k_rule.size() || k < 1) throw std::invalid_argument("k");
    } catch (const std::exception&) {
      throw ConfigError("baseline.k must be \"auto\", \"sqrt\" or a positive integer");
    }
  }
  try {
    engine.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  const auto spec = make_problem(problem);
  if (eval.method == RiskMethod::quadrature && spec.dim != 1) {
    throw ConfigError("eval.method quadrature requires a one-dimensional problem");
  }
}

/// w = ceil(n^{(2a+d)/(2a+d-ab)}) when (alpha, beta) are declared, else 10 max(budgets).
inline std::size_t pool_size_for(const ExperimentConfig& c, const ProblemSpec& spec, std::size_t budget) {
  if (c.pool_size > 0) return c.pool_size;
  if (spec.declared_smoothness && spec.declared_noise) {
    const double a = spec.declared_smoothness->alpha, b = spec.declared_noise->beta;
    const auto d = static_cast<double>(spec.dim);
    const double denom = 2 * a + d - a * b;
    if (denom > 0) {
      const double w = std::ceil(std::pow(static_cast<double>(budget), (2 * a + d) / denom) - 1e-9);
      return std::max<std::size_t>(budget, static_cast<std::size_t>(w));
    }
  }
  return 10 * c.budgets.back();
}

// ---------------------------------------------------------------------------
// Records.

struct RunRecord {
  std::string config_hash;
  std::size_t budget = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string algo;  // "akalls" or "passive_knn"
  std::size_t pool_size = 0;
  std::size_t charged_requests = 0;
  std::size_t distinct_reveals = 0;
  std::size_t s_size = 0;
  std::size_t s_nois_size = 0;
  std::vector<std::size_t> level_sizes;
  std::uint64_t max_request_cap = 0;
  bool fallback = false;  // empty informative set, constant classifier used
  double excess_risk = std::numeric_limits<double>::quiet_NaN();
  double std_error = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
  bool failed = false;
  std::string error;
};

inline std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t budget, std::size_t trial) {
  return base_seed ^ hash_combine({budget, trial});
}

/// Constant classifier used when the informative set is empty: majority of
/// the labels inferred for noisy points (ties to 1), or 0 with none.
inline int fallback_label(const ActiveState& state) {
  if (state.noisy.empty()) return 0;
  std::size_t ones = 0;
  for (const auto& p : state.noisy) ones += static_cast<std::size_t>(p.label);
  return 2 * ones >= state.noisy.size() ? 1 : 0;
}

namespace detail {

inline RiskEstimate evaluate(const ProblemSpec& spec, const Classifier& f, const EvalConfig& eval, std::uint64_t seed,
                             std::vector<double> breakpoints = {}) {
  if (eval.method == RiskMethod::quadrature) return excess_risk_quadrature_1d(spec, f, eval.tol, std::move(breakpoints));
  return excess_risk_mc(spec, f, eval.m, seed);
}

// Voronoi boundaries of a 1-D support.
inline std::vector<double> support_midpoints(const Pool& pool, const std::vector<LabeledPoint>& support) {
  std::vector<double> xs;
  if (pool.dim() != 1) return xs;
  for (const auto& p : support) xs.push_back(pool[p.index][0]);
  std::sort(xs.begin(), xs.end());
  std::vector<double> mids;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) mids.push_back(0.5 * (xs[i] + xs[i + 1]));
  return mids;
}

inline std::size_t baseline_k(const ExperimentConfig& c, const ProblemSpec& spec, std::size_t n) {
  if (c.baseline.k_rule == "sqrt") return default_knn_k(n, spec.dim, std::nullopt);
  if (c.baseline.k_rule == "auto") {
    std::optional<double> alpha;
    if (spec.declared_smoothness) alpha = spec.declared_smoothness->alpha;
    return default_knn_k(n, spec.dim, alpha);
  }
  return std::min<std::size_t>(n, static_cast<std::size_t>(std::stoull(c.baseline.k_rule)));
}

}  // namespace detail

/// Runs one (budget, trial) cell: AKALLS, then the passive baseline when
/// enabled. Module errors are caught and recorded per algorithm.
inline std::vector<RunRecord> run_trial(const ExperimentConfig& c, const ProblemSpec& spec, const std::string& hash,
                                        std::size_t budget, std::size_t trial,
                                        const std::shared_ptr<const Pool>& shared_pool = nullptr) {
  using Clock = std::chrono::steady_clock;
  std::vector<RunRecord> out;
  const std::uint64_t seed = trial_seed(c.base_seed, budget, trial);
  const std::uint64_t label_seed = hash_combine({seed, kLabelStream});
  const std::uint64_t eval_seed = hash_combine({seed, kEvalStream});

  RunRecord base;
  base.config_hash = hash;
  base.budget = budget;
  base.trial = trial;
  base.seed = seed;

  std::shared_ptr<const Pool> pool = shared_pool;
  std::shared_ptr<const NeighborIndex> index;
  std::string setup_error;
  try {
    if (!pool) pool = std::make_shared<const Pool>(draw_pool(spec, pool_size_for(c, spec, budget), seed));
    index = std::make_shared<const NeighborIndex>(*pool);
  } catch (const std::exception& e) {
    setup_error = e.what();
  }

  {
    RunRecord r = base;
    r.algo = "akalls";
    const auto start = Clock::now();
    try {
      if (!setup_error.empty()) throw Error(setup_error);
      r.pool_size = pool->size();
      Oracle oracle(spec, *pool, label_seed);
      auto run = run_akalls(spec, *pool, oracle, budget, c.engine, index.get());
      r.charged_requests = run.metrics.charged_requests;
      r.distinct_reveals = run.metrics.distinct_reveals;
      r.s_size = run.state.informative.size();
      r.s_nois_size = run.state.noisy.size();
      r.level_sizes = run.state.level_sizes;
      r.max_request_cap = run.metrics.max_request_cap;
      RiskEstimate risk;
      if (run.classifier.empty()) {
        r.fallback = true;
        const int label = fallback_label(run.state);
        risk = detail::evaluate(spec, [label](PointView) { return label; }, c.eval, eval_seed);
      } else {
        const auto& f = run.classifier;
        risk = detail::evaluate(spec, [&f](PointView x) { return f.predict(x); }, c.eval, eval_seed,
                                detail::support_midpoints(*pool, run.state.informative));
      }
      r.excess_risk = risk.excess_risk;
      r.std_error = risk.std_error;
    } catch (const std::exception& e) {
      r.failed = true;
      r.error = e.what();
    }
    r.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    out.push_back(std::move(r));
  }

  if (c.baseline.enabled) {
    RunRecord r = base;
    r.algo = "passive_knn";
    const auto start = Clock::now();
    try {
      if (!setup_error.empty()) throw Error(setup_error);
      r.pool_size = pool->size();
      Oracle oracle(spec, *pool, label_seed);
      PassiveKnn knn(*pool, oracle, budget, detail::baseline_k(c, spec, budget), seed);
      r.charged_requests = budget;
      r.distinct_reveals = oracle.distinct_reveals();
      r.s_size = knn.labeled();
      const auto risk = detail::evaluate(spec, [&knn](PointView x) { return knn.predict(x); }, c.eval, eval_seed);
      r.excess_risk = risk.excess_risk;
      r.std_error = risk.std_error;
    } catch (const std::exception& e) {
      r.failed = true;
      r.error = e.what();
    }
    r.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    out.push_back(std::move(r));
  }
  return out;
}

/// Every (budget, trial) cell, possibly on several threads. Records come
/// back sorted by (budget, trial, algo) whatever the execution order.
inline std::vector<RunRecord> run_experiment(const ExperimentConfig& c) {
  c.validate();
  const ProblemSpec spec = make_problem(c.problem);
  const std::string hash = config_hash(c);
  std::shared_ptr<const Pool> shared_pool;
  if (!c.pool_csv.empty()) {
    shared_pool = std::make_shared<const Pool>(load_pool_csv(c.pool_csv, c.base_seed));
    if (shared_pool->dim() != spec.dim) throw ConfigError("pool_csv dimension differs from the problem's");
  }

  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (auto b : c.budgets) {
    for (std::size_t t = 0; t < c.trials; ++t) cells.emplace_back(b, t);
  }
  std::vector<std::vector<RunRecord>> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      results[i] = run_trial(c, spec, hash, cells[i].first, cells[i].second, shared_pool);
    }
  };
  const std::size_t n_threads = std::min(c.threads, cells.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  std::vector<RunRecord> records;
  for (auto& r : results) {
    for (auto& rec : r) records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Summaries.

struct BudgetSummary {
  std::size_t budget = 0;
  std::size_t trials = 0;
  std::size_t failed = 0;
  double median_excess_risk = std::numeric_limits<double>::quiet_NaN();
};

/// Median excess risk per budget for one algorithm, over non-failed trials.
inline std::vector<BudgetSummary> summarize(const std::vector<RunRecord>& records, const std::string& algo) {
  std::map<std::size_t, std::vector<double>> by_budget;
  std::map<std::size_t, BudgetSummary> out;
  for (const auto& r : records) {
    if (r.algo != algo) continue;
    auto& s = out[r.budget];
    s.budget = r.budget;
    ++s.trials;
    if (r.failed || std::isnan(r.excess_risk)) {
      ++s.failed;
    } else {
      by_budget[r.budget].push_back(r.excess_risk);
    }
  }
  std::vector<BudgetSummary> v;
  for (auto& [b, s] : out) {
    if (by_budget.count(b)) s.median_excess_risk = median(by_budget[b]);
    v.push_back(s);
  }
  return v;
}

/// Rate fit through the per-budget medians with positive values.
inline std::optional<RateFit> fit_medians(const std::vector<BudgetSummary>& summary) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& s : summary) {
    if (s.median_excess_risk > 0.0) pts.emplace_back(static_cast<double>(s.budget), s.median_excess_risk);
  }
  if (pts.size() < 2) return std::nullopt;
  try {
    return fit_rate(pts);
  } catch (const InvalidArgument&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// CSV.

inline constexpr const char* kCsvHeader =
    "config_hash,budget,trial,seed,algo,charged_requests,distinct_reveals,s_size,s_nois_size,excess_risk,std_error,"
    "wall_ms";

inline void write_csv(std::ostream& out, const std::vector<RunRecord>& records, bool include_wall_time = true) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.config_hash << ',' << r.budget << ',' << r.trial << ',' << r.seed << ',' << r.algo << ','
        << r.charged_requests << ',' << r.distinct_reveals << ',' << r.s_size << ',' << r.s_nois_size << ','
        << detail::fmt_real(r.excess_risk) << ',' << detail::fmt_real(r.std_error) << ','
        << (include_wall_time ? detail::fmt_real(r.wall_ms) : std::string("0")) << '\n';
  }
}

inline std::vector<RunRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("records csv is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw ConfigError("records csv has an unexpected header");
  std::vector<RunRecord> records;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 12) throw ConfigError("records csv line " + std::to_string(lineno) + ": expected 12 columns");
    try {
      RunRecord r;
      r.config_hash = cells[0];
      r.budget = std::stoull(cells[1]);
      r.trial = std::stoull(cells[2]);
      r.seed = std::stoull(cells[3]);
      r.algo = cells[4];
      r.charged_requests = std::stoull(cells[5]);
      r.distinct_reveals = std::stoull(cells[6]);
      r.s_size = std::stoull(cells[7]);
      r.s_nois_size = std::stoull(cells[8]);
      r.excess_risk = std::stod(cells[9]);
      r.std_error = std::stod(cells[10]);
      r.wall_ms = std::stod(cells[11]);
      r.failed = std::isnan(r.excess_risk);
      records.push_back(std::move(r));
    } catch (const std::exception&) {
      throw ConfigError("records csv line " + std::to_string(lineno) + ": malformed value");
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// JSON.

inline nlohmann::ordered_json to_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  auto real = [](double v) -> nlohmann::ordered_json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  j["config_hash"] = r.config_hash;
  j["budget"] = r.budget;
  j["trial"] = r.trial;
  j["seed"] = r.seed;
  j["algo"] = r.algo;
  j["pool_size"] = r.pool_size;
  j["charged_requests"] = r.charged_requests;
  j["distinct_reveals"] = r.distinct_reveals;
  j["s_size"] = r.s_size;
  j["s_nois_size"] = r.s_nois_size;
  j["level_sizes"] = r.level_sizes;
  j["max_request_cap"] = r.max_request_cap;
  j["fallback"] = r.fallback;
  j["excess_risk"] = real(r.excess_risk);
  j["std_error"] = real(r.std_error);
  j["wall_ms"] = r.wall_ms;
  j["failed"] = r.failed;
  if (r.failed) j["error"] = r.error;
  return j;
}

inline RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  auto real = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  r.config_hash = j.at("config_hash").get<std::string>();
  r.budget = j.at("budget").get<std::size_t>();
  r.trial = j.at("trial").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.algo = j.at("algo").get<std::string>();
  r.pool_size = j.value("pool_size", std::size_t{0});
  r.charged_requests = j.at("charged_requests").get<std::size_t>();
  r.distinct_reveals = j.at("distinct_reveals").get<std::size_t>();
  r.s_size = j.at("s_size").get<std::size_t>();
  r.s_nois_size = j.at("s_nois_size").get<std::size_t>();
  r.level_sizes = j.value("level_sizes", std::vector<std::size_t>{});
  r.max_request_cap = j.value("max_request_cap", std::uint64_t{0});
  r.fallback = j.value("fallback", false);
  r.excess_risk = real(j.at("excess_risk"));
  r.std_error = real(j.at("std_error"));
  r.wall_ms = j.value("wall_ms", 0.0);
  r.failed = j.value("failed", false);
  r.error = j.value("error", std::string());
  return r;
}

inline void write_json(std::ostream& out, const std::vector<RunRecord>& records,
                       const std::optional<ExperimentConfig>& config = std::nullopt) {
  nlohmann::ordered_json j;
  if (config) j["config"] = to_flat_json(*config);
  j["records"] = nlohmann::ordered_json::array();
  for (const auto& r : records) j["records"].push_back(to_json(r));
  out << j.dump(2) << '\n';
}

inline std::vector<RunRecord> read_json(std::istream& in) {
  try {
    const auto j = nlohmann::json::parse(in);
    const auto& arr = j.is_array() ? j : j.at("records");
    std::vector<RunRecord> records;
    for (const auto& item : arr) records.push_back(record_from_json(item));
    return records;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("records json: ") + e.what());
  }
}

/// Reads records from a .json or .csv file (by extension).
inline std::vector<RunRecord> read_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open records file: " + path);
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") return read_json(in);
  return read_csv(in);
}

// ---------------------------------------------------------------------------
// SVG.

/// Log-log plot of median excess risk against budget, one polyline per
/// algorithm, plus reference lines: the fitted AKALLS slope, and the
/// theoretical slope through the first AKALLS median when given.
inline void write_svg(std::ostream& out, const std::vector<RunRecord>& records,
                      std::optional<double> theory_slope = std::nullopt) {
  constexpr double W = 640, H = 440, ml = 70, mr = 150, mt = 30, mb = 55;
  std::set<std::string> algos;
  for (const auto& r : records) algos.insert(r.algo);

  std::map<std::string, std::vector<BudgetSummary>> series;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& a : algos) {
    series[a] = summarize(records, a);
    for (const auto& s : series[a]) {
      xmin = std::min(xmin, std::log10(static_cast<double>(s.budget)));
      xmax = std::max(xmax, std::log10(static_cast<double>(s.budget)));
      if (s.median_excess_risk > 0) {
        ymin = std::min(ymin, std::log10(s.median_excess_risk));
        ymax = std::max(ymax, std::log10(s.median_excess_risk));
      }
    }
  }
  if (!(xmax > xmin)) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (!std::isfinite(ymin)) {
    ymin = -3;
    ymax = 0;
  }
  ymin = std::floor(ymin - 0.05);
  ymax = std::ceil(ymax + 0.05);
  if (!(ymax > ymin)) ymax = ymin + 1;
  auto px = [&](double lx) { return ml + (lx - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto py = [&](double ly) { return mt + (ymax - ly) / (ymax - ymin) * (H - mt - mb); };
  auto f = [](double v) { return detail::fmt_real(std::round(v * 100) / 100); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line class=\"axis\" x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
  out << "<line class=\"axis\" x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << (W - mr + ml) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">log10 budget n</text>\n";
  out << "<text x=\"16\" y=\"" << (H - mb + mt) / 2 << "\" transform=\"rotate(-90 16 " << (H - mb + mt) / 2
      << ")\" text-anchor=\"middle\">log10 median excess risk</text>\n";
  for (double ly = ymin; ly <= ymax + 1e-9; ly += 1) {
    out << "<text x=\"" << ml - 6 << "\" y=\"" << f(py(ly) + 4) << "\" text-anchor=\"end\">" << ly << "</text>\n";
  }

  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  std::size_t ci = 0;
  double legend_y = mt + 10;
  for (const auto& [algo, sums] : series) {
    const char* color = colors[ci++ % 4];
    out << "<polyline class=\"series\" data-algo=\"" << algo << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (const auto& s : sums) {
      if (s.median_excess_risk > 0) {
        out << f(px(std::log10(static_cast<double>(s.budget)))) << ',' << f(py(std::log10(s.median_excess_risk)))
            << ' ';
      }
    }
    out << "\"/>\n";
    for (const auto& s : sums) {
      if (s.median_excess_risk > 0) {
        out << "<circle cx=\"" << f(px(std::log10(static_cast<double>(s.budget)))) << "\" cy=\""
            << f(py(std::log10(s.median_excess_risk))) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      }
    }
    out << "<text x=\"" << W - mr + 10 << "\" y=\"" << legend_y << "\" fill=\"" << color << "\">" << algo << "</text>\n";
    legend_y += 18;
  }

  // reference lines are drawn against the AKALLS medians
  auto ref_series = series.count("akalls") ? series["akalls"] : std::vector<BudgetSummary>{};
  auto draw_ref = [&](double slope, double intercept_log10, const char* kind, const char* dash) {
    const double y0 = intercept_log10 + slope * xmin;
    const double y1 = intercept_log10 + slope * xmax;
    out << "<line class=\"reference-line\" data-kind=\"" << kind << "\" x1=\"" << f(px(xmin)) << "\" y1=\""
        << f(py(y0)) << "\" x2=\"" << f(px(xmax)) << "\" y2=\"" << f(py(y1)) << "\" stroke=\"gray\" stroke-dasharray=\""
        << dash << "\"/>\n";
    out << "<text x=\"" << W - mr + 10 << "\" y=\"" << legend_y << "\" fill=\"gray\">" << kind << " slope "
        << detail::fmt_real(std::round(slope * 1000) / 1000) << "</text>\n";
    legend_y += 18;
  };
  if (const auto fit = fit_medians(ref_series)) {
    // ln e = a + b ln n  =>  log10 e = a / ln 10 + b log10 n
    draw_ref(fit->slope, fit->intercept / std::log(10.0), "fitted", "6,4");
  }
  if (theory_slope) {
    for (const auto& s : ref_series) {
      if (s.median_excess_risk > 0) {
        const double lx = std::log10(static_cast<double>(s.budget));
        draw_ref(*theory_slope, std::log10(s.median_excess_risk) - *theory_slope * lx, "theoretical", "2,3");
        break;
      }
    }
  }
  out << "</svg>\n";
}

enum class ReportFormat { csv, json, svg };

inline ReportFormat parse_format(const std::string& s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  if (s == "svg") return ReportFormat::svg;
  throw ConfigError("unknown report format '" + s + "'");
}

/// Writes one report; `theory_slope` is used by the SVG only.
inline void emit_report(std::ostream& out, const std::vector<RunRecord>& records, ReportFormat format,
                        std::optional<double> theory_slope = std::nullopt) {
  if (records.empty()) throw InvalidArgument("emit_report: no records");
  switch (format) {
    case ReportFormat::csv:
      write_csv(out, records);
      break;
    case ReportFormat::json:
      write_json(out, records);
      break;
    case ReportFormat::svg:
      write_svg(out, records, theory_slope);
      break;
  }
}

/// Theoretical slope from a problem's declared (alpha, beta), if any.
inline std::optional<double> declared_theory_slope(const ProblemSpec& spec) {
  if (!spec.declared_smoothness || !spec.declared_noise) return std::nullopt;
  return theoretical_slope(spec.declared_smoothness->alpha, spec.declared_noise->beta, spec.dim);
}

}  // namespace akalls
