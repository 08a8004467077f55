#pragma once

// The adaptive active learner: smoothness levels alpha_i = 2^{1-i}, the
// Reliable screen, sequential label inference with an anytime cutoff, and
// the final 1-NN classifier. Also a passive k-NN baseline.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "confidence.hpp"
#include "error.hpp"
#include "neighbors.hpp"
#include "problem.hpp"
#include "rng.hpp"

namespace akalls {

struct LabeledPoint {
  std::size_t index;  // pool index
  int label;

  friend bool operator==(const LabeledPoint&, const LabeledPoint&) = default;
};

/// A point whose label was inferred with lower bound `lower_bound` on |eta - 1/2|.
struct Guarantee {
  std::size_t index;
  double lower_bound;

  friend bool operator==(const Guarantee&, const Guarantee&) = default;
};

struct EngineParams {
  double L = 1.0;
  double C = 1.0;
  double delta = 0.1;
  double epsilon = 0.05;
  StatParams stats;

  void validate() const {
    detail::require(L >= 1.0 && std::isfinite(L), "engine: L must be >= 1");
    detail::require(C >= 1.0 && std::isfinite(C), "engine: C must be >= 1");
    detail::require(delta > 0.0 && delta < kInvE, "engine: delta must lie in (0, 1/e)");
    detail::require(epsilon > 0.0 && epsilon < 0.5, "engine: epsilon must lie in (0, 1/2)");
    stats.validate();
  }
};

// ---------------------------------------------------------------------------
// Ball mass source for the Reliable screen.

/// Answers "is P_X(B(x, |x - x'|)) <= threshold" from the problem's
/// closed-form ball mass when it has one, else from pool counts.
class BallMassOracle {
 public:
  BallMassOracle(const ProblemSpec& spec, const NeighborIndex& index, bool prefer_analytic = true)
      : spec_(&spec), index_(&index), analytic_(prefer_analytic && spec.has_analytic_ball()) {}

  bool analytic() const noexcept { return analytic_; }

  bool mass_at_most(PointView x, PointView other, double threshold) const {
    const double r2 = squared_distance(x, other);
    if (r2 == 0.0) return threshold >= 0.0;
    if (analytic_) return spec_->ball_prob(x, std::sqrt(r2)) <= threshold;
    const auto w = static_cast<double>(index_->pool().size());
    if (threshold >= 1.0) return true;
    const auto limit = static_cast<std::size_t>(std::floor(threshold * w));
    return index_->count_within(x, r2, limit) <= limit;
  }

 private:
  const ProblemSpec* spec_;
  const NeighborIndex* index_;
  bool analytic_;
};

/// True iff some guaranteed point x' has P_X(B(x, |x - x'|)) <= (c / 64L)^{d/alpha}.
inline bool reliable(PointView x, double alpha, double L, std::span<const Guarantee> guarantees, const Pool& pool,
                     const BallMassOracle& mass) {
  detail::require(alpha > 0.0 && alpha <= 1.0, "reliable: alpha must lie in (0, 1]");
  detail::require(L >= 1.0, "reliable: L must be >= 1");
  const double exponent = static_cast<double>(x.size()) / alpha;
  for (const auto& g : guarantees) {
    const double threshold = std::pow(g.lower_bound / (64.0 * L), exponent);
    if (mass.mass_at_most(x, pool[g.index], threshold)) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Sequential label inference.

struct ConfidentResult {
  int label = 0;
  std::vector<LabeledPoint> queried;
  /// |mean - 1/2| - b_{delta,|Q|}; -inf when no label was requested.
  double lower_bound = -std::numeric_limits<double>::infinity();
  double radius = std::numeric_limits<double>::infinity();
  bool stopped_by_cutoff = false;
  bool budget_exhausted = false;
  /// Largest i (1-based) with |Q| <= k(delta, Delta_i); 0 if none.
  std::size_t certified_level = 0;
  std::uint64_t cap = 0;
};

/// Largest per-point request count over the beta grid, max_i k(delta, Delta_i).
inline std::uint64_t request_cap(const StatParams& stats, double delta, const GridSpec& grids) {
  std::uint64_t cap = 0;
  for (double margin : grids.deltas_margin) cap = std::max(cap, sample_bound(stats, delta, margin));
  return cap;
}

/// Requests labels of x's nearest pool neighbors one at a time until the
/// cutoff |mean_k - 1/2| > 2 b_{delta,k} fires, min(cap, t) labels have
/// been requested, or the pool runs out.
inline ConfidentResult confident_adapt(PointView x, std::size_t t, double delta_s, const NeighborIndex& index,
                                       Oracle& oracle, const GridSpec& grids, const StatParams& stats) {
  detail::require_delta(delta_s, "confident_adapt");
  ConfidentResult out;
  out.cap = request_cap(stats, delta_s, grids);
  if (t == 0) {
    out.budget_exhausted = true;
    return out;
  }
  const std::uint64_t limit = std::min<std::uint64_t>(out.cap, t);
  auto neighbors = index.stream(x);
  std::size_t ones = 0;
  std::size_t k = 0;
  while (k < limit) {
    const auto nb = neighbors.next();
    if (!nb) break;
    const int y = oracle.query(nb->index);
    out.queried.push_back({nb->index, y});
    ones += static_cast<std::size_t>(y);
    ++k;
    const double mean = static_cast<double>(ones) / static_cast<double>(k);
    if (std::abs(mean - 0.5) > 2.0 * confidence_radius(delta_s, k)) {
      out.stopped_by_cutoff = true;
      break;
    }
  }
  if (k == 0) return out;

  const double mean = static_cast<double>(ones) / static_cast<double>(k);
  out.label = mean >= 0.5 ? 1 : 0;
  out.radius = confidence_radius(delta_s, k);
  out.lower_bound = std::abs(mean - 0.5) - out.radius;
  for (std::size_t i = 0; i < grids.deltas_margin.size(); ++i) {
    if (k <= sample_bound(stats, delta_s, grids.deltas_margin[i])) out.certified_level = i + 1;
  }
  return out;
}

/// Convenience form that builds the grids from (epsilon, C).
inline ConfidentResult confident_adapt(PointView x, double epsilon, std::size_t t, double delta_s,
                                       const NeighborIndex& index, Oracle& oracle, double C = 1.0,
                                       const StatParams& stats = {}) {
  return confident_adapt(x, t, delta_s, index, oracle, build_grids(epsilon, C), stats);
}

// ---------------------------------------------------------------------------
// 1-NN output classifier.

/// Nearest-neighbor rule over a labeled support set; ties go to the lower
/// pool index.
class OneNNClassifier {
 public:
  OneNNClassifier() = default;

  OneNNClassifier(const Pool& pool, std::vector<LabeledPoint> support) : dim_(pool.dim()) {
    std::sort(support.begin(), support.end(),
              [](const LabeledPoint& a, const LabeledPoint& b) { return a.index < b.index; });
    support_ = std::move(support);
    if (support_.empty()) return;
    std::vector<double> coords;
    coords.reserve(support_.size() * dim_);
    for (const auto& p : support_) {
      const auto x = pool[p.index];
      coords.insert(coords.end(), x.begin(), x.end());
    }
    build(std::move(coords));
  }

  /// Support given directly as points; order sets the tie rule.
  OneNNClassifier(std::size_t dim, const std::vector<Point>& points, const std::vector<int>& labels) : dim_(dim) {
    detail::require(points.size() == labels.size(), "OneNNClassifier: points and labels differ in length");
    if (points.empty()) return;
    std::vector<double> coords;
    for (std::size_t i = 0; i < points.size(); ++i) {
      detail::require(points[i].size() == dim, "OneNNClassifier: point dimension mismatch");
      coords.insert(coords.end(), points[i].begin(), points[i].end());
      support_.push_back({i, labels[i]});
    }
    build(std::move(coords));
  }

  bool empty() const noexcept { return support_.empty(); }
  const std::vector<LabeledPoint>& support() const noexcept { return support_; }

  int predict(PointView x) const {
    if (support_.empty()) throw InvalidArgument("predict_1nn: empty support");
    return support_[index_->kth_neighbor(x, 1)].label;
  }

  int operator()(PointView x) const { return predict(x); }

 private:
  void build(std::vector<double> coords) {
    points_ = std::make_shared<const Pool>(dim_, std::move(coords));
    index_ = std::make_shared<const NeighborIndex>(*points_);
  }

  std::size_t dim_ = 1;
  std::vector<LabeledPoint> support_;
  std::shared_ptr<const Pool> points_;
  std::shared_ptr<const NeighborIndex> index_;
};

inline int predict_1nn(const OneNNClassifier& f, PointView x) { return f.predict(x); }

// ---------------------------------------------------------------------------
// The outer loop.

enum class PointStatus : std::uint8_t { unseen, informative, noisy };

/// One call of the sequential inference inside the outer loop.
struct Inference {
  std::size_t index;
  std::size_t level;
  int label;
  double delta;
  std::size_t requests;
  double lower_bound;
  double radius;
  bool cutoff;

  friend bool operator==(const Inference&, const Inference&) = default;
};

struct ActiveState {
  /// Union of the per-level informative sets, in insertion order.
  std::vector<LabeledPoint> informative;
  std::vector<LabeledPoint> noisy;
  std::vector<Guarantee> guarantees;
  /// |S_i| after each completed level.
  std::vector<std::size_t> level_sizes;
  std::int64_t budget_remaining = 0;
  std::size_t level = 0;
  std::vector<PointStatus> status;
  std::vector<Inference> inferences;

  friend bool operator==(const ActiveState&, const ActiveState&) = default;
};

struct LevelMetrics {
  double alpha = 1.0;
  std::size_t budget = 0;
  std::size_t charged = 0;
  std::size_t examined = 0;
  std::size_t reliable_skips = 0;
  std::size_t informative_added = 0;
  std::size_t noisy_added = 0;
  std::size_t cutoffs = 0;

  friend bool operator==(const LevelMetrics&, const LevelMetrics&) = default;
};

struct RunMetrics {
  std::size_t charged_requests = 0;
  std::size_t distinct_reveals = 0;
  std::uint64_t max_request_cap = 0;
  std::vector<LevelMetrics> levels;

  friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

struct RunResult {
  OneNNClassifier classifier;
  ActiveState state;
  RunMetrics metrics;
};

/// delta / (32 s^2 ceil(log2(1/eps))) for the 1-based position s.
inline double point_confidence(double delta, std::size_t s, std::size_t levels) {
  const auto sd = static_cast<double>(s);
  return delta / (32.0 * sd * sd * static_cast<double>(levels));
}

/// Runs the adaptive learner on `pool` with label budget n.
///
/// Each level gets floor(n / levels) labels (at least 1). A level ends when
/// its budget is spent or every pool point has been visited. Points already
/// labeled at an earlier level are never re-inferred. The classifier is 1-NN
/// over the informative set; noisy points are kept in the state only.
inline RunResult run_akalls(const ProblemSpec& spec, const Pool& pool, Oracle& oracle, std::size_t n,
                            const EngineParams& params, const NeighborIndex* shared_index = nullptr) {
  params.validate();
  detail::require(n >= 1, "run_akalls: budget n must be >= 1");
  detail::require(pool.dim() == spec.dim, "run_akalls: pool dimension differs from the problem's");
  detail::require(&oracle.pool() == &pool, "run_akalls: oracle is bound to a different pool");

  std::optional<NeighborIndex> own_index;
  if (shared_index == nullptr) own_index.emplace(pool);
  const NeighborIndex& index = shared_index ? *shared_index : *own_index;
  detail::require(&index.pool() == &pool, "run_akalls: neighbor index built over a different pool");
  const BallMassOracle mass(spec, index);

  const GridSpec grids = build_grids(params.epsilon, params.C);
  const std::size_t levels = grids.alphas.size();
  const std::size_t per_level = std::max<std::size_t>(1, n / levels);
  const std::size_t w = pool.size();

  RunResult result;
  auto& state = result.state;
  auto& metrics = result.metrics;
  state.status.assign(w, PointStatus::unseen);

  for (std::size_t level = 1; level <= levels; ++level) {
    state.level = level;
    LevelMetrics lm;
    lm.alpha = grids.alphas[level - 1];
    lm.budget = per_level;
    auto t = static_cast<std::int64_t>(per_level);

    for (std::size_t s = 1; s <= w && t > 0; ++s) {
      const std::size_t i = s - 1;
      if (state.status[i] != PointStatus::unseen) continue;
      if (reliable(pool[i], lm.alpha, params.L, state.guarantees, pool, mass)) {
        ++lm.reliable_skips;
        continue;
      }
      const double delta_s = point_confidence(params.delta, s, levels);
      auto res = confident_adapt(pool[i], static_cast<std::size_t>(t), delta_s, index, oracle, grids, params.stats);
      ++lm.examined;
      metrics.max_request_cap = std::max(metrics.max_request_cap, res.cap);
      const auto q = res.queried.size();
      t -= static_cast<std::int64_t>(q);
      lm.charged += q;
      if (res.stopped_by_cutoff) ++lm.cutoffs;
      state.inferences.push_back({i, level, res.label, delta_s, q, res.lower_bound, res.radius, res.stopped_by_cutoff});
      if (q > 0 && res.lower_bound >= 0.1 * res.radius) {
        state.informative.push_back({i, res.label});
        state.guarantees.push_back({i, res.lower_bound});
        state.status[i] = PointStatus::informative;
        ++lm.informative_added;
      } else {
        state.noisy.push_back({i, res.label});
        state.status[i] = PointStatus::noisy;
        ++lm.noisy_added;
      }
    }
    state.budget_remaining = t;
    state.level_sizes.push_back(state.informative.size());
    metrics.charged_requests += lm.charged;
    metrics.levels.push_back(lm);
  }
  metrics.distinct_reveals = oracle.distinct_reveals();
  result.classifier = OneNNClassifier(pool, state.informative);
  return result;
}

// ---------------------------------------------------------------------------
// Passive baseline.

/// ceil(n^{2 alpha / (2 alpha + d)}) when alpha is known, else ceil(sqrt(n)).
inline std::size_t default_knn_k(std::size_t n, std::size_t dim, std::optional<double> alpha) {
  const auto nd = static_cast<double>(n);
  double k = alpha ? std::pow(nd, 2.0 * *alpha / (2.0 * *alpha + static_cast<double>(dim))) : std::sqrt(nd);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(k - 1e-9)), 1, n);
}

/// Majority vote over the k nearest of n uniformly chosen labeled pool points.
/// Equal votes predict 1.
class PassiveKnn {
 public:
  PassiveKnn(const Pool& pool, Oracle& oracle, std::size_t n, std::size_t k, std::uint64_t seed)
      : dim_(pool.dim()), k_(k) {
    detail::require(n >= 1 && n <= pool.size(), "passive_knn: n must lie in [1, w]");
    detail::require(k >= 1 && k <= n, "passive_knn: k must lie in [1, n]");
    std::vector<std::size_t> chosen(pool.size());
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    std::mt19937_64 gen(hash_combine({seed, kBaselineStream}));
    // partial Fisher-Yates: first n entries form a uniform subset
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(chosen[i], chosen[pick(gen)]);
    }
    chosen.resize(n);
    std::sort(chosen.begin(), chosen.end());
    std::vector<double> coords;
    coords.reserve(n * dim_);
    for (auto idx : chosen) {
      labels_.push_back(oracle.query(idx));
      const auto x = pool[idx];
      coords.insert(coords.end(), x.begin(), x.end());
    }
    points_ = std::make_shared<const Pool>(dim_, std::move(coords));
    index_ = std::make_shared<const NeighborIndex>(*points_);
  }

  std::size_t k() const noexcept { return k_; }
  std::size_t labeled() const noexcept { return labels_.size(); }

  int predict(PointView x) const {
    auto s = index_->stream(x);
    std::size_t ones = 0;
    for (std::size_t j = 0; j < k_; ++j) ones += static_cast<std::size_t>(labels_[s.next()->index]);
    return 2 * ones >= k_ ? 1 : 0;
  }

  int operator()(PointView x) const { return predict(x); }

 private:
  std::size_t dim_;
  std::size_t k_;
  std::vector<int> labels_;
  std::shared_ptr<const Pool> points_;
  std::shared_ptr<const NeighborIndex> index_;
};

}  // namespace akalls
