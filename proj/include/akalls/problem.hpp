#pragma once

// Synthetic classification problems with known ground truth, unlabeled
// pools drawn from them, and the memoizing label oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>

#include "error.hpp"
#include "rng.hpp"

namespace akalls {

using Point = std::vector<double>;
using PointView = std::span<const double>;

inline double squared_distance(PointView a, PointView b) noexcept {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = a[j] - b[j];
    acc += diff * diff;
  }
  return acc;
}

inline double distance(PointView a, PointView b) noexcept {
  return std::sqrt(squared_distance(a, b));
}

/// Standard normal CDF.
inline double normal_cdf(double x) noexcept {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// (alpha, L) under the local smoothness assumption.
struct SmoothnessDecl {
  double alpha;
  double L;
};

/// (beta, C) under the margin noise assumption.
struct NoiseDecl {
  double beta;
  double C;
};

/// A fully known classification problem: marginal sampler plus
/// regression function eta(x) = P(Y = 1 | X = x).
///
/// `declared_*` are metadata for audits and experiments; the engine never
/// reads them.
struct ProblemSpec {
  std::string name;
  std::size_t dim = 1;
  std::function<void(std::mt19937_64&, std::span<double>)> sample;
  std::function<double(PointView)> eta;
  /// P_X(B(x, r)) for the open Euclidean ball; empty when not known.
  std::function<double(PointView, double)> ball_prob;
  std::optional<SmoothnessDecl> declared_smoothness;
  std::optional<NoiseDecl> declared_noise;
  /// Standard deviation of each marginal coordinate (quadrature truncation).
  double marginal_sd = 1.0;
  /// 1-D only: density of the marginal, used by quadrature.
  std::function<double(double)> density_1d;
  /// 1-D only: points where eta is not smooth.
  std::vector<double> eta_kinks;

  /// Bayes classifier 1{eta(x) >= 1/2}.
  int bayes(PointView x) const { return eta(x) >= 0.5 ? 1 : 0; }
  bool has_analytic_ball() const { return static_cast<bool>(ball_prob); }
};

/// Immutable unlabeled pool X_1..X_w stored row-major.
class Pool {
 public:
  Pool(std::size_t dim, std::vector<double> coords, std::uint64_t seed = 0)
      : dim_(dim), coords_(std::move(coords)), seed_(seed) {
    detail::require(dim_ >= 1, "pool dimension must be >= 1");
    detail::require(!coords_.empty() && coords_.size() % dim_ == 0,
                    "pool must hold w >= 1 points of the stated dimension");
    for (double v : coords_) {
      if (!std::isfinite(v)) throw GenerationError("pool contains a non-finite coordinate");
    }
  }

  std::size_t size() const noexcept { return coords_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t seed() const noexcept { return seed_; }
  PointView operator[](std::size_t i) const noexcept { return {coords_.data() + i * dim_, dim_}; }
  std::span<const double> coords() const noexcept { return coords_; }

 private:
  std::size_t dim_;
  std::vector<double> coords_;
  std::uint64_t seed_;
};

/// Draws w i.i.d. points from the problem's marginal.
inline Pool draw_pool(const ProblemSpec& spec, std::size_t w, std::uint64_t seed) {
  detail::require(w >= 1, "draw_pool: w must be >= 1");
  if (spec.dim == 0) throw GenerationError("draw_pool: problem dimension is zero");
  std::mt19937_64 gen(hash_combine({seed, kPoolStream}));
  std::vector<double> coords(w * spec.dim);
  for (std::size_t i = 0; i < w; ++i) {
    std::span<double> row(coords.data() + i * spec.dim, spec.dim);
    spec.sample(gen, row);
    for (double v : row) {
      if (!std::isfinite(v)) throw GenerationError("draw_pool: marginal sampler produced a non-finite value");
    }
  }
  return Pool(spec.dim, std::move(coords), seed);
}

/// Lazily draws and memoizes one Bernoulli(eta(X_i)) label per pool point.
///
/// The label of point i depends only on (seed, i), so it is the same no matter
/// the order in which points are queried.
class Oracle {
 public:
  Oracle(const ProblemSpec& spec, const Pool& pool, std::uint64_t seed)
      : spec_(&spec), pool_(&pool), seed_(seed), revealed_(pool.size(), kUnknown) {}

  int query(std::size_t index) {
    if (index >= revealed_.size()) throw InvalidArgument("query_label: index out of range");
    auto& slot = revealed_[index];
    if (slot == kUnknown) {
      const double u = to_unit(hash_combine({seed_, kLabelStream, index}));
      slot = u < spec_->eta((*pool_)[index]) ? 1 : 0;
      ++distinct_reveals_;
    }
    return slot;
  }

  /// Label if already revealed.
  std::optional<int> peek(std::size_t index) const {
    if (index >= revealed_.size() || revealed_[index] == kUnknown) return std::nullopt;
    return revealed_[index];
  }

  std::size_t distinct_reveals() const noexcept { return distinct_reveals_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const Pool& pool() const noexcept { return *pool_; }

 private:
  static constexpr std::int8_t kUnknown = -1;
  const ProblemSpec* spec_;
  const Pool* pool_;
  std::uint64_t seed_;
  std::vector<std::int8_t> revealed_;
  std::size_t distinct_reveals_ = 0;
};

/// Regression function of the 1-D example: a peak of height 1 at x = 1/2
/// with Hoelder exponent alpha, falling to 1/3 at 0 and 1, constant 1/3 outside.
inline double eta_example(double x, double alpha) {
  if (x < 0.0 || x > 1.0) return 1.0 / 3.0;
  return 1.0 - std::pow(2.0, alpha + 1.0) / 3.0 * std::pow(std::abs(x - 0.5), alpha);
}

/// Fraction of pool points strictly inside B(x, r).
inline double ball_prob_empirical(const Pool& pool, PointView x, double r) {
  detail::require(r >= 0.0, "ball_prob_empirical: r must be >= 0");
  const double r2 = r * r;
  std::size_t inside = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (squared_distance(pool[i], x) < r2) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(pool.size());
}

/// P(||Z - x|| < r) for Z ~ N(0, I_d).
inline double gaussian_ball_prob(PointView x, double r) {
  if (r <= 0.0) return 0.0;
  if (x.size() == 1) {
    const double hi = normal_cdf(x[0] + r);
    const double lo = normal_cdf(x[0] - r);
    return std::clamp(hi - lo, 0.0, 1.0);
  }
  const double lambda = squared_distance(x, std::vector<double>(x.size(), 0.0));
  const auto d = static_cast<double>(x.size());
  double p;
  if (lambda == 0.0) {
    p = boost::math::cdf(boost::math::chi_squared(d), r * r);
  } else {
    p = boost::math::cdf(boost::math::non_central_chi_squared(d, lambda), r * r);
  }
  return std::clamp(p, 0.0, 1.0);
}

namespace detail {

inline void fill_standard_normal(std::mt19937_64& gen, std::span<double> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : out) v = normal(gen);
}

inline ProblemSpec gaussian_base(std::string name, std::size_t dim, bool analytic) {
  ProblemSpec spec;
  spec.name = std::move(name);
  spec.dim = dim;
  spec.sample = fill_standard_normal;
  if (analytic) spec.ball_prob = gaussian_ball_prob;
  if (dim == 1) spec.density_1d = normal_pdf;
  return spec;
}

}  // namespace detail

/// Margin exponent of the example at alpha = 0.6 with C = 2: the largest beta
/// on a 0.005 grid passing audit_h4 for eps in {0.02, ..., 0.5}. With C = 1
/// the same fit gives beta = 0 (P(|eta - 1/2| < 0.5) is close to 1).
inline constexpr double kExample1dFittedBeta = 0.465;

/// The 1-D example: X ~ N(0, 1) with `eta_example`.
inline ProblemSpec make_example1d(double alpha, bool analytic = true) {
  detail::require(alpha > 0.0 && alpha <= 1.0, "example1d: alpha must lie in (0, 1]");
  auto spec = detail::gaussian_base("example1d", 1, analytic);
  spec.eta = [alpha](PointView x) { return eta_example(x[0], alpha); };
  spec.declared_smoothness = SmoothnessDecl{alpha, 1.0};
  if (alpha == 0.6) spec.declared_noise = NoiseDecl{kExample1dFittedBeta, 2.0};
  spec.eta_kinks = {0.0, 0.5, 1.0};
  return spec;
}

/// 2-D radial analogue of the example: eta peaks at (1/2, 1/2) and drops to
/// 1/3 at radius 1/2; X ~ N(0, I_2).
inline ProblemSpec make_radial2d(double alpha, bool analytic = true) {
  detail::require(alpha > 0.0 && alpha <= 1.0, "radial2d: alpha must lie in (0, 1]");
  auto spec = detail::gaussian_base("radial2d", 2, analytic);
  spec.eta = [alpha](PointView x) {
    const double dx = x[0] - 0.5;
    const double dy = x[1] - 0.5;
    const double rad = std::sqrt(dx * dx + dy * dy);
    if (rad > 0.5) return 1.0 / 3.0;
    return 1.0 - std::pow(2.0, alpha + 1.0) / 3.0 * std::pow(rad, alpha);
  };
  return spec;
}

/// Noiseless problem: eta(x) = 1{x_1 >= 0}.
inline ProblemSpec make_threshold(std::size_t dim, bool analytic = true) {
  detail::require(dim >= 1, "threshold: dim must be >= 1");
  auto spec = detail::gaussian_base("threshold", dim, analytic);
  spec.eta = [](PointView x) { return x[0] >= 0.0 ? 1.0 : 0.0; };
  spec.eta_kinks = {0.0};
  return spec;
}

/// eta constant everywhere.
inline ProblemSpec make_constant(double p, std::size_t dim, bool analytic = true) {
  detail::require(p >= 0.0 && p <= 1.0, "constant: eta must lie in [0, 1]");
  detail::require(dim >= 1, "constant: dim must be >= 1");
  auto spec = detail::gaussian_base("constant", dim, analytic);
  spec.eta = [p](PointView) { return p; };
  return spec;
}

/// Reads one point per row, comma separated, no header.
inline Pool load_pool_csv(std::istream& in, std::uint64_t seed = 0) {
  std::vector<double> coords;
  std::size_t dim = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::stringstream row(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(row, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
        coords.push_back(v);
      } catch (const std::exception&) {
        throw ConfigError("pool csv line " + std::to_string(lineno) + ": not a decimal real: '" + cell + "'");
      }
      ++cols;
    }
    if (dim == 0) dim = cols;
    if (cols != dim) {
      throw ConfigError("pool csv line " + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                        " columns, got " + std::to_string(cols));
    }
  }
  if (dim == 0) throw ConfigError("pool csv is empty");
  return Pool(dim, std::move(coords), seed);
}

inline Pool load_pool_csv(const std::string& path, std::uint64_t seed = 0) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open pool csv: " + path);
  return load_pool_csv(in, seed);
}

}  // namespace akalls
