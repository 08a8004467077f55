#pragma once

// Closed-form sample sizes and confidence radii used by the engine.
// "log" is the natural logarithm throughout; log2 only where named.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "error.hpp"

namespace akalls {

inline constexpr double kInvE = 0.36787944117144233;  // e^{-1}

struct StatParams {
  /// Theoretical constant of the per-point sample bound (>= 7e6).
  double c_theory = 7.0e6;
  /// Multiplier for desk-scale runs; the default gives c_eff of about 10.
  double c_scale = 1.43e-6;
  double delta_cap = kInvE - 1e-9;

  double c_eff() const noexcept { return c_theory * c_scale; }

  void validate() const {
    detail::require(c_theory >= 7.0e6, "StatParams: c_theory must be >= 7e6");
    detail::require(c_scale > 0.0 && std::isfinite(c_scale), "StatParams: c_scale must be positive");
    detail::require(delta_cap > 0.0 && delta_cap < kInvE, "StatParams: delta_cap must lie in (0, 1/e)");
  }
};

namespace detail {

inline void require_delta(double delta, const char* op) {
  if (!(delta > 0.0 && delta < kInvE)) {
    throw InvalidArgument(std::string(op) + ": delta must lie in (0, 1/e)");
  }
}

// log(1/delta) + log log(1/delta)
inline double delta_term(double delta) {
  const double l = std::log(1.0 / delta);
  return l + std::log(l);
}

}  // namespace detail

/// Anytime confidence radius b_{delta,k}.
inline double confidence_radius(double delta, std::size_t k) {
  detail::require_delta(delta, "confidence_radius");
  detail::require(k >= 1, "confidence_radius: k must be >= 1");
  const double kd = static_cast<double>(k);
  const double lll = std::log(std::log(std::numbers::e * kd));
  return std::sqrt(2.0 / kd * (detail::delta_term(delta) + lll));
}

/// Real-valued sample bound before rounding.
inline double sample_bound_real(const StatParams& params, double delta, double margin) {
  detail::require_delta(delta, "sample_bound");
  detail::require(delta <= params.delta_cap, "sample_bound: delta exceeds delta_cap");
  detail::require(margin > 0.0 && margin <= 1.0, "sample_bound: margin must lie in (0, 1]");
  const double inner = std::log(std::log(512.0 * std::sqrt(std::numbers::e) / margin));
  return params.c_eff() / (margin * margin) * (detail::delta_term(delta) + inner);
}

/// k(delta, Delta): label requests sufficient to resolve a margin Delta.
/// Saturates at the largest uint64 value.
inline std::uint64_t sample_bound(const StatParams& params, double delta, double margin) {
  const double k = std::ceil(sample_bound_real(params, delta, margin));
  if (k >= 0x1.0p63) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(k);
}

/// max(eps/2, (eps/2C)^{1/(beta+1)}).
inline double margin_threshold(double epsilon, double beta, double C) {
  detail::require(epsilon > 0.0 && epsilon < 0.5, "margin_threshold: epsilon must lie in (0, 1/2)");
  detail::require(beta >= 0.0, "margin_threshold: beta must be >= 0");
  detail::require(C >= 1.0, "margin_threshold: C must be >= 1");
  return std::max(epsilon / 2.0, std::pow(epsilon / (2.0 * C), 1.0 / (beta + 1.0)));
}

inline double phi(std::size_t n, double delta) {
  detail::require_delta(delta, "phi");
  detail::require(n >= 1, "phi: n must be >= 1");
  return std::sqrt(detail::delta_term(delta) / static_cast<double>(n));
}

/// Number of smoothness levels, ceil(log2(1/eps)).
inline std::size_t level_count(double epsilon) {
  detail::require(epsilon > 0.0 && epsilon < 0.5, "level_count: epsilon must lie in (0, 1/2)");
  return static_cast<std::size_t>(std::ceil(std::log2(1.0 / epsilon)));
}

struct GridSpec {
  double epsilon = 0.0;
  double C = 1.0;
  std::vector<double> alphas;          // 2^{1-i}
  std::vector<double> betas;           // i / log^2(1/eps)
  std::vector<double> deltas_margin;   // margin_threshold(eps, beta_i, C)
};

inline GridSpec build_grids(double epsilon, double C) {
  detail::require(epsilon > 0.0 && epsilon < 0.5, "build_grids: epsilon must lie in (0, 1/2)");
  detail::require(C >= 1.0, "build_grids: C must be >= 1");
  GridSpec g;
  g.epsilon = epsilon;
  g.C = C;
  const std::size_t levels = level_count(epsilon);
  for (std::size_t i = 1; i <= levels; ++i) g.alphas.push_back(std::ldexp(1.0, 1 - static_cast<int>(i)));

  const double ell = std::log(1.0 / epsilon);
  const auto n_beta = static_cast<std::size_t>(std::ceil(ell * ell * ell));
  for (std::size_t i = 1; i <= n_beta; ++i) {
    const double beta = static_cast<double>(i) / (ell * ell);
    g.betas.push_back(beta);
    g.deltas_margin.push_back(margin_threshold(epsilon, beta, C));
  }
  return g;
}

}  // namespace akalls
