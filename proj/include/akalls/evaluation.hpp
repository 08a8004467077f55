#pragma once

// Ground-truth evaluation against a known problem: excess risk by Monte
// Carlo or 1-D quadrature, empirical audits of the smoothness and margin
// assumptions, and log-log rate fitting.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "problem.hpp"
#include "rng.hpp"

namespace akalls {

using Classifier = std::function<int(PointView)>;

enum class RiskMethod { monte_carlo, quadrature };

inline const char* to_string(RiskMethod m) { return m == RiskMethod::monte_carlo ? "monte-carlo" : "quadrature"; }

struct RiskEstimate {
  double excess_risk = 0.0;
  double std_error = 0.0;
  RiskMethod method = RiskMethod::monte_carlo;
  std::size_t n_eval = 0;
};

/// Mean of |2 eta(X) - 1| 1{f(X) != f*(X)} over m draws from P_X.
inline RiskEstimate excess_risk_mc(const ProblemSpec& spec, const Classifier& f, std::size_t m, std::uint64_t seed) {
  detail::require(m >= 1, "excess_risk_mc: m must be >= 1");
  std::mt19937_64 gen(hash_combine({seed, kEvalStream}));
  Point x(spec.dim);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    spec.sample(gen, x);
    const double eta = spec.eta(x);
    const int best = eta >= 0.5 ? 1 : 0;
    const double loss = f(x) != best ? std::abs(2.0 * eta - 1.0) : 0.0;
    const double d = loss - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (loss - mean);
  }
  RiskEstimate out;
  out.excess_risk = mean;
  out.std_error = m > 1 ? std::sqrt(m2 / static_cast<double>(m - 1) / static_cast<double>(m)) : 0.0;
  out.method = RiskMethod::monte_carlo;
  out.n_eval = m;
  return out;
}

namespace detail {

// Adaptive Simpson on a piece where the integrand is smooth.
class AdaptiveSimpson {
 public:
  AdaptiveSimpson(const std::function<double(double)>& g, double tol) : g_(g), tol_(tol) {}

  double integrate(double a, double b) {
    const double fa = eval(a), fb = eval(b), fm = eval(0.5 * (a + b));
    return recurse(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol_, 0);
  }

  std::size_t evaluations() const noexcept { return evals_; }

 private:
  static double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  }

  double eval(double x) {
    ++evals_;
    return g_(x);
  }

  double recurse(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = eval(lm), frm = eval(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    const double diff = left + right - whole;
    if (depth >= 50 || std::abs(diff) <= 15.0 * tol || b - a < 1e-13) return left + right + diff / 15.0;
    return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
  }

  const std::function<double(double)>& g_;
  double tol_;
  std::size_t evals_ = 0;
};

// Refines a sign change of an indicator on [a, b] to ~1e-14.
inline double bisect_change(const std::function<int(double)>& h, double a, double b) {
  const int ha = h(a);
  for (int it = 0; it < 200 && b - a > 1e-14 * std::max(1.0, std::abs(a)); ++it) {
    const double m = 0.5 * (a + b);
    (h(m) == ha ? a : b) = m;
  }
  return 0.5 * (a + b);
}

}  // namespace detail

/// Adaptive quadrature of |2 eta - 1| 1{f != f*} p_X over [-8 sd, 8 sd].
///
/// The integration range is split where f or f* change value (found on a
/// 2^16-cell scan plus `breakpoints`) and at eta's kinks, so each piece has
/// a smooth integrand.
inline RiskEstimate excess_risk_quadrature_1d(const ProblemSpec& spec, const Classifier& f, double tol = 1e-12,
                                              std::vector<double> breakpoints = {}) {
  if (spec.dim != 1) throw InvalidArgument("excess_risk_quadrature_1d: problem must be one-dimensional");
  detail::require(static_cast<bool>(spec.density_1d), "excess_risk_quadrature_1d: problem has no 1-D density");
  detail::require(tol > 0.0, "excess_risk_quadrature_1d: tol must be positive");
  const double lo = -8.0 * spec.marginal_sd;
  const double hi = 8.0 * spec.marginal_sd;

  const std::function<int(double)> disagree = [&](double x) {
    const double p[1] = {x};
    return f(p) != spec.bayes(p) ? 1 : 0;
  };
  const std::function<int(double)> classifier_value = [&](double x) {
    const double p[1] = {x};
    return f(p);
  };
  const std::function<int(double)> bayes_value = [&](double x) {
    const double p[1] = {x};
    return spec.bayes(p);
  };

  std::vector<double> cuts = {lo, hi};
  for (double b : breakpoints) {
    if (b > lo && b < hi) cuts.push_back(b);
  }
  for (double k : spec.eta_kinks) {
    if (k > lo && k < hi) cuts.push_back(k);
  }
  constexpr std::size_t kScan = 1 << 16;
  const double step = (hi - lo) / static_cast<double>(kScan);
  int prev_f = classifier_value(lo), prev_b = bayes_value(lo);
  for (std::size_t i = 1; i <= kScan; ++i) {
    const double a = lo + static_cast<double>(i - 1) * step;
    const double b = i == kScan ? hi : lo + static_cast<double>(i) * step;
    const int cur_f = classifier_value(b), cur_b = bayes_value(b);
    if (cur_f != prev_f) cuts.push_back(detail::bisect_change(classifier_value, a, b));
    if (cur_b != prev_b) cuts.push_back(detail::bisect_change(bayes_value, a, b));
    prev_f = cur_f;
    prev_b = cur_b;
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const std::function<double(double)> integrand = [&](double x) {
    const double p[1] = {x};
    const double eta = spec.eta(p);
    if (f(p) == (eta >= 0.5 ? 1 : 0)) return 0.0;
    return std::abs(2.0 * eta - 1.0) * spec.density_1d(x);
  };
  detail::AdaptiveSimpson simpson(integrand, tol);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    if (b - a <= 0.0) continue;
    // the indicator is constant on the open piece; skip pieces where f == f*
    if (!disagree(0.5 * (a + b))) continue;
    total += simpson.integrate(a, b);
  }
  RiskEstimate out;
  out.excess_risk = total;
  out.std_error = 0.0;
  out.method = RiskMethod::quadrature;
  out.n_eval = simpson.evaluations();
  return out;
}

// ---------------------------------------------------------------------------
// Assumption audits.

enum class Assumption { h2_smoothness, h4_margin_noise };

inline const char* to_string(Assumption a) { return a == Assumption::h2_smoothness ? "H2-smoothness" : "H4-margin-noise"; }

struct AuditWitness {
  Point x;
  Point other;      // H2 only
  double lhs = 0;   // |eta(x) - eta(x')|, or the margin mass estimate
  double rhs = 0;   // L P(B)^{alpha/d}, or C eps^beta
  double epsilon = 0;
};

struct AuditReport {
  Assumption assumption = Assumption::h2_smoothness;
  std::size_t tested = 0;
  std::size_t violations = 0;
  /// Largest lhs - rhs seen; meaningful when tested > 0.
  std::optional<AuditWitness> worst;
  /// H2: largest |eta(x) - eta(x')| / P(B)^{alpha/d}, the smallest L that passes.
  double max_ratio = 0.0;
};

/// Samples pairs from P_X and checks |eta(x) - eta(x')| <= L P_X(B(x, |x - x'|))^{alpha/d}.
/// Uses the closed-form ball mass when the problem has one, else counts in a
/// reference sample of `reference_size` draws.
inline AuditReport audit_h2(const ProblemSpec& spec, double alpha, double L, std::size_t pairs, std::uint64_t seed,
                            std::size_t reference_size = 100000) {
  detail::require(alpha > 0.0 && alpha <= 1.0, "audit_h2: alpha must lie in (0, 1]");
  detail::require(L > 0.0, "audit_h2: L must be positive");
  std::optional<Pool> reference;
  if (!spec.has_analytic_ball()) reference = draw_pool(spec, reference_size, hash_combine({seed, 0x48325246ULL}));
  auto mass = [&](PointView x, double r) {
    return spec.has_analytic_ball() ? spec.ball_prob(x, r) : ball_prob_empirical(*reference, x, r);
  };

  std::mt19937_64 gen(hash_combine({seed, kEvalStream, 0x4832ULL}));
  AuditReport report;
  report.assumption = Assumption::h2_smoothness;
  const double exponent = alpha / static_cast<double>(spec.dim);
  Point x(spec.dim), y(spec.dim);
  double worst_gap = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < pairs; ++p) {
    spec.sample(gen, x);
    spec.sample(gen, y);
    const double lhs = std::abs(spec.eta(x) - spec.eta(y));
    const double ball = mass(x, distance(x, y));
    const double rhs = L * std::pow(ball, exponent);
    ++report.tested;
    if (lhs > 0.0) report.max_ratio = std::max(report.max_ratio, ball > 0.0 ? lhs / std::pow(ball, exponent)
                                                                             : std::numeric_limits<double>::infinity());
    if (lhs > rhs + 1e-12) ++report.violations;
    if (lhs - rhs > worst_gap) {
      worst_gap = lhs - rhs;
      report.worst = AuditWitness{x, y, lhs, rhs, 0.0};
    }
  }
  return report;
}

/// Monte Carlo check of P_X(|eta - 1/2| < eps) <= C eps^beta for each eps;
/// a violation needs the estimate to exceed the bound by 3 standard errors.
inline AuditReport audit_h4(const ProblemSpec& spec, double beta, double C, const std::vector<double>& epsilons,
                            std::size_t m, std::uint64_t seed) {
  detail::require(m >= 1, "audit_h4: m must be >= 1");
  for (double e : epsilons) detail::require(e > 0.0 && e <= 1.0, "audit_h4: every eps must lie in (0, 1]");
  std::mt19937_64 gen(hash_combine({seed, kEvalStream, 0x4834ULL}));
  std::vector<double> margins(m);
  Point x(spec.dim);
  for (auto& v : margins) {
    spec.sample(gen, x);
    v = std::abs(spec.eta(x) - 0.5);
  }
  std::sort(margins.begin(), margins.end());

  AuditReport report;
  report.assumption = Assumption::h4_margin_noise;
  double worst_gap = -std::numeric_limits<double>::infinity();
  const auto md = static_cast<double>(m);
  for (double eps : epsilons) {
    const auto below = static_cast<double>(std::lower_bound(margins.begin(), margins.end(), eps) - margins.begin());
    const double p = below / md;
    const double se = std::sqrt(p * (1.0 - p) / md);
    const double bound = C * std::pow(eps, beta);
    ++report.tested;
    if (p > bound + 3.0 * se) ++report.violations;
    if (p - bound > worst_gap) {
      worst_gap = p - bound;
      report.worst = AuditWitness{{}, {}, p, bound, eps};
    }
  }
  return report;
}

/// eps in {0.02, 0.04, ..., 0.5}.
inline std::vector<double> default_margin_grid() {
  std::vector<double> eps;
  for (int i = 1; i <= 25; ++i) eps.push_back(0.02 * i);
  return eps;
}

/// Largest beta on {0, step, 2 step, ...} up to `beta_max` that passes audit_h4.
inline double fit_margin_exponent(const ProblemSpec& spec, double C, const std::vector<double>& epsilons,
                                  std::size_t m, std::uint64_t seed, double step = 0.005, double beta_max = 5.0) {
  double best = -1.0;
  for (int i = 0; i * step <= beta_max + 1e-12; ++i) {
    const double beta = i * step;
    if (audit_h4(spec, beta, C, epsilons, m, seed).violations == 0) {
      best = beta;
    } else {
      break;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Rates.

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least squares line through (ln n, ln e).
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  detail::require(points.size() >= 2, "fit_rate: need at least two points");
  double sx = 0, sy = 0;
  for (const auto& [n, e] : points) {
    detail::require(n > 0.0 && e > 0.0, "fit_rate: budgets and excess risks must be positive");
    sx += std::log(n);
    sy += std::log(e);
  }
  const auto k = static_cast<double>(points.size());
  const double mx = sx / k, my = sy / k;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [n, e] : points) {
    const double dx = std::log(n) - mx, dy = std::log(e) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  detail::require(sxx > 0.0, "fit_rate: budgets must not all be equal");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

/// Minimax exponent -alpha (beta + 1) / (2 alpha + d - alpha beta).
inline double theoretical_slope(double alpha, double beta, std::size_t dim) {
  return -alpha * (beta + 1.0) / (2.0 * alpha + static_cast<double>(dim) - alpha * beta);
}

inline double median(std::vector<double> v) {
  detail::require(!v.empty(), "median: empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// One-sided Wilcoxon rank-sum p-value for H1: `lower` tends to be smaller
/// than `higher`. Normal approximation with tie and continuity corrections.
inline double wilcoxon_rank_sum_less(const std::vector<double>& lower, const std::vector<double>& higher) {
  detail::require(!lower.empty() && !higher.empty(), "wilcoxon: empty sample");
  struct Obs {
    double v;
    bool first;
  };
  std::vector<Obs> all;
  for (double v : lower) all.push_back({v, true});
  for (double v : higher) all.push_back({v, false});
  std::sort(all.begin(), all.end(), [](const Obs& a, const Obs& b) { return a.v < b.v; });
  const auto n1 = static_cast<double>(lower.size()), n2 = static_cast<double>(higher.size());
  const double N = n1 + n2;
  double rank_sum = 0.0, tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t q = i; q < j; ++q) {
      if (all[q].first) rank_sum += avg;
    }
    const auto t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double u = rank_sum - n1 * (n1 + 1.0) / 2.0;
  const double mean = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((N + 1.0) - tie_term / (N * (N - 1.0)));
  if (var <= 0.0) return 1.0;
  const double z = (u - mean + 0.5) / std::sqrt(var);
  return normal_cdf(z);
}

}  // namespace akalls
