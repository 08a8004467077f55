#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include <akalls/engine.hpp>
#include <akalls/registry.hpp>

#include "formula_oracle.hpp"

using namespace akalls;

namespace {

double phi_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

struct Fixture {
  ProblemSpec spec;
  Pool pool;
  NeighborIndex index;
  Oracle oracle;

  Fixture(ProblemSpec s, std::size_t w, std::uint64_t seed)
      : spec(std::move(s)), pool(draw_pool(spec, w, seed)), index(pool), oracle(spec, pool, seed + 1) {}
};

void check_invariants(const RunResult& r, const Pool& pool, std::size_t n, const Oracle& oracle) {
  const auto& st = r.state;
  // nesting
  for (std::size_t i = 1; i < st.level_sizes.size(); ++i) EXPECT_LE(st.level_sizes[i - 1], st.level_sizes[i]);
  ASSERT_FALSE(st.level_sizes.empty());
  EXPECT_EQ(st.level_sizes.back(), st.informative.size());
  // informative and noisy are disjoint; each point inferred once
  std::set<std::size_t> inf, noi, seen;
  for (const auto& p : st.informative) EXPECT_TRUE(inf.insert(p.index).second);
  for (const auto& p : st.noisy) EXPECT_TRUE(noi.insert(p.index).second);
  for (auto i : inf) EXPECT_FALSE(noi.count(i));
  for (const auto& c : st.inferences) EXPECT_TRUE(seen.insert(c.index).second);
  EXPECT_EQ(seen.size(), inf.size() + noi.size());
  // budget
  EXPECT_LE(r.metrics.charged_requests, n);
  EXPECT_LE(oracle.distinct_reveals(), r.metrics.charged_requests);
  EXPECT_LT(oracle.distinct_reveals(), pool.size() + 1);
  // guarantees
  std::size_t k = 0;
  for (const auto& c : st.inferences) {
    if (c.requests == 0) continue;
    EXPECT_DOUBLE_EQ(c.radius, confidence_radius(c.delta, c.requests));
    if (inf.count(c.index)) {
      EXPECT_GE(c.lower_bound, 0.1 * c.radius);
      EXPECT_DOUBLE_EQ(st.guarantees[k++].lower_bound, c.lower_bound);
    }
  }
  EXPECT_EQ(r.classifier.support().size(), st.informative.size());
}

}  // namespace

TEST(Reliable, EmptyGuaranteesNeverReliable) {
  const auto spec = make_example1d(0.6);
  const Pool pool(1, {0.0, 1.0});
  const NeighborIndex index(pool);
  const BallMassOracle mass(spec, index);
  EXPECT_FALSE(reliable(pool[0], 1.0, 1.0, {}, pool, mass));
}

TEST(Reliable, GuaranteedPointIsReliableForItself) {
  const auto spec = make_example1d(0.6);
  const Pool pool(1, {0.0, 1.0});
  const NeighborIndex index(pool);
  const BallMassOracle mass(spec, index);
  const std::vector<Guarantee> g = {{1, 0.01}};
  EXPECT_TRUE(reliable(pool[1], 0.5, 3.0, g, pool, mass));
}

TEST(Reliable, NormalBallMassAgainstThreshold) {
  // threshold (0.4 / 64)^1 = 0.00625
  const auto spec = make_example1d(0.6);
  const Pool pool(1, {0.5, 0.5001, 0.6});
  const NeighborIndex index(pool);
  const BallMassOracle mass(spec, index);
  ASSERT_TRUE(mass.analytic());
  const std::vector<Guarantee> g = {{0, 0.4}};
  const double near = phi_cdf(0.5002) - phi_cdf(0.5);
  const double far = phi_cdf(0.7) - phi_cdf(0.5);
  ASSERT_LT(near, 0.00625);
  ASSERT_GT(far, 0.00625);
  EXPECT_TRUE(reliable(pool[1], 1.0, 1.0, g, pool, mass));
  EXPECT_FALSE(reliable(pool[2], 1.0, 1.0, g, pool, mass));
  // a smaller alpha shrinks the threshold to 0.00625^2
  EXPECT_FALSE(reliable(pool[1], 0.5, 1.0, g, pool, mass));
}

TEST(Reliable, EmpiricalRouteAgreesAwayFromThreshold) {
  const auto analytic = make_example1d(0.6, true);
  const auto counted = make_example1d(0.6, false);
  const auto pool = draw_pool(analytic, 100000, 3);
  const NeighborIndex index(pool);
  const BallMassOracle a(analytic, index), e(counted, index);
  ASSERT_FALSE(e.analytic());
  const std::vector<Guarantee> g = {{0, 0.4}};
  const double thr = 0.00625;
  int compared = 0;
  for (std::size_t i = 1; i < 2000; ++i) {
    const double r = std::abs(pool[i][0] - pool[0][0]);
    const double m = phi_cdf(pool[i][0] + r) - phi_cdf(pool[i][0] - r);
    if (m > 0.5 * thr && m < 2 * thr) continue;
    ++compared;
    EXPECT_EQ(reliable(pool[i], 1.0, 1.0, g, pool, a), reliable(pool[i], 1.0, 1.0, g, pool, e)) << i;
  }
  EXPECT_GT(compared, 1000);
}

TEST(ConfidentAdapt, CutoffOnDeterministicLabels) {
  // mean stays 1, so the cutoff fires at the first k with b(0.01, k) < 1/4.
  std::size_t expected = 1;
  while (oracle::radius(oracle::Real("0.01"), expected) >= oracle::Real("0.25")) ++expected;
  ASSERT_EQ(expected, 257u);

  Fixture f(make_constant(1.0, 1), 1000, 2);
  const auto res = confident_adapt(f.pool[0], 0.1, 10000, 0.01, f.index, f.oracle);
  ASSERT_GE(res.cap, expected);
  EXPECT_TRUE(res.stopped_by_cutoff);
  EXPECT_EQ(res.queried.size(), expected);
  EXPECT_EQ(res.label, 1);
  EXPECT_DOUBLE_EQ(res.lower_bound, 0.5 - confidence_radius(0.01, expected));
}

TEST(ConfidentAdapt, QueriesNearestFirst) {
  Fixture f(make_constant(1.0, 2), 300, 4);
  const auto res = confident_adapt(f.pool[5], 0.1, 40, 0.01, f.index, f.oracle);
  ASSERT_EQ(res.queried.size(), 40u);
  for (std::size_t k = 0; k < 40; ++k) EXPECT_EQ(res.queried[k].index, f.index.kth_neighbor(f.pool[5], k + 1));
  EXPECT_FALSE(res.stopped_by_cutoff);
}

TEST(ConfidentAdapt, BudgetOfOneAndZero) {
  Fixture f(make_constant(0.5, 1), 50, 1);
  const auto one = confident_adapt(f.pool[0], 0.1, 1, 0.01, f.index, f.oracle);
  EXPECT_EQ(one.queried.size(), 1u);
  EXPECT_LT(one.lower_bound, 0.0);
  const auto zero = confident_adapt(f.pool[0], 0.1, 0, 0.01, f.index, f.oracle);
  EXPECT_TRUE(zero.budget_exhausted);
  EXPECT_TRUE(zero.queried.empty());
  EXPECT_TRUE(std::isinf(zero.lower_bound));
}

TEST(ConfidentAdapt, StopsWhenPoolRunsOut) {
  Fixture f(make_constant(0.5, 1), 30, 1);
  const auto res = confident_adapt(f.pool[0], 0.1, 1000, 0.01, f.index, f.oracle);
  EXPECT_EQ(res.queried.size(), 30u);
}

TEST(ConfidentAdapt, RejectsBadDelta) {
  Fixture f(make_constant(0.5, 1), 5, 1);
  EXPECT_THROW(confident_adapt(f.pool[0], 0.1, 5, 0.5, f.index, f.oracle), InvalidArgument);
  EXPECT_THROW(confident_adapt(f.pool[0], 0.1, 5, 0.0, f.index, f.oracle), InvalidArgument);
}

TEST(ConfidentAdapt, PureNoiseRarelyCutsOff) {
  const double delta_s = 0.05;
  const auto spec = make_constant(0.5, 1);
  const auto pool = draw_pool(spec, 4000, 6);
  const NeighborIndex index(pool);
  int cut = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    Oracle oracle(spec, pool, 1000 + t);
    cut += confident_adapt(pool[t], 0.1, 4000, delta_s, index, oracle).stopped_by_cutoff;
  }
  EXPECT_LE(cut, delta_s * trials);
}

TEST(ConfidentAdapt, CorrectLabelWithHighProbability) {
  const double delta_s = 0.05;
  const auto spec = make_constant(0.8, 1);
  const auto pool = draw_pool(spec, 4000, 8);
  const NeighborIndex index(pool);
  int wrong = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    Oracle oracle(spec, pool, 5000 + t);
    const auto res = confident_adapt(pool[t], 0.1, 4000, delta_s, index, oracle);
    EXPECT_TRUE(res.stopped_by_cutoff);
    wrong += res.label != 1;
  }
  EXPECT_LE(wrong, 2 * delta_s * trials);
}

TEST(RunAkalls, SinglePointPool) {
  Fixture f(make_constant(0.5, 1), 1, 3);
  EngineParams p;
  const auto r = run_akalls(f.spec, f.pool, f.oracle, 1, p);
  EXPECT_LE(r.metrics.charged_requests, 1u);
  EXPECT_LE(r.classifier.support().size(), 1u);
  check_invariants(r, f.pool, 1, f.oracle);
}

TEST(RunAkalls, DeterministicLabelsGetBayesLabels) {
  Fixture f(make_threshold(1), 2000, 12);
  EngineParams p;
  p.epsilon = 0.25;
  const auto r = run_akalls(f.spec, f.pool, f.oracle, 4000, p);
  check_invariants(r, f.pool, 4000, f.oracle);
  ASSERT_FALSE(r.state.informative.empty());
  for (const auto& lp : r.state.informative) {
    EXPECT_EQ(lp.label, f.spec.bayes(f.pool[lp.index])) << f.pool[lp.index][0];
  }
}

TEST(RunAkalls, ConstantEtaOneLabelsEverythingOne) {
  Fixture f(make_constant(1.0, 2), 1500, 5);
  EngineParams p;
  p.epsilon = 0.3;
  const auto r = run_akalls(f.spec, f.pool, f.oracle, 3000, p);
  check_invariants(r, f.pool, 3000, f.oracle);
  ASSERT_FALSE(r.classifier.empty());
  for (std::size_t i = 0; i < f.pool.size(); i += 37) EXPECT_EQ(r.classifier(f.pool[i]), 1);
  for (const auto& lp : r.state.noisy) EXPECT_EQ(lp.label, 1);
}

TEST(RunAkalls, InvariantsOnRandomRuns) {
  std::mt19937_64 gen(99);
  const std::vector<std::string> problems = {"example1d:alpha=0.6", "radial2d:alpha=0.5", "threshold:dim=2",
                                             "constant:eta=0.9", "example1d:alpha=0.3,analytic=0"};
  for (int rep = 0; rep < 15; ++rep) {
    const auto spec = make_problem(problems[rep % problems.size()]);
    const std::size_t w = std::uniform_int_distribution<std::size_t>(1, 1500)(gen);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 3000)(gen);
    const auto pool = draw_pool(spec, w, gen());
    Oracle oracle(spec, pool, gen());
    EngineParams p;
    p.epsilon = std::uniform_real_distribution<double>(0.05, 0.45)(gen);
    p.delta = std::uniform_real_distribution<double>(0.01, 0.3)(gen);
    p.C = 2.0;
    SCOPED_TRACE(rep);
    check_invariants(run_akalls(spec, pool, oracle, n, p), pool, n, oracle);
  }
}

TEST(RunAkalls, DeterministicGivenSeeds) {
  const auto spec = make_problem("radial2d:alpha=0.5");
  const auto pool = draw_pool(spec, 1200, 31);
  Oracle o1(spec, pool, 7), o2(spec, pool, 7);
  EngineParams p;
  p.epsilon = 0.2;
  const auto a = run_akalls(spec, pool, o1, 2500, p);
  const auto b = run_akalls(spec, pool, o2, 2500, p);
  EXPECT_EQ(a.state, b.state);
  EXPECT_EQ(a.metrics, b.metrics);
}

TEST(RunAkalls, ExampleProblemRespectsBudget) {
  const auto spec = make_example1d(0.6);
  const auto pool = draw_pool(spec, 10000, 1);
  Oracle oracle(spec, pool, 2);
  EngineParams p;
  p.epsilon = 0.05;
  p.delta = 0.1;
  p.C = 1.0;
  const auto r = run_akalls(spec, pool, oracle, 2000, p);
  check_invariants(r, pool, 2000, oracle);
  EXPECT_EQ(r.metrics.levels.size(), 5u);
  for (const auto& lm : r.metrics.levels) EXPECT_EQ(lm.budget, 400u);
}

TEST(RunAkalls, RejectsBadArguments) {
  Fixture f(make_constant(0.5, 1), 10, 1);
  EngineParams p;
  EXPECT_THROW(run_akalls(f.spec, f.pool, f.oracle, 0, p), InvalidArgument);
  p.delta = 0.5;
  EXPECT_THROW(run_akalls(f.spec, f.pool, f.oracle, 10, p), InvalidArgument);
  p.delta = 0.1;
  p.epsilon = 0.0;
  EXPECT_THROW(run_akalls(f.spec, f.pool, f.oracle, 10, p), InvalidArgument);
}

TEST(OneNN, HandExamples) {
  const OneNNClassifier a(1, {{0.0}, {1.0}}, {0, 1});
  const double q[1] = {0.4};
  EXPECT_EQ(predict_1nn(a, q), 0);
  const OneNNClassifier b(1, {{-1.0}, {1.0}}, {0, 1});
  const double mid[1] = {0.0};
  EXPECT_EQ(predict_1nn(b, mid), 0);
  const OneNNClassifier c(1, {{1.0}, {-1.0}}, {1, 0});
  EXPECT_EQ(predict_1nn(c, mid), 1);
}

TEST(OneNN, EmptySupportThrows) {
  const OneNNClassifier f;
  const double q[1] = {0.0};
  EXPECT_TRUE(f.empty());
  EXPECT_THROW(f.predict(q), InvalidArgument);
}

TEST(OneNN, PoolSupportTiesByPoolIndex) {
  const Pool pool(1, {1.0, -1.0, 5.0});
  const OneNNClassifier f(pool, {{1, 0}, {0, 1}});
  const double q[1] = {0.0};
  EXPECT_EQ(f(q), 1);
}

TEST(PassiveKnn, FullPoolMajority) {
  Fixture f(make_constant(1.0, 1), 64, 1);
  const PassiveKnn knn(f.pool, f.oracle, 64, 64, 3);
  for (std::size_t i = 0; i < 64; i += 7) EXPECT_EQ(knn(f.pool[i]), 1);
}

TEST(PassiveKnn, KOneMatchesOneNN) {
  Fixture f(make_example1d(0.6), 300, 2);
  const PassiveKnn knn(f.pool, f.oracle, 300, 1, 5);
  std::vector<LabeledPoint> all;
  for (std::size_t i = 0; i < 300; ++i) all.push_back({i, f.oracle.query(i)});
  const OneNNClassifier nn(f.pool, all);
  for (double x = -3.0; x <= 3.0; x += 0.01) {
    const double q[1] = {x};
    EXPECT_EQ(knn(q), nn(q));
  }
}

TEST(PassiveKnn, RejectsBadArguments) {
  Fixture f(make_constant(0.5, 1), 10, 1);
  EXPECT_THROW(PassiveKnn(f.pool, f.oracle, 11, 1, 1), InvalidArgument);
  EXPECT_THROW(PassiveKnn(f.pool, f.oracle, 5, 6, 1), InvalidArgument);
  EXPECT_THROW(PassiveKnn(f.pool, f.oracle, 5, 0, 1), InvalidArgument);
}

TEST(PassiveKnn, DefaultK) {
  EXPECT_EQ(default_knn_k(100, 1, std::nullopt), 10u);
  EXPECT_EQ(default_knn_k(100, 1, 1.0), 22u);  // 100^{2/3} = 21.54
  EXPECT_EQ(default_knn_k(1, 3, 0.5), 1u);
}
