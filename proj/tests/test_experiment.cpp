#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include <akalls/experiment.hpp>

using namespace akalls;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.problem = "example1d:alpha=0.6";
  c.budgets = {50, 100};
  c.pool_size = 400;
  c.trials = 2;
  c.base_seed = 11;
  c.engine.epsilon = 0.2;
  c.engine.C = 2.0;
  c.eval.method = RiskMethod::quadrature;
  c.eval.tol = 1e-9;
  return c;
}

std::string csv_of(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  write_csv(out, records, false);
  return out.str();
}

RunRecord record(std::size_t budget, std::size_t trial, const std::string& algo, double risk) {
  RunRecord r;
  r.config_hash = "abc";
  r.budget = budget;
  r.trial = trial;
  r.seed = 7;
  r.algo = algo;
  r.excess_risk = risk;
  r.std_error = 0.0;
  return r;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST(RunExperiment, OneCellGivesOneRecordPerAlgorithm) {
  auto c = small_config();
  c.budgets = {50};
  c.trials = 1;
  const auto records = run_experiment(c);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].algo, "akalls");
  EXPECT_EQ(records[1].algo, "passive_knn");
  for (const auto& r : records) {
    EXPECT_FALSE(r.failed) << r.error;
    EXPECT_EQ(r.budget, 50u);
    EXPECT_GE(r.excess_risk, 0.0);
    EXPECT_LE(r.charged_requests, 50u);
    EXPECT_EQ(r.config_hash, config_hash(c));
  }
}

TEST(RunExperiment, ReproducibleAndThreadIndependent) {
  auto c = small_config();
  const auto a = run_experiment(c);
  const auto b = run_experiment(c);
  c.threads = 3;
  const auto p = run_experiment(c);
  EXPECT_EQ(csv_of(a), csv_of(b));
  EXPECT_EQ(csv_of(a), csv_of(p));
  EXPECT_EQ(a.size(), 8u);
}

TEST(RunExperiment, TrialSeedsDiffer) {
  EXPECT_NE(trial_seed(1, 50, 0), trial_seed(1, 50, 1));
  EXPECT_NE(trial_seed(1, 50, 0), trial_seed(1, 100, 0));
  EXPECT_NE(trial_seed(1, 50, 0), trial_seed(2, 50, 0));
}

TEST(RunExperiment, FailedBaselineIsRecorded) {
  const auto dir = std::filesystem::temp_directory_path() / "akalls_test_small_pool";
  std::filesystem::create_directories(dir);
  const auto csv = dir / "pool.csv";
  {
    std::ofstream out(csv);
    for (int i = 0; i < 20; ++i) out << (i - 10) * 0.1 << '\n';
  }
  auto c = small_config();
  c.pool_csv = csv.string();
  c.budgets = {30};
  c.trials = 1;
  const auto records = run_experiment(c);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_FALSE(records[0].failed) << records[0].error;
  EXPECT_EQ(records[0].pool_size, 20u);
  EXPECT_TRUE(records[1].failed);
  EXPECT_FALSE(records[1].error.empty());
  std::filesystem::remove_all(dir);
}

TEST(Config, ParsesFlatKeys) {
  std::istringstream in(R"({"problem": "threshold:dim=1", "budgets": [10, 20], "trials": 3,
    "engine.epsilon": 0.1, "engine.C": 1.5, "baseline.k": 5, "eval.method": "mc", "eval.m": 1000,
    "threads": 2})");
  const auto c = parse_config(in);
  EXPECT_EQ(c.problem, "threshold:dim=1");
  EXPECT_EQ(c.budgets, (std::vector<std::size_t>{10, 20}));
  EXPECT_EQ(c.trials, 3u);
  EXPECT_DOUBLE_EQ(c.engine.epsilon, 0.1);
  EXPECT_EQ(c.baseline.k_rule, "5");
  EXPECT_EQ(c.eval.method, RiskMethod::monte_carlo);
  EXPECT_EQ(c.threads, 2u);
}

TEST(Config, RejectsBadInput) {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
  };
  EXPECT_THROW(parse(R"({"budgets": [10, 10]})"), ConfigError);
  EXPECT_THROW(parse(R"({"budgets": [20, 10]})"), ConfigError);
  EXPECT_THROW(parse(R"({"budgets": []})"), ConfigError);
  EXPECT_THROW(parse(R"({"bogus": 1})"), ConfigError);
  EXPECT_THROW(parse(R"({"engine.delta": 0.9})"), ConfigError);
  EXPECT_THROW(parse(R"({"problem": "radial2d:alpha=0.5"})"), ConfigError);  // quadrature needs d = 1
  EXPECT_THROW(parse(R"({"baseline.k": "many"})"), ConfigError);
  EXPECT_THROW(parse("{not json"), ConfigError);
}

TEST(Config, HashIgnoresThreads) {
  auto a = small_config();
  auto b = a;
  b.threads = 8;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.trials = 3;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, PoolSizeRule) {
  ExperimentConfig c;
  const auto spec = make_problem(c.problem);
  c.pool_size = 0;
  const double a = 0.6, b = kExample1dFittedBeta;
  const auto expected = static_cast<std::size_t>(std::ceil(std::pow(1000.0, (2 * a + 1) / (2 * a + 1 - a * b))));
  EXPECT_EQ(pool_size_for(c, spec, 1000), expected);
  c.pool_size = 123;
  EXPECT_EQ(pool_size_for(c, spec, 1000), 123u);
}

TEST(Records, CsvRoundTrip) {
  const auto records = run_experiment(small_config());
  std::ostringstream out;
  write_csv(out, records);
  std::istringstream in(out.str());
  const auto back = read_csv(in);
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(back[i].budget, records[i].budget);
    EXPECT_EQ(back[i].seed, records[i].seed);
    EXPECT_EQ(back[i].algo, records[i].algo);
    EXPECT_EQ(back[i].s_size, records[i].s_size);
    EXPECT_EQ(back[i].excess_risk, records[i].excess_risk);
  }
  EXPECT_EQ(csv_of(back), csv_of(records));
}

TEST(Records, JsonRoundTrip) {
  const auto c = small_config();
  const auto records = run_experiment(c);
  std::ostringstream out;
  write_json(out, records, c);
  std::istringstream in(out.str());
  const auto back = read_json(in);
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(back[i].level_sizes, records[i].level_sizes);
    EXPECT_EQ(back[i].fallback, records[i].fallback);
    EXPECT_EQ(back[i].excess_risk, records[i].excess_risk);
    EXPECT_EQ(back[i].max_request_cap, records[i].max_request_cap);
  }
}

TEST(Records, CsvRejectsMalformed) {
  std::istringstream bad_header("a,b\n");
  EXPECT_THROW(read_csv(bad_header), ConfigError);
  std::istringstream short_row(std::string(kCsvHeader) + "\n1,2,3\n");
  EXPECT_THROW(read_csv(short_row), ConfigError);
}

TEST(Summary, MediansPerBudget) {
  std::vector<RunRecord> rs = {record(10, 0, "akalls", 0.4), record(10, 1, "akalls", 0.2),
                               record(10, 2, "akalls", 0.3), record(20, 0, "akalls", 0.1)};
  rs.push_back(record(20, 1, "akalls", 0.0));
  rs.back().failed = true;
  const auto s = summarize(rs, "akalls");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s[0].median_excess_risk, 0.3);
  EXPECT_EQ(s[1].failed, 1u);
  EXPECT_DOUBLE_EQ(s[1].median_excess_risk, 0.1);
  const auto fit = fit_medians(s);
  ASSERT_TRUE(fit);
  EXPECT_NEAR(fit->slope, std::log(0.1 / 0.3) / std::log(2.0), 1e-12);
}

TEST(Report, SvgReferenceLines) {
  const std::vector<RunRecord> rs = {record(100, 0, "akalls", 0.1), record(400, 0, "akalls", 0.05),
                                     record(100, 0, "passive_knn", 0.2), record(400, 0, "passive_knn", 0.1)};
  std::ostringstream with, without;
  write_svg(with, rs, theoretical_slope(0.6, kExample1dFittedBeta, 1));
  write_svg(without, rs);
  EXPECT_EQ(count_of(with.str(), "class=\"reference-line\""), 2u);
  EXPECT_EQ(count_of(without.str(), "class=\"reference-line\""), 1u);
  EXPECT_EQ(count_of(with.str(), "class=\"series\""), 2u);
  EXPECT_NE(with.str().find("data-kind=\"theoretical\""), std::string::npos);
  EXPECT_EQ(with.str().rfind("<svg", 0), 0u);
}

TEST(Report, EmitFormatsAndErrors) {
  const std::vector<RunRecord> rs = {record(100, 0, "akalls", 0.1)};
  std::ostringstream csv, json;
  emit_report(csv, rs, ReportFormat::csv);
  emit_report(json, rs, ReportFormat::json);
  EXPECT_EQ(csv.str().rfind(kCsvHeader, 0), 0u);
  EXPECT_NE(json.str().find("\"records\""), std::string::npos);
  std::ostringstream sink;
  EXPECT_THROW(emit_report(sink, {}, ReportFormat::svg), InvalidArgument);
  EXPECT_THROW(parse_format("pdf"), ConfigError);
}
