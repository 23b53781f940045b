#include "rulkit/evaluation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace rulkit;

namespace {

PredictionRecord rec(double truth, double pred, double lo, double hi, Method m = Method::adaptive_dnn,
                     int unit = 1, double t = 20) {
  PredictionRecord r;
  r.unit_id = unit;
  r.eval_time = t;
  r.true_rul = truth;
  r.predicted_rul = pred;
  r.ci_low = lo;
  r.ci_high = hi;
  r.method = m;
  return r;
}

}  // namespace

TEST(Rmse, Examples) {
  EXPECT_DOUBLE_EQ(rmse({rec(10, 10, 0, 0), rec(5, 5, 0, 0)}), 0.0);
  EXPECT_NEAR(rmse({rec(10, 13, 0, 0), rec(10, 6, 0, 0)}), std::sqrt(12.5), 1e-12);
  std::vector<PredictionRecord> r;
  for (int i = 0; i < 7; ++i) r.push_back(rec(i * 3.0, i * 3.0 - 2.5, 0, 0));
  EXPECT_NEAR(rmse(r), 2.5, 1e-12);
  EXPECT_THROW(rmse({}), std::invalid_argument);
}

TEST(Rmse, PermutationInvariant) {
  std::vector<PredictionRecord> r{rec(1, 4, 0, 0), rec(7, 2, 0, 0), rec(3, 3.5, 0, 0)};
  const double a = rmse(r);
  std::reverse(r.begin(), r.end());
  EXPECT_EQ(rmse(r), a);
}

TEST(Picp, Examples) {
  EXPECT_DOUBLE_EQ(picp({rec(5, 5, 0, 10), rec(5, 5, 5, 5)}), 1.0);
  EXPECT_DOUBLE_EQ(picp({rec(5, 5, 6, 10), rec(11, 5, 0, 10)}), 0.0);
  EXPECT_DOUBLE_EQ(picp({rec(1, 1, 0, 2), rec(2, 1, 0, 2), rec(3, 1, 0, 3), rec(9, 1, 0, 2)}), 0.75);
  EXPECT_THROW(picp({}), std::invalid_argument);
}

TEST(Mpiw, Examples) {
  EXPECT_DOUBLE_EQ(mpiw({rec(5, 5, 3, 3), rec(1, 1, 7, 7)}), 0.0);
  EXPECT_DOUBLE_EQ(mpiw({rec(5, 5, 0, 10), rec(5, 5, 10, 40)}), 20.0);
  std::vector<PredictionRecord> r{rec(5, 5, 0, 10), rec(5, 5, 10, 40)};
  for (auto& x : r) x.ci_high += 3.0;
  EXPECT_DOUBLE_EQ(mpiw(r), 23.0);
  EXPECT_THROW(mpiw({}), std::invalid_argument);
}

TEST(Metrics, WideningIntervalsIsMonotone) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 100), w(0, 30), a(1e-3, 10);
  std::uniform_int_distribution<int> n(1, 50);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<PredictionRecord> r;
    const int count = n(rng);
    for (int i = 0; i < count; ++i) {
      const double lo = u(rng);
      r.push_back(rec(u(rng), u(rng), lo, lo + w(rng)));
    }
    const double grow = a(rng);
    auto wider = r;
    for (auto& x : wider) {
      x.ci_low -= grow;
      x.ci_high += grow;
    }
    ASSERT_GE(picp(wider), picp(r));
    ASSERT_GT(mpiw(wider), mpiw(r));
  }
}

TEST(Comparison, SingleRecordEchoes) {
  const auto rows = comparison_table({rec(10, 14, 8, 20, Method::adaptive_wiener)});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].method, Method::adaptive_wiener);
  EXPECT_DOUBLE_EQ(rows[0].rmse, 4.0);
  EXPECT_DOUBLE_EQ(*rows[0].picp, 1.0);
  EXPECT_DOUBLE_EQ(*rows[0].mpiw, 12.0);
}

TEST(Comparison, PlainDnnHasNoInterval) {
  std::vector<PredictionRecord> r;
  for (Method m : kAllMethods) r.push_back(rec(10, 12, 5, 15, m));
  const auto rows = comparison_table(r);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& row : rows) {
    EXPECT_EQ(row.picp.has_value(), row.method != Method::dnn);
    EXPECT_EQ(row.mpiw.has_value(), row.method != Method::dnn);
  }
  std::ostringstream os;
  write_comparison(os, rows, 0.9);
  EXPECT_NE(os.str().find("PICP(90% CI)"), std::string::npos);
  std::ostringstream rows_os;
  write_comparison_rows(rows_os, rows);
  EXPECT_NE(rows_os.str().find("dnn\t1\t2\tNA\tNA"), std::string::npos);
}

TEST(Comparison, SameRecordsUnderTwoTagsGiveSameRow) {
  std::vector<PredictionRecord> r;
  for (int i = 0; i < 5; ++i) {
    r.push_back(rec(i, i + 1.5, i - 3, i + 2, Method::adaptive_wiener, i));
    r.push_back(rec(i, i + 1.5, i - 3, i + 2, Method::wiener, i));
  }
  const auto rows = comparison_table(r);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].rmse, rows[1].rmse);
  EXPECT_EQ(*rows[0].picp, *rows[1].picp);
  EXPECT_EQ(*rows[0].mpiw, *rows[1].mpiw);
}

TEST(Comparison, OrderingFlags) {
  const std::vector<PredictionRecord> r{rec(10, 11, 0, 20, Method::adaptive_dnn),
                                        rec(10, 12, 0, 20, Method::dnn),
                                        rec(10, 20, 0, 20, Method::adaptive_wiener)};
  const auto checks = ordering_checks(comparison_table(r));
  ASSERT_EQ(checks.size(), 4u);
  EXPECT_TRUE(checks[0].evaluated && checks[0].passed);
  EXPECT_TRUE(checks[1].evaluated && checks[1].passed);
  EXPECT_TRUE(checks[2].evaluated && checks[2].passed);
  EXPECT_FALSE(checks[3].evaluated);
}

TEST(PerCycle, BinsByAbsoluteCycle) {
  const std::vector<PredictionRecord> r{rec(10, 13, 0, 0, Method::dnn, 1, 20),
                                        rec(30, 26, 0, 0, Method::dnn, 2, 20),
                                        rec(9, 9, 0, 0, Method::dnn, 1, 21)};
  const auto rows = per_cycle_rmse(r);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].cycle, 20);
  EXPECT_EQ(rows[0].units, 2u);
  EXPECT_NEAR(rows[0].rmse, std::sqrt(12.5), 1e-12);
  EXPECT_EQ(rows[1].units, 1u);
  EXPECT_DOUBLE_EQ(rows[1].rmse, 0.0);
}

TEST(Records, RoundTrip) {
  std::vector<PredictionRecord> r{rec(10, 11.25, 3.5, 20.125, Method::adaptive_dnn, 7, 33),
                                  rec(0, 0.1, 0, 0.3, Method::wiener, 8, 120)};
  r[1].censored = true;
  std::stringstream ss;
  write_records(ss, r);
  const auto back = read_records(ss, "mem");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].predicted_rul, 11.25);
  EXPECT_EQ(back[0].ci_high, 20.125);
  EXPECT_EQ(back[1].method, Method::wiener);
  EXPECT_TRUE(back[1].censored);
  EXPECT_EQ(back[0].unit_id, 7);
}

TEST(Records, BadRowsReportLine) {
  std::istringstream is("unit\teval_time\ttrue_rul\tpredicted_rul\tci_low\tci_high\tmethod\tcensored\n"
                        "1\t20\t5\t5\t9\t3\tdnn\t0\n");
  try {
    read_records(is, "p.tsv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream bad_method("1\t20\t5\t5\t3\t9\tlstm\t0\n");
  EXPECT_THROW(read_records(bad_method, "p.tsv"), ParseError);
}

TEST(Methods, Names) {
  for (Method m : kAllMethods) EXPECT_EQ(parse_method(method_name(m)), m);
  EXPECT_THROW(parse_method("pf"), std::invalid_argument);
  EXPECT_TRUE(is_adaptive(Method::adaptive_wiener));
  EXPECT_FALSE(is_dnn(Method::wiener));
}
