#include "rulkit/drift.hpp"
#include "support/drift_oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace rulkit;

namespace {

PatternCurve<double> linear_q(double t_end, double slope, Eigen::Index nodes) {
  VectorXd t = VectorXd::LinSpaced(nodes, 0.0, t_end);
  return PatternCurve<double>(t, slope * t);
}

VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

TEST(JointMoments, NoDriftUncertainty) {
  auto seg = linear_q(3, 0.2, 4);
  auto jm = joint_moments(DriftPosterior<double>{1.0, 0.0, 0.0}, seg, NoiseParams<double>{0, 1e-4, 1}, 0.5);
  EXPECT_EQ(jm.cov(0, 0), 0.0);
  EXPECT_EQ(jm.cov(0, 1), 0.0);
  EXPECT_NEAR(jm.cov(1, 1), 3e-4, 1e-18);
  EXPECT_NEAR(jm.mean[1], 0.5 + 0.6, 1e-15);
  EXPECT_EQ(jm.t, 3.0);
}

TEST(JointMoments, LinearUnitInterval) {
  auto seg = linear_q(1, 1.0, 2);
  auto jm = joint_moments(DriftPosterior<double>{}, seg, NoiseParams<double>{1, 0, 1}, 0.0);
  EXPECT_DOUBLE_EQ(jm.cov(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(jm.cov(1, 0), 0.5);
  EXPECT_NEAR(jm.cov(1, 1), 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(jm.cov(0, 0), 1.0);
}

TEST(JointMoments, FlatSegmentLeavesPosteriorAtPrior) {
  VectorXd t(3), q(3);
  t << 4, 5, 6;
  q << 0.3, 0.3, 0.3;
  DriftPosterior<double> prior{1.2, 0.04, 4};
  auto jm = joint_moments(prior, PatternCurve<double>(t, q), NoiseParams<double>{0, 1e-3, 1}, 0.3);
  EXPECT_EQ(jm.cov(0, 1), 0.0);
  auto post = posterior_update(prior, 0.37, jm);
  EXPECT_EQ(post.psi, prior.psi);
  EXPECT_EQ(post.omega_sq, prior.omega_sq);
  EXPECT_EQ(post.t_last, 6.0);
}

TEST(JointMoments, SymmetricPositiveSemidefinite) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 12);
    VectorXd t(n), q(n);
    t[0] = 10 * u(rng);
    q[0] = u(rng) - 0.5;
    for (int j = 1; j < n; ++j) {
      t[j] = t[j - 1] + 0.01 + 3 * u(rng);
      q[j] = q[j - 1] + (u(rng) - 0.3);
    }
    NoiseParams<double> np{u(rng) * 1e-2, u(rng) * 1e-3, 1};
    DriftPosterior<double> prior{u(rng) * 2, u(rng) * 0.1, t[0]};
    auto jm = joint_moments(prior, PatternCurve<double>(t, q), np, 0.0);
    EXPECT_EQ(jm.cov(0, 1), jm.cov(1, 0));
    EXPECT_GE(jm.cov(0, 0), 0.0);
    EXPECT_GE(jm.cov(1, 1), 0.0);
    EXPECT_GE(jm.cov.determinant(), -1e-12);
  }
}

TEST(PosteriorUpdate, ZeroResidualKeepsMeanAndContracts) {
  auto seg = linear_q(5, 0.1, 6);
  DriftPosterior<double> prior{1.1, 0.02, 0};
  NoiseParams<double> np{1e-3, 1e-4, 1};
  auto jm = joint_moments(prior, seg, np, 0.2);
  auto post = posterior_update(prior, jm.mean[1], jm);
  EXPECT_EQ(post.psi, prior.psi);
  EXPECT_LT(post.omega_sq, jm.cov(0, 0));
}

TEST(PosteriorUpdate, UncorrelatedCaseIsPureDiffusion) {
  JointMoments<double> jm;
  jm.mean << 0.9, 2.0;
  jm.cov << 0.03, 0.0, 0.0, 0.5;
  auto post = posterior_update(DriftPosterior<double>{0.9, 0.01, 0}, 2.7, jm);
  EXPECT_EQ(post.psi, 0.9);
  EXPECT_EQ(post.omega_sq, 0.03);
}

TEST(PosteriorUpdate, ScalarKalmanHandExample) {
  auto seg = linear_q(1, 1.0, 2);
  DriftPosterior<double> prior{1.0, 0.01, 0};
  auto jm = joint_moments(prior, seg, NoiseParams<double>{0, 0.01, 1}, 0.0);
  auto post = posterior_update(prior, jm.mean[1] + 0.1, jm);
  EXPECT_NEAR(post.psi, 1.05, 1e-15);
  EXPECT_NEAR(post.omega_sq, 0.005, 1e-15);
}

TEST(PosteriorUpdate, RejectsDegenerateObservation) {
  auto seg = linear_q(1, 1.0, 2);
  auto jm = joint_moments(DriftPosterior<double>{}, seg, NoiseParams<double>{0, 0, 1}, 0.0);
  EXPECT_THROW(posterior_update(DriftPosterior<double>{}, 1.0, jm), std::invalid_argument);
}

TEST(UpdateSchedule, Examples) {
  EXPECT_EQ(update_schedule(55), (std::vector<int>{20, 30, 40, 50}));
  EXPECT_TRUE(update_schedule(15).empty());
  auto all = update_schedule(7, 1, 0);
  EXPECT_EQ(all, (std::vector<int>{1, 2, 3, 4, 5, 6, 7}));
  EXPECT_THROW(update_schedule(10, 0, 0), std::invalid_argument);
}

TEST(FilterDrift, MatchesTextbookKalmanWithoutProcessNoise) {
  const double slope = 0.02, eta_sq = 4e-4;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::vector<double> t(11);
    for (int i = 0; i <= 10; ++i) t[static_cast<std::size_t>(i)] = 3.0 * i;
    auto full = oracle::fixed_drift_record(1.3, slope, eta_sq, 30, seed);
    std::vector<double> z;
    for (double ti : t) z.push_back(full[static_cast<std::size_t>(ti)]);
    auto trace = filter_drift(linear_q(30, slope, 31), to_vec(t), to_vec(z),
                              NoiseParams<double>{0, eta_sq, 1}, DriftPosterior<double>{1.0, 0.05, 0});
    auto ref = oracle::kalman(slope, t, z, 0, eta_sq, {1.0, 0.05});
    ASSERT_EQ(trace.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_NEAR(trace[i].psi, ref[i].mean, 1e-12);
      EXPECT_NEAR(trace[i].omega_sq, ref[i].var, 1e-12);
    }
  }
}

TEST(FilterDrift, MatchesCorrelatedNoiseKalmanWithProcessNoise) {
  const double slope = 0.05, eta_sq = 1e-4, gamma_sq = 2e-3;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::vector<double> t(11);
    for (int i = 0; i <= 10; ++i) t[static_cast<std::size_t>(i)] = 2.0 * i;
    auto full = oracle::fixed_drift_record(0.8, slope, eta_sq, 20, seed);
    std::vector<double> z;
    for (double ti : t) z.push_back(full[static_cast<std::size_t>(ti)]);
    auto trace = filter_drift(linear_q(20, slope, 21), to_vec(t), to_vec(z),
                              NoiseParams<double>{gamma_sq, eta_sq, 1}, DriftPosterior<double>{});
    auto ref = oracle::kalman(slope, t, z, gamma_sq, eta_sq, {1.0, 0.0});
    for (std::size_t i = 0; i < ref.size(); ++i) {
      EXPECT_NEAR(trace[i].psi, ref[i].mean, 1e-12);
      EXPECT_NEAR(trace[i].omega_sq, ref[i].var, 1e-12);
    }
  }
}

TEST(FilterDrift, MatchesBatchConditioningOnWholeRecord) {
  const double slope = 0.03, eta_sq = 2e-4, gamma_sq = 1e-3;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 4.0);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::vector<double> t{0.0};
    for (int i = 0; i < 10; ++i) t.push_back(t.back() + u(rng));
    std::vector<double> z{0.1};
    std::normal_distribution<double> n01;
    for (std::size_t i = 1; i < t.size(); ++i)
      z.push_back(z.back() + 1.2 * slope * (t[i] - t[i - 1]) + 0.02 * n01(rng));
    auto trace = filter_drift(linear_q(t.back(), slope, 2), to_vec(t), to_vec(z),
                              NoiseParams<double>{gamma_sq, eta_sq, 1},
                              DriftPosterior<double>{0.9, 0.02, 0});
    auto ref = oracle::batch_posterior(slope, t, z, gamma_sq, eta_sq, {0.9, 0.02});
    EXPECT_NEAR(trace.back().psi, ref.mean, 1e-9 * std::abs(ref.mean));
    EXPECT_NEAR(trace.back().omega_sq, ref.var, 1e-9 * ref.var);
  }
}

TEST(FilterDrift, VarianceContractsOnEveryUpdate) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 20);
    VectorXd t(n), q(n), z(n);
    t[0] = 0;
    q[0] = 0;
    z[0] = u(rng);
    for (int j = 1; j < n; ++j) {
      t[j] = t[j - 1] + 0.1 + 5 * u(rng);
      q[j] = q[j - 1] + u(rng) - 0.2;
      z[j] = z[j - 1] + 0.1 * (u(rng) - 0.4);
    }
    PatternCurve<double> pattern(t, q);
    NoiseParams<double> np{1e-3 * u(rng), 1e-4 + 1e-3 * u(rng), 1};
    DriftPosterior<double> prior{1.0, 0.1 * u(rng), 0};
    for (int j = 1; j < n; ++j) {
      auto jm = joint_moments(prior, pattern.slice(t[j - 1], t[j]), np, z[j - 1]);
      prior = posterior_update(prior, z[j], jm);
      EXPECT_LE(prior.omega_sq, jm.cov(0, 0));
      EXPECT_GE(prior.omega_sq, 0.0);
    }
  }
}

TEST(FilterDrift, SplittingIntervalIsInvariantWithoutProcessNoise) {
  const double slope = 0.01;
  auto pattern = linear_q(40, slope, 81);
  NoiseParams<double> np{0, 1e-4, 1};
  DriftPosterior<double> prior{1.0, 0.03, 0};
  auto z = oracle::fixed_drift_record(1.4, slope, 1e-4, 40, 17);
  VectorXd t1(2), z1(2), t2(3), z2(3);
  t1 << 0, 40;
  z1 << z[0], z[40];
  t2 << 0, 25, 40;
  z2 << z[0], z[25], z[40];
  auto one = filter_drift(pattern, t1, z1, np, prior).back();
  auto two = filter_drift(pattern, t2, z2, np, prior).back();
  EXPECT_NEAR(one.psi, two.psi, 1e-12);
  EXPECT_NEAR(one.omega_sq, two.omega_sq, 1e-12);
}

TEST(FilterDrift, CoversFixedTrueDrift) {
  const double slope = 0.01, truth = 1.5;
  auto pattern = linear_q(100, slope, 101);
  NoiseParams<double> np{5e-4, 1e-5, 1};
  auto sched = update_schedule(100);
  VectorXd t(static_cast<Eigen::Index>(sched.size()) + 1);
  t[0] = 0;
  for (std::size_t i = 0; i < sched.size(); ++i) t[static_cast<Eigen::Index>(i) + 1] = sched[i];
  int covered = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto full = oracle::fixed_drift_record(truth, slope, 1e-5, 100, seed);
    VectorXd z(t.size());
    for (Eigen::Index i = 0; i < t.size(); ++i) z[i] = full[static_cast<std::size_t>(t[i])];
    auto post = filter_drift(pattern, t, z, np, DriftPosterior<double>{}).back();
    EXPECT_EQ(post.t_last, 100.0);
    EXPECT_LT(std::abs(post.psi - truth), 0.2);
    if (std::abs(post.psi - truth) <= 1.959963984540054 * std::sqrt(post.omega_sq)) ++covered;
  }
  EXPECT_GE(covered, 90);
}
