#include "rulkit/checkpoint.hpp"
#include "rulkit/synthetic.hpp"
#include "rulkit/trajectory_net.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

using namespace rulkit;

namespace {

std::shared_ptr<Track> series(Eigen::Index n, double slope = 0.01, double noise = 0.0,
                              std::uint64_t seed = 1) {
  auto s = std::make_shared<Track>();
  s->t = VectorXd::LinSpaced(n, 1.0, static_cast<double>(n));
  s->z = slope * s->t;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  for (Eigen::Index i = 0; i < n; ++i) s->z[i] += noise * n01(rng);
  return s;
}

NetConfig tiny_config() {
  NetConfig cfg;
  cfg.hidden_dim = 4;
  cfg.horizon = 6;
  cfg.conv_filters = {3, 4};
  cfg.kernel_sizes = {3, 3};
  cfg.dropout_p = 0.0;
  return cfg;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST(TrainingPairs, WindowCounts) {
  EXPECT_EQ(make_training_pairs(series(5), 4, 1).size(), 1u);
  auto pairs = make_training_pairs(series(10), 4, 3);
  ASSERT_EQ(pairs.size(), 6u);
  EXPECT_EQ(pairs.front().n_targets(), 3);
  EXPECT_LT(pairs.back().n_targets(), 3);
  EXPECT_EQ(pairs.back().n_targets(), 1);
  EXPECT_TRUE(make_training_pairs(series(3), 4, 3).empty());
  EXPECT_EQ(make_training_pairs(series(10), 4, 3, 2).size(), 3u);
}

TEST(TrainingPairs, TargetsFollowHistory) {
  auto pairs = make_training_pairs(series(10), 4, 3);
  const auto& p = pairs[2];
  EXPECT_EQ(p.history_len(), 6);
  EXPECT_EQ(p.anchor_time(), 6.0);
  EXPECT_EQ(p.future_times()[0], 7.0);
  EXPECT_EQ(p.future_values().size(), 3);
  EXPECT_GT(p.future_times()[0], p.history_times()[p.history_len() - 1]);
}

TEST(TrainingPairs, VarianceBasisMatchesDegradationRules) {
  auto s = series(30, 0.02, 0.01, 4);
  auto pairs = make_training_pairs(s, 10, 8);
  const NoiseParams<double> np{5e-4, 1e-4, 1};
  for (const auto& p : pairs) {
    const double var0 = np.gamma_sq * p.drift_basis()[0] + np.eta_b_sq * p.noise_basis()[0];
    EXPECT_NEAR(var0, variance_onestep(p.increment(0), np), 1e-18);
    const Eigen::Index first = p.history_len() - 1;
    PatternCurve<double> observed(s->t.segment(first, p.n_targets() + 1),
                                  s->z.segment(first, p.n_targets() + 1));
    auto xi = variance_profile(observed, np, observed.front_time());
    for (Eigen::Index j = 0; j < p.n_targets(); ++j) {
      const double var = np.gamma_sq * p.drift_basis()[j] + np.eta_b_sq * p.noise_basis()[j];
      EXPECT_NEAR(var, xi.values()[j + 1], 1e-15);
      EXPECT_DOUBLE_EQ(p.noise_basis()[j], p.future_times()[j] - p.anchor_time());
    }
  }
}

TEST(TrainingPairs, NearTargetsWeighMoreOnMonotonePaths) {
  auto s = series(40, 0.01, 0.0);
  for (Eigen::Index i = 1; i < s->z.size(); ++i) s->z[i] = s->z[i - 1] + 0.001 * (1 + (i % 3));
  const NoiseParams<double> np{2e-3, 1e-5, 1};
  for (const auto& p : make_training_pairs(s, 5, 20)) {
    for (Eigen::Index j = 1; j < p.n_targets(); ++j) {
      const double w_near = 1 / (np.gamma_sq * p.drift_basis()[j - 1] + np.eta_b_sq * p.noise_basis()[j - 1]);
      const double w_far = 1 / (np.gamma_sq * p.drift_basis()[j] + np.eta_b_sq * p.noise_basis()[j]);
      EXPECT_GE(w_near, w_far);
    }
  }
}

TEST(Forward, ZeroWeightsGiveConstantAnchoredCurve) {
  NetConfig cfg;
  TrajectoryModel model(cfg, 100.0);
  auto s = series(20);
  VectorXd future = VectorXd::LinSpaced(10, 21, 30);
  const VectorXd raw = decode(model, encode(model, s->t, s->z).col(19), 20.0, future);
  EXPECT_EQ(raw, VectorXd::Zero(11));
  auto q = forward(model, s->t, s->z, future);
  EXPECT_EQ(q.size(), 11);
  for (Eigen::Index j = 0; j < q.size(); ++j) EXPECT_EQ(q.values()[j], s->z[19]);
  auto scaled = forward(model, s->t, s->z, future, 0.5);
  EXPECT_EQ(scaled.values()[0], 2 * s->z[19]);
}

TEST(Forward, DeterministicAtInference) {
  NetConfig cfg;
  auto model = TrajectoryModel::initialized(cfg, 100.0, 3);
  auto s = series(25, 0.01, 0.01);
  VectorXd future = VectorXd::LinSpaced(50, 26, 75);
  auto a = forward(model, s->t, s->z, future);
  auto b = forward(model, s->t, s->z, future);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_EQ(a.values()[0], s->z[24]);
}

TEST(Forward, OutputDoesNotDependOnRequestedLength) {
  auto model = TrajectoryModel::initialized(NetConfig{}, 80.0, 5);
  auto s = series(25, 0.01, 0.01);
  VectorXd full = VectorXd::LinSpaced(50, 26, 75);
  auto a = forward(model, s->t, s->z, full);
  auto b = forward(model, s->t, s->z, full.head(10));
  for (Eigen::Index j = 0; j < b.size(); ++j) EXPECT_DOUBLE_EQ(a.values()[j], b.values()[j]);
}

TEST(Forward, RejectsBadFutureTimes) {
  auto model = TrajectoryModel::initialized(NetConfig{}, 80.0, 5);
  auto s = series(25);
  VectorXd bad(3);
  bad << 26, 28, 27;
  EXPECT_THROW(forward(model, s->t, s->z, bad), std::invalid_argument);
  VectorXd before(2);
  before << 25, 26;
  EXPECT_THROW(forward(model, s->t, s->z, before), std::invalid_argument);
  EXPECT_THROW(forward(model, s->t, s->z, VectorXd::LinSpaced(51, 26, 76)), std::invalid_argument);
}

TEST(NllLoss, TermExamples) {
  EXPECT_EQ(nll_term(0.0, 1.0), 0.0);
  EXPECT_EQ(nll_term(1.0, 1.0), 0.5);
  const double r = 0.7, v = 0.3;
  const double data = 0.5 * r * r / v, logt = 0.5 * std::log(v);
  EXPECT_NEAR(nll_term(r, 2 * v), data / 2 + logt + 0.5 * std::log(2.0), 1e-15);
  EXPECT_THROW(nll_term(1.0, 0.0), std::invalid_argument);
}

TEST(NllLoss, BatchLossAgreesWithCurveLoss) {
  auto model = TrajectoryModel::initialized(NetConfig{}, 60.0, 9);
  model.set_noise({3e-4, 2e-5, 1});
  auto s = series(60, 0.01, 0.005);
  for (const auto& p : make_training_pairs(s, 10, 50, 7)) {
    auto curve = forward(model, p.history_times(), p.history_values(), p.future_times());
    EXPECT_NEAR(batch_loss(model, {&p}), nll_loss(curve, p, model.noise()), 1e-12);
  }
}

TEST(GradCheck, AnalyticMatchesFiniteDifferences) {
  auto cfg = tiny_config();
  auto model = TrajectoryModel::initialized(cfg, 30.0, 11);
  model.set_noise({4e-4, 5e-5, 1});
  ASSERT_LE(model.n_params(), 2000);
  auto s = series(30, 0.015, 0.01, 2);
  auto pairs = make_training_pairs(s, 12, 6, 5);
  for (const auto& p : pairs) {
    auto report = grad_check(model, p, 1e-5);
    EXPECT_TRUE(report.passed()) << "rel " << report.max_rel_error << " abs " << report.max_abs_error
                                 << " worst " << report.worst_block;
    EXPECT_GE(report.abs_compared, 1);
  }
}

TEST(GradCheck, VarianceBranchAndDeadHeadBias) {
  auto model = TrajectoryModel::initialized(tiny_config(), 30.0, 12);
  model.set_noise({1e-3, 1e-4, 1});
  auto s = series(30, 0.02, 0.02, 3);
  TrainingPair p(s, 15, 6);
  VectorXd g;
  batch_loss(model, {&p}, &g);
  const auto& layout = model.layout();
  EXPECT_NEAR(g[layout.find("decoder.head.bias").offset], 0.0, 1e-12);
  EXPECT_NE(g[layout.find("variance.log_gamma_sq").offset], 0.0);
  EXPECT_NE(g[layout.find("variance.log_eta_b_sq").offset], 0.0);
  EXPECT_TRUE(grad_check(model, p).passed());
}

TEST(GradCheck, CorruptedGradientFails) {
  auto model = TrajectoryModel::initialized(tiny_config(), 30.0, 13);
  model.set_noise({1e-3, 1e-4, 1});
  auto s = series(30, 0.02, 0.02, 5);
  TrainingPair p(s, 15, 6);
  VectorXd g;
  batch_loss(model, {&p}, &g);
  VectorXd numeric = g;
  EXPECT_TRUE(compare_gradients(g, numeric, model.layout()).passed());
  const auto idx = model.layout().find("encoder.w_h").offset + 2;
  VectorXd bad = g;
  bad[idx] *= 1.01;
  if (bad[idx] == g[idx]) bad[idx] = 1e-3;
  auto report = compare_gradients(bad, numeric, model.layout());
  EXPECT_FALSE(report.passed());
  EXPECT_EQ(report.worst_block, "encoder.w_h");
  VectorXd dead = g;
  dead[model.layout().find("decoder.head.bias").offset] = 1e-6;
  EXPECT_FALSE(compare_gradients(dead, numeric, model.layout()).passed());
}

TEST(Train, ReproducibleGivenSeed) {
  auto cfg = tiny_config();
  cfg.epochs = 3;
  cfg.dropout_p = 0.2;
  std::vector<TrainingPair> pairs;
  for (std::uint64_t k = 0; k < 4; ++k)
    for (auto& p : make_training_pairs(series(40, 0.01, 0.005, k), 5, 6, 3)) pairs.push_back(p);
  auto a = train(pairs, cfg, 21);
  auto b = train(pairs, cfg, 21);
  auto c = train(pairs, cfg, 22);
  EXPECT_EQ(a.params(), b.params());
  EXPECT_NE(a.params(), c.params());
  EXPECT_EQ(a.cycle_scale(), 40.0);
}

TEST(Train, RejectsEmptyInput) {
  EXPECT_THROW(train({}, NetConfig{}, 1), std::invalid_argument);
}

TEST(Train, DivergenceAborts) {
  auto cfg = tiny_config();
  cfg.learning_rate = 1e300;
  cfg.clip_norm = 1e300;
  cfg.epochs = 5;
  auto pairs = make_training_pairs(series(30, 0.01, 0.01), 5, 6);
  EXPECT_THROW(train(pairs, cfg, 1), TrainingDiverged);
}

// Noiseless Z(t) = 0.01 t: the learned curve tracks the line and the epoch
// loss falls in its 10-epoch moving average.
TEST(Train, LearnsNoiselessLine) {
  NetConfig cfg;
  cfg.horizon = 10;
  cfg.dropout_p = 0.0;
  cfg.epochs = 60;
  cfg.batch_size = 16;
  std::vector<TrainingPair> pairs;
  for (Eigen::Index n : {60, 70, 80, 90, 100})
    for (auto& p : make_training_pairs(series(n), 5, 10, 2)) pairs.push_back(p);
  TrainReport report;
  auto model = train(pairs, cfg, 7, &report);

  ASSERT_EQ(report.epoch_loss.size(), 60u);
  std::vector<double> avg;
  for (std::size_t e = 9; e < report.epoch_loss.size(); ++e) {
    double s = 0;
    for (std::size_t k = e - 9; k <= e; ++k) s += report.epoch_loss[k];
    avg.push_back(s / 10);
  }
  for (std::size_t k = 10; k < avg.size(); k += 10) EXPECT_LE(avg[k], avg[k - 10]);

  auto s = series(100);
  for (Eigen::Index len : {20, 50, 80}) {
    VectorXd future = s->t.segment(len, 10);
    auto q = forward(model, s->t.head(len), s->z.head(len), future);
    for (Eigen::Index j = 0; j < 10; ++j)
      EXPECT_LE(std::abs(q.values()[j + 1] - s->z[len + j]) / s->z[len + j], 0.05)
          << "history " << len << " step " << j;
  }
}

TEST(Train, RecoversVarianceOnSmallSample) {
  auto pairs = linear_model_pairs(120, 30, 50, 0.01, {5e-4, 1e-5, 1}, 3);
  NetConfig cfg;
  cfg.dropout_p = 0.0;
  cfg.epochs = 20;
  cfg.batch_size = 16;
  auto np = train(pairs, cfg, 3).noise();
  EXPECT_NEAR(np.gamma_sq / 5e-4, 1.0, 0.5);
  EXPECT_NEAR(np.eta_b_sq / 1e-5, 1.0, 0.5);
  EXPECT_EQ(np.phi0, 1.0);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto cfg = tiny_config();
  cfg.horizon = 9;
  auto model = TrajectoryModel::initialized(cfg, 123.456789012345678, 31);
  model.set_noise({6.36e-4, 6.41e-6, 1});
  const auto path = temp_path("rulkit_ckpt_test.bin");
  save_checkpoint(path, model, {{"seed", 31}});
  auto loaded = load_checkpoint(path);
  ASSERT_EQ(loaded.model.n_params(), model.n_params());
  EXPECT_EQ(std::memcmp(loaded.model.params().data(), model.params().data(),
                        sizeof(double) * static_cast<std::size_t>(model.n_params())),
            0);
  EXPECT_EQ(loaded.model.cycle_scale(), model.cycle_scale());
  EXPECT_EQ(loaded.model.config().horizon, 9);
  EXPECT_EQ(loaded.model.config().kernel_sizes, cfg.kernel_sizes);
  EXPECT_EQ(loaded.meta.at("seed"), 31);
  EXPECT_EQ(loaded.model.noise().gamma_sq, model.noise().gamma_sq);

  const auto copy = temp_path("rulkit_ckpt_test2.bin");
  save_checkpoint(copy, loaded.model, loaded.meta);
  std::ifstream a(path, std::ios::binary), b(copy, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
  std::remove(path.c_str());
  std::remove(copy.c_str());
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto path = temp_path("rulkit_ckpt_bad.bin");
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOTACKPT and more";
  }
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  auto model = TrajectoryModel::initialized(tiny_config(), 10.0, 1);
  save_checkpoint(path, model);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
  EXPECT_THROW(load_checkpoint(temp_path("rulkit_no_such_file.bin")), std::runtime_error);
  std::remove(path.c_str());
}
