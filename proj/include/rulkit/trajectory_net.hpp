#pragma once

// Encoder–decoder network for the pattern term Q(t; Theta).
//
// A gated recurrent encoder reads (t / cycle_scale, z) up to the last
// history time and emits a d-dimensional health vector. The vector is
// duplicated over the anchor time and the horizon of future times, stacked
// with their normalized times, and decoded by two 1-D convolutions along
// time plus a per-step linear head. The decoded curve is anchored so that
// Q(t_last) = z_last / psi. Two log-variance parameters form the variance
// branch that yields gamma^2 and eta_B^2.

#include "rulkit/common.hpp"
#include "rulkit/degradation.hpp"

#include <array>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace rulkit {

/// One monitored series: observation times (cycles) and values.
struct Track {
  VectorXd t;
  VectorXd z;
};

struct NetConfig {
  int hidden_dim{20};
  int horizon{50};
  std::array<int, 2> conv_filters{16, 32};
  std::array<int, 2> kernel_sizes{5, 5};
  double dropout_p{0.3};
  double learning_rate{0.0015};
  double decay{2e-5};  ///< decoupled weight decay; not applied to the variance branch
  int epochs{30};
  int batch_size{32};
  double clip_norm{5.0};

  void validate() const;
};

/// History up to t_{i-1} plus up to `horizon` future targets of one series.
class TrainingPair {
 public:
  TrainingPair(std::shared_ptr<const Track> series, Eigen::Index history_len, Eigen::Index n_targets);

  const Track& series() const noexcept { return *series_; }
  const std::shared_ptr<const Track>& series_ptr() const noexcept { return series_; }
  Eigen::Index history_len() const noexcept { return history_len_; }
  Eigen::Index n_targets() const noexcept { return n_targets_; }

  auto history_times() const { return series_->t.head(history_len_); }
  auto history_values() const { return series_->z.head(history_len_); }
  auto future_times() const { return series_->t.segment(history_len_, n_targets_); }
  auto future_values() const { return series_->z.segment(history_len_, n_targets_); }
  double anchor_time() const { return series_->t[history_len_ - 1]; }
  double anchor_value() const { return series_->z[history_len_ - 1]; }

  /// Step j (0-based) of the targets against its predecessor.
  IncrementStats<double> increment(Eigen::Index j) const;

  /// Var of target j is gamma^2 drift_basis[j] + eta_B^2 noise_basis[j], with
  /// the integral taken over the observed path from the anchor.
  const VectorXd& drift_basis() const noexcept { return drift_basis_; }
  const VectorXd& noise_basis() const noexcept { return noise_basis_; }

 private:
  std::shared_ptr<const Track> series_;
  Eigen::Index history_len_;
  Eigen::Index n_targets_;
  VectorXd drift_basis_;
  VectorXd noise_basis_;
};

/// Sliding windows over one series: histories of length min_history,
/// min_history + stride, ...; each with the next up-to-`horizon` targets.
std::vector<TrainingPair> make_training_pairs(std::shared_ptr<const Track> series,
                                              Eigen::Index min_history, Eigen::Index horizon,
                                              Eigen::Index stride = 1);

struct ParamBlock {
  std::string name;
  Eigen::Index rows{0};
  Eigen::Index cols{0};
  Eigen::Index offset{0};

  Eigen::Index size() const noexcept { return rows * cols; }
};

/// Named column-major blocks inside one flat parameter vector.
class ParamLayout {
 public:
  void add(std::string name, Eigen::Index rows, Eigen::Index cols);
  const ParamBlock& find(const std::string& name) const;
  const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }
  Eigen::Index size() const noexcept { return size_; }
  /// Name of the block holding flat index i.
  const std::string& owner(Eigen::Index i) const;

 private:
  std::vector<ParamBlock> blocks_;
  Eigen::Index size_{0};
};

class TrajectoryModel {
 public:
  /// All parameters zero.
  TrajectoryModel(NetConfig cfg, double cycle_scale);

  /// Xavier-uniform weights, zero biases, forget-gate bias 1.
  static TrajectoryModel initialized(const NetConfig& cfg, double cycle_scale, std::uint64_t seed);

  const NetConfig& config() const noexcept { return cfg_; }
  double cycle_scale() const noexcept { return cycle_scale_; }
  const ParamLayout& layout() const noexcept { return layout_; }
  const VectorXd& params() const noexcept { return params_; }
  VectorXd& params() noexcept { return params_; }
  Eigen::Index n_params() const noexcept { return params_.size(); }

  Eigen::Map<const MatrixXd> block(const std::string& name) const;
  Eigen::Map<MatrixXd> block(const std::string& name);

  /// Exported coefficients with phi0 = 1.
  NoiseParams<double> noise() const;
  void set_noise(const NoiseParams<double>& np);

 private:
  NetConfig cfg_;
  double cycle_scale_;
  ParamLayout layout_;
  VectorXd params_;
};

/// Encoder states after each history step; column k encodes the first k+1 points.
MatrixXd encode(const TrajectoryModel& model, const VectorXd& t, const VectorXd& z);

/// Raw decoder output at the anchor time followed by each future time; at
/// most `horizon` future times.
VectorXd decode(const TrajectoryModel& model, const VectorXd& h, double anchor_time,
                const VectorXd& future_times);

/// Pattern curve on {anchor_time} u future_times with Q(anchor) = z_last / psi.
PatternCurve<double> forward_from_state(const TrajectoryModel& model, const VectorXd& h,
                                        double anchor_time, double z_last,
                                        const VectorXd& future_times, double psi = 1.0);

PatternCurve<double> forward(const TrajectoryModel& model, const VectorXd& history_t,
                             const VectorXd& history_z, const VectorXd& future_times,
                             double psi = 1.0);

/// One likelihood term: 0.5 r^2 / var + 0.5 ln var.
double nll_term(double residual, double var);

/// Mean NLL of a pair's targets under a predicted curve covering them.
double nll_loss(const PatternCurve<double>& predicted, const TrainingPair& pair,
                const NoiseParams<double>& np);

/// Mean NLL over all targets of `pairs`; accumulates the gradient when `grad`
/// is given. Dropout is active only when `dropout_rng` is given.
double batch_loss(const TrajectoryModel& model, const std::vector<const TrainingPair*>& pairs,
                  VectorXd* grad = nullptr, std::mt19937_64* dropout_rng = nullptr);

struct GradCheckReport {
  double max_rel_error{0};   ///< over entries with a gradient of at least abs_floor
  double max_abs_error{0};   ///< over the remaining (near-zero) entries
  Eigen::Index worst_index{-1};
  std::string worst_block;
  Eigen::Index abs_compared{0};

  bool passed(double rel_tol = 1e-4, double abs_tol = 1e-8) const {
    return max_rel_error <= rel_tol && max_abs_error < abs_tol;
  }
};

GradCheckReport compare_gradients(const VectorXd& analytic, const VectorXd& numeric,
                                  const ParamLayout& layout, double abs_floor = 1e-7);

/// Central differences on every parameter, variance branch included.
GradCheckReport grad_check(const TrajectoryModel& model, const TrainingPair& pair,
                           double epsilon = 1e-5);

struct TrainReport {
  std::vector<double> epoch_loss;
  std::size_t steps{0};
  double cycle_scale{0};
};

using EpochCallback = std::function<void(int epoch, double loss, const TrajectoryModel&)>;

/// Adam on the pooled NLL. cycle_scale is the largest time in the training
/// series; the variance branch starts from increment statistics of the data.
TrajectoryModel train(const std::vector<TrainingPair>& pairs, const NetConfig& cfg,
                      std::uint64_t seed, TrainReport* report = nullptr,
                      const EpochCallback& on_epoch = {});

}  // namespace rulkit
