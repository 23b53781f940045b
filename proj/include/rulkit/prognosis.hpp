#pragma once

// Per-unit prognosis for the four compared methods: pattern construction
// (network or linear Wiener), drift updates on the schedule, and the RUL
// distribution at an evaluation cycle.

#include "rulkit/degradation.hpp"
#include "rulkit/drift.hpp"
#include "rulkit/evaluation.hpp"
#include "rulkit/rul.hpp"
#include "rulkit/trajectory_net.hpp"

#include <optional>
#include <vector>

namespace rulkit {

struct PrognosisConfig {
  double threshold{0.95};
  int update_every{10};
  int warmup{20};
  double omega0_sq{0};
  std::size_t n_curves{200};
  double level{0.9};
  double grid_factor{3.0};  ///< grid reaches this multiple of the mean-curve crossing time
  double max_rul{1000};     ///< cap when the mean curve never reaches the threshold
  bool use_median{false};

  void validate() const;
};

/// Linear-Wiener baseline (Q(t) = t) fitted on one-step and multi-step increments.
///
/// phi0 is the pooled mean increment rate; s^2 the residual variance of one-step
/// increments about it. gamma^2 is found by a bounded 1-D search of the
/// multi-step likelihood with eta^2 = s^2 - gamma^2 / 3 (one-step variance held
/// at its empirical value).
NoiseParams<double> fit_wiener(const std::vector<Track>& tracks, Eigen::Index horizon = 50,
                               Eigen::Index stride = 10);

struct Prognosis {
  double t_now{0};
  double z_now{0};
  DriftPosterior<double> posterior;
  std::optional<double> mean_crossing;  ///< relative time where psi Q reaches the threshold
  double grid_end{0};                   ///< relative time covered by the crossing curves
  std::optional<RULDistribution> distribution;  ///< empty when every curve was censored
  PointInterval estimate;
  double predicted_rul{0};
  bool censored{false};
  std::size_t censored_count{0};
};

class UnitForecaster {
 public:
  /// `net` is required for the network methods and ignored otherwise.
  UnitForecaster(Track track, Method method, const NoiseParams<double>& np, const PrognosisConfig& cfg,
                 const TrajectoryModel* net = nullptr);

  const Track& track() const noexcept { return track_; }
  Method method() const noexcept { return method_; }

  /// Pattern anchored at history index `idx` (Q(t_idx) = z_idx / psi) on a
  /// unit-spaced grid up to t_end. Network patterns beyond the decoded horizon
  /// continue linearly at the mean rate of the decoded window.
  PatternCurve<double> pattern(Eigen::Index idx, double psi, double t_end) const;

  /// Posterior after each scheduled update (adaptive methods), in time order.
  const std::vector<DriftPosterior<double>>& trace() const noexcept { return trace_; }

  /// Latest posterior available at history index idx; the prior for
  /// non-adaptive methods.
  DriftPosterior<double> posterior_at(Eigen::Index idx) const;

  /// RUL prognosis at history index idx; t_idx must be >= the warmup.
  Prognosis predict(Eigen::Index idx, std::uint64_t seed) const;

  /// Records for every cycle from the warmup on. true RUL = rul_offset + t_last - t.
  std::vector<PredictionRecord> evaluate(int unit_id, double rul_offset, std::uint64_t seed) const;

 private:
  Track track_;
  Method method_;
  NoiseParams<double> np_;
  PrognosisConfig cfg_;
  const TrajectoryModel* net_;
  MatrixXd states_;
  std::vector<DriftPosterior<double>> trace_;
};

/// Seed for one (unit, cycle) prediction.
std::uint64_t prediction_seed(std::uint64_t seed, int unit_id, double cycle);

void write_trace(std::ostream& os, const std::vector<DriftPosterior<double>>& trace);

}  // namespace rulkit
