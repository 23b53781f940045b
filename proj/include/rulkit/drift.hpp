#pragma once

// Bayesian refresh of the drift phi from new observations by conditioning
// the joint Gaussian of (phi_i, Z_i) given phi_{i-1} ~ N(psi, omega^2).

#include "rulkit/degradation.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace rulkit {

template <typename Scalar = double>
struct DriftPosterior {
  Scalar psi{1};
  Scalar omega_sq{0};
  Scalar t_last{0};
};

template <typename Scalar = double>
struct JointMoments {
  Eigen::Matrix<Scalar, 2, 1> mean;  ///< (E phi_i, E Z_i)
  Eigen::Matrix<Scalar, 2, 2> cov;
  Scalar t{0};                       ///< time of the observation Z_i
};

/// Moments of (phi_i, Z_i) over the update interval spanned by `q_segment`.
///
/// The predicted observation is z_prev + psi * dQ: the pattern is anchored at
/// the previous observation, so only its increment over the interval matters.
template <typename Scalar>
JointMoments<Scalar> joint_moments(const DriftPosterior<Scalar>& prior,
                                   const PatternCurve<Scalar>& q_segment,
                                   const NoiseParams<Scalar>& np, Scalar z_prev) {
  np.validate();
  const Scalar t0 = q_segment.front_time();
  const Scalar t1 = q_segment.back_time();
  if (!(t1 > t0)) throw std::invalid_argument("joint_moments: update interval must be positive");
  const auto in = pattern_integrals(q_segment, t0, t1);
  const Scalar w = prior.omega_sq;
  JointMoments<Scalar> jm;
  jm.t = t1;
  jm.mean << prior.psi, z_prev + prior.psi * in.delta_q;
  const Scalar c11 = np.gamma_sq * in.span + w;
  const Scalar c12 = np.gamma_sq * in.linear + w * in.delta_q;
  const Scalar c22 =
      np.gamma_sq * in.quadratic + np.eta_b_sq * in.span + w * in.delta_q * in.delta_q;
  jm.cov << c11, c12, c12, c22;
  return jm;
}

template <typename Scalar>
DriftPosterior<Scalar> posterior_update(const DriftPosterior<Scalar>& prior, Scalar z_new,
                                        const JointMoments<Scalar>& jm) {
  const Scalar c22 = jm.cov(1, 1);
  if (!(c22 > 0)) throw std::invalid_argument("posterior_update: observation variance must be positive");
  const Scalar gain = jm.cov(0, 1) / c22;
  DriftPosterior<Scalar> post;
  post.psi = prior.psi + gain * (z_new - jm.mean[1]);
  post.omega_sq = std::max(Scalar(0), jm.cov(0, 0) - gain * jm.cov(1, 0));
  post.t_last = jm.t;
  return post;
}

/// Update times warmup, warmup + every, ... up to last_cycle. Times before
/// the first cycle (1) are dropped.
inline std::vector<int> update_schedule(int last_cycle, int every = 10, int warmup = 20) {
  if (every < 1) throw std::invalid_argument("update_schedule: every must be >= 1");
  if (warmup < 0) throw std::invalid_argument("update_schedule: warmup must be >= 0");
  std::vector<int> out;
  for (int c = warmup; c <= last_cycle; c += every)
    if (c >= 1) out.push_back(c);
  return out;
}

/// Sequential updates along a fixed pattern: the i-th update uses Q over
/// [times[i-1], times[i]] and observation z[i]. Returns the posterior after
/// each update (times[0] is the starting point, not an update).
template <typename Scalar>
std::vector<DriftPosterior<Scalar>> filter_drift(const PatternCurve<Scalar>& pattern,
                                                 const Vector<Scalar>& times,
                                                 const Vector<Scalar>& z,
                                                 const NoiseParams<Scalar>& np,
                                                 DriftPosterior<Scalar> prior) {
  if (times.size() != z.size()) throw std::invalid_argument("filter_drift: length mismatch");
  std::vector<DriftPosterior<Scalar>> trace;
  trace.reserve(static_cast<std::size_t>(std::max<Eigen::Index>(0, times.size() - 1)));
  for (Eigen::Index i = 1; i < times.size(); ++i) {
    const auto seg = pattern.slice(times[i - 1], times[i]);
    const auto jm = joint_moments(prior, seg, np, z[i - 1]);
    prior = posterior_update(prior, z[i], jm);
    trace.push_back(prior);
  }
  return trace;
}

}  // namespace rulkit
