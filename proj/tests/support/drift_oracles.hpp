#pragma once

// Independent references for the drift filter: a scalar Kalman filter written
// in state-space form and joint-Gaussian conditioning on the whole record.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

struct Belief {
  double mean;
  double var;
};

// Scalar Kalman filter for phi observed through increments of Z = c t + noise.
// State phi_{i-1} -> phi_i with process noise q; observation
// y_i = z_i - z_{i-1} = H phi_{i-1} + v with Var v = r and Cov(v, w) = s.
// With s = 0 this is the textbook recursion.
inline std::vector<Belief> kalman(double slope, const std::vector<double>& t,
                                  const std::vector<double>& z, double gamma_sq,
                                  double eta_sq, Belief prior) {
  std::vector<Belief> out;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double dt = t[i] - t[i - 1];
    const double h = slope * dt;
    const double q = gamma_sq * dt;
    const double r = gamma_sq * slope * slope * dt * dt * dt / 3.0 + eta_sq * dt;
    const double s = gamma_sq * slope * dt * dt / 2.0;
    const double y = z[i] - z[i - 1];
    const double p_pred = prior.var + q;
    const double innov_var = h * h * prior.var + r;
    const double cross = h * prior.var + s;
    const double gain = cross / innov_var;
    prior.mean += gain * (y - h * prior.mean);
    prior.var = p_pred - gain * cross;
    out.push_back(prior);
  }
  return out;
}

// Posterior of phi(T) given Z at all times, from the continuous-time joint
// covariance of (phi, Z) for linear Q(t) = slope t and Z(t[0]) = z[0] known.
inline Belief batch_posterior(double slope, const std::vector<double>& t,
                              const std::vector<double>& z, double gamma_sq, double eta_sq,
                              Belief prior) {
  const auto n = static_cast<Eigen::Index>(t.size()) - 1;
  const double t0 = t[0];
  const double big_t = t.back() - t0;
  Eigen::MatrixXd szz(n, n);
  Eigen::VectorXd spz(n), resid(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const double ta = t[a + 1] - t0;
    for (Eigen::Index b = 0; b < n; ++b) {
      const double tb = t[b + 1] - t0;
      const double s = std::min(ta, tb), u = std::max(ta, tb);
      szz(a, b) = slope * slope * (prior.var * s * u + gamma_sq * (s * s * u / 2 - s * s * s / 6)) +
                  eta_sq * s;
    }
    spz[a] = slope * (prior.var * ta + gamma_sq * ta * ta / 2);
    resid[a] = z[a + 1] - (z[0] + slope * prior.mean * ta);
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(szz);
  const Eigen::VectorXd k = ldlt.solve(spz);
  return {prior.mean + k.dot(resid), prior.var + gamma_sq * big_t - k.dot(spz)};
}

// Z(t) = phi* slope t + eta B(t) sampled at integer cycles 0..last.
inline std::vector<double> fixed_drift_record(double phi, double slope, double eta_sq, int last,
                                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::vector<double> z(static_cast<std::size_t>(last) + 1, 0.0);
  for (int c = 1; c <= last; ++c)
    z[static_cast<std::size_t>(c)] = z[static_cast<std::size_t>(c) - 1] + phi * slope +
                                     std::sqrt(eta_sq) * n01(rng);
  return z;
}

}  // namespace oracle
