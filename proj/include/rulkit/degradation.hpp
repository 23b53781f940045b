#pragma once

// Wiener degradation model with a learned pattern term and a Brownian drift:
//
//   Z(t)   = Z(t_i) + int_{t_i}^t phi(tau) dQ(tau) + eta_B B(t - t_i)
//   phi(t) = phi_i + gamma Lambda(t - t_i)
//
// Pattern curves are piecewise linear between grid nodes. All integrals of
// the pattern are evaluated exactly for that interpolant, which is the
// trapezoidal rule for linear integrands and reproduces the one-step
// (1/3) gamma^2 dQ^2 dt term for quadratic ones.

#include "rulkit/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>
#include <vector>

namespace rulkit {

template <typename Scalar = double>
struct NoiseParams {
  Scalar gamma_sq{0};  ///< drift diffusion
  Scalar eta_b_sq{0};  ///< observation diffusion
  Scalar phi0{1};      ///< initial drift

  void validate() const {
    if (!(gamma_sq >= 0) || !(eta_b_sq >= 0) || !std::isfinite(gamma_sq) ||
        !std::isfinite(eta_b_sq))
      throw std::invalid_argument("noise coefficients must be finite and nonnegative");
    if (!std::isfinite(phi0)) throw std::invalid_argument("phi0 must be finite");
  }
};

/// Q(t) sampled on a strictly increasing time grid, linear in between.
template <typename Scalar = double>
class PatternCurve {
 public:
  using VectorType = Vector<Scalar>;

  PatternCurve(VectorType times, VectorType values)
      : times_(std::move(times)), values_(std::move(values)) {
    if (times_.size() != values_.size())
      throw std::invalid_argument("pattern curve: times and values differ in length");
    if (times_.size() < 2) throw std::invalid_argument("pattern curve needs at least two nodes");
    for (Eigen::Index i = 0; i < times_.size(); ++i) {
      if (!std::isfinite(times_[i]) || !std::isfinite(values_[i]))
        throw std::invalid_argument("pattern curve: non-finite node");
      if (i > 0 && !(times_[i] > times_[i - 1]))
        throw std::invalid_argument("pattern curve: times must be strictly increasing");
    }
  }

  const VectorType& times() const noexcept { return times_; }
  const VectorType& values() const noexcept { return values_; }
  Eigen::Index size() const noexcept { return times_.size(); }
  Scalar front_time() const { return times_[0]; }
  Scalar back_time() const { return times_[times_.size() - 1]; }

  bool covers(Scalar t) const { return t >= front_time() && t <= back_time(); }

  /// Index m of the segment [t_m, t_{m+1}] containing t (clamped to the grid).
  Eigen::Index segment(Scalar t) const {
    const Scalar* begin = times_.data();
    const Scalar* end = begin + times_.size();
    auto it = std::upper_bound(begin, end, t);
    Eigen::Index m = static_cast<Eigen::Index>(it - begin) - 1;
    return std::clamp<Eigen::Index>(m, 0, times_.size() - 2);
  }

  Scalar operator()(Scalar t) const {
    if (!covers(t)) throw std::out_of_range("pattern curve evaluated outside its domain");
    const Eigen::Index m = segment(t);
    const Scalar w = (t - times_[m]) / (times_[m + 1] - times_[m]);
    return values_[m] + w * (values_[m + 1] - values_[m]);
  }

  /// Sub-curve on [t0, t1] with interpolated end nodes.
  PatternCurve slice(Scalar t0, Scalar t1) const {
    if (!(t1 > t0) || !covers(t0) || !covers(t1))
      throw std::invalid_argument("pattern curve slice outside domain");
    std::vector<Scalar> ts{t0};
    for (Eigen::Index i = 0; i < times_.size(); ++i)
      if (times_[i] > t0 && times_[i] < t1) ts.push_back(times_[i]);
    ts.push_back(t1);
    VectorType t = Eigen::Map<const VectorType>(ts.data(), static_cast<Eigen::Index>(ts.size()));
    VectorType v = t.unaryExpr([this](Scalar s) { return (*this)(s); });
    return PatternCurve(std::move(t), std::move(v));
  }

 private:
  VectorType times_;
  VectorType values_;
};

template <typename Scalar = double>
struct IncrementStats {
  Scalar delta_q{0};
  Scalar delta_z{0};
  Scalar delta_t{1};
};

template <typename Scalar = double>
struct DegradationState {
  Scalar t_now{0};
  Scalar z_now{0};
  Scalar threshold{1};
};

/// E Z(t) = drift_mean * Q(t).
template <typename Scalar>
PatternCurve<Scalar> mean_trajectory(const PatternCurve<Scalar>& curve, Scalar drift_mean) {
  return PatternCurve<Scalar>(curve.times(), curve.values() * drift_mean);
}

/// One-step predictive variance (1/3) gamma^2 dZ^2 dt + eta_B^2 dt.
template <typename Scalar>
Scalar variance_onestep(const IncrementStats<Scalar>& inc, const NoiseParams<Scalar>& np) {
  if (!(inc.delta_t > 0)) throw std::invalid_argument("variance_onestep: delta_t must be positive");
  return np.gamma_sq * inc.delta_z * inc.delta_z * inc.delta_t / Scalar(3) +
         np.eta_b_sq * inc.delta_t;
}

/// int (c - L(tau))^2 dtau over one linear segment L: a -> b of width h.
template <typename Scalar>
constexpr Scalar segment_square_integral(Scalar a, Scalar b, Scalar c, Scalar h) {
  const Scalar da = c - a;
  const Scalar db = c - b;
  return h * (da * da + da * db + db * db) / Scalar(3);
}

/// The two integrals of the pattern over [t0, t1] that enter the drift covariances:
///   linear    = int (Q(t1) - Q(tau)) dtau
///   quadratic = int (Q(t1) - Q(tau))^2 dtau
template <typename Scalar>
struct PatternIntegrals {
  Scalar span{0};
  Scalar delta_q{0};
  Scalar linear{0};
  Scalar quadratic{0};
};

template <typename Scalar>
PatternIntegrals<Scalar> pattern_integrals(const PatternCurve<Scalar>& curve, Scalar t0, Scalar t1) {
  if (!(t1 > t0)) throw std::invalid_argument("pattern_integrals: empty interval");
  const auto seg = curve.slice(t0, t1);
  const auto& t = seg.times();
  const auto& q = seg.values();
  const Eigen::Index n = t.size();
  const Scalar c = q[n - 1];
  PatternIntegrals<Scalar> out;
  out.span = t1 - t0;
  out.delta_q = c - q[0];
  for (Eigen::Index m = 0; m + 1 < n; ++m) {
    const Scalar h = t[m + 1] - t[m];
    out.linear += h * (Scalar(2) * c - q[m] - q[m + 1]) / Scalar(2);
    out.quadratic += segment_square_integral(q[m], q[m + 1], c, h);
  }
  return out;
}

/// Coefficients of the variance profile: xi(t_j) = gamma^2 a_j + eta_B^2 b_j.
template <typename Scalar>
struct VarianceBasis {
  Vector<Scalar> times;
  Vector<Scalar> drift_part;  ///< a_j = int_{t_start}^{t_j} (Q(t_j) - Q(tau))^2 dtau
  Vector<Scalar> noise_part;  ///< b_j = t_j - t_start
};

/// O(n) evaluation using running sums of the piecewise-linear moments of
/// Q - Q(t_start); the shift keeps the expansion well conditioned.
template <typename Scalar>
VarianceBasis<Scalar> variance_basis(const PatternCurve<Scalar>& curve, Scalar t_start) {
  if (!curve.covers(t_start) || !(curve.back_time() > t_start))
    throw std::invalid_argument("variance_profile: t_start must lie inside the grid, before its end");
  const auto seg = curve.slice(t_start, curve.back_time());
  const Eigen::Index n = seg.size();
  const Vector<Scalar> u = seg.values().array() - seg.values()[0];
  VarianceBasis<Scalar> out{seg.times(), Vector<Scalar>::Zero(n), Vector<Scalar>::Zero(n)};
  Scalar span = 0, s1 = 0, s2 = 0;
  for (Eigen::Index j = 1; j < n; ++j) {
    const Scalar h = seg.times()[j] - seg.times()[j - 1];
    const Scalar a = u[j - 1], b = u[j];
    span += h;
    s1 += h * (a + b);
    s2 += h * (a * a + a * b + b * b);
    const Scalar c = u[j];
    out.drift_part[j] = std::max(Scalar(0), c * c * span - c * s1 + s2 / Scalar(3));
    out.noise_part[j] = seg.times()[j] - t_start;
  }
  return out;
}

/// xi(t) on the curve's grid from t_start onwards; xi(t_start) = 0.
template <typename Scalar>
PatternCurve<Scalar> variance_profile(const PatternCurve<Scalar>& curve,
                                      const NoiseParams<Scalar>& np, Scalar t_start) {
  np.validate();
  auto basis = variance_basis(curve, t_start);
  Vector<Scalar> xi = np.gamma_sq * basis.drift_part + np.eta_b_sq * basis.noise_part;
  return PatternCurve<Scalar>(std::move(basis.times), std::move(xi));
}

/// Sampled paths Z(t) on the pattern grid; row p is path p.
template <typename Scalar = double>
struct PathSet {
  Vector<Scalar> times;
  Matrix<Scalar> values;
};

/// Euler–Maruyama integration of the degradation SDE along `curve`.
///
/// Each grid interval is split into ceil(h / dt) equal sub-steps. The
/// visitor is called as `visitor(path, t_prev, z_prev, t, z, node)` after every
/// sub-step, where `node` is the grid index reached or -1 in between; it
/// returns false to stop that path. Paths draw from independent generators
/// seeded by (seed, path index), so results do not depend on `threads`.
template <typename Scalar, typename Visitor>
void euler_maruyama(const PatternCurve<Scalar>& curve, const NoiseParams<Scalar>& np,
                    Scalar drift_init, Scalar dt, std::size_t n_paths, std::uint64_t seed,
                    Visitor&& visitor, unsigned threads = 0) {
  np.validate();
  if (!(dt > 0)) throw std::invalid_argument("simulate_paths: dt must be positive");
  if (n_paths == 0) throw std::invalid_argument("simulate_paths: need at least one path");
  const auto& t = curve.times();
  const auto& q = curve.values();
  const Eigen::Index n = t.size();
  std::vector<int> substeps(static_cast<std::size_t>(n - 1));
  for (Eigen::Index m = 0; m + 1 < n; ++m) {
    const Scalar h = t[m + 1] - t[m];
    if (dt > h * (Scalar(1) + Scalar(1e-12)))
      throw std::invalid_argument("simulate_paths: dt larger than the grid spacing");
    substeps[static_cast<std::size_t>(m)] =
        std::max(1, static_cast<int>(std::ceil(h / dt - Scalar(1e-9))));
  }
  const Scalar gamma = std::sqrt(np.gamma_sq);
  const Scalar eta = std::sqrt(np.eta_b_sq);

  auto run_range = [&](std::size_t first, std::size_t last) {
    std::normal_distribution<Scalar> normal(0, 1);
    for (std::size_t p = first; p < last; ++p) {
      std::mt19937_64 rng(mix_seed(seed, p));
      Scalar phi = drift_init;
      Scalar z = drift_init * q[0];
      bool alive = visitor(p, t[0], z, t[0], z, Eigen::Index{0});
      for (Eigen::Index m = 0; alive && m + 1 < n; ++m) {
        const int k = substeps[static_cast<std::size_t>(m)];
        const Scalar h = (t[m + 1] - t[m]) / Scalar(k);
        const Scalar dq = (q[m + 1] - q[m]) / Scalar(k);
        const Scalar sqrt_h = std::sqrt(h);
        for (int s = 0; alive && s < k; ++s) {
          const Scalar t_prev = t[m] + h * Scalar(s);
          const Scalar z_prev = z;
          z += phi * dq + eta * sqrt_h * normal(rng);
          phi += gamma * sqrt_h * normal(rng);
          const bool on_node = s + 1 == k;
          alive = visitor(p, t_prev, z_prev, on_node ? t[m + 1] : t_prev + h, z,
                          on_node ? m + 1 : Eigen::Index{-1});
        }
      }
    }
  };

  unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n_paths));
  if (workers <= 1) {
    run_range(0, n_paths);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n_paths + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t first = w * chunk;
    const std::size_t last = std::min(n_paths, first + chunk);
    if (first < last) pool.emplace_back(run_range, first, last);
  }
}

/// Paths recorded at the pattern grid nodes.
template <typename Scalar>
PathSet<Scalar> simulate_paths(const PatternCurve<Scalar>& curve, const NoiseParams<Scalar>& np,
                               Scalar drift_init, Scalar dt, std::size_t n_paths,
                               std::uint64_t seed, unsigned threads = 0) {
  PathSet<Scalar> out{curve.times(),
                      Matrix<Scalar>(static_cast<Eigen::Index>(n_paths), curve.size())};
  euler_maruyama(
      curve, np, drift_init, dt, n_paths, seed,
      [&out](std::size_t p, Scalar, Scalar, Scalar, Scalar z, Eigen::Index node) {
        if (node >= 0) out.values(static_cast<Eigen::Index>(p), node) = z;
        return true;
      },
      threads);
  return out;
}

}  // namespace rulkit
