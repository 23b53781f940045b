#pragma once

#include "rulkit/common.hpp"
#include "rulkit/degradation.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rulkit {

/// Density r(t) tabulated on a uniform grid.
struct DensityGrid {
  VectorXd t;
  VectorXd density;

  /// Trapezoidal integral over the grid.
  double integral() const;
};

struct RULDistribution {
  VectorXd samples;  ///< crossing times, relative to the prediction time
  VectorXd weights;  ///< sum to 1 over the (non-censored) samples
  std::size_t censored_count{0};
  double bandwidth{0};
  DensityGrid density;

  std::size_t size() const noexcept { return static_cast<std::size_t>(samples.size()); }
};

/// chi(t) = psi Q(t) + k sqrt(xi(t)) for one standard-normal draw k.
struct CrossingCurve {
  double k_sample{0};
  PatternCurve<double> curve;
};

CrossingCurve make_crossing_curve(const PatternCurve<double>& mean, const PatternCurve<double>& xi,
                                  double k_sample);

/// Earliest up-crossing of `threshold` (closed: chi >= D), linearly
/// interpolated inside the grid interval. Returns the absolute time, or
/// nothing when the curve stays below the threshold on the whole grid.
std::optional<double> first_crossing(const PatternCurve<double>& chi, double threshold);

inline std::optional<double> first_crossing(const CrossingCurve& c, double threshold) {
  return first_crossing(c.curve, threshold);
}

/// KDE bandwidth choice: a fixed width or Silverman's rule of thumb.
class Bandwidth {
 public:
  static Bandwidth fixed(double h);
  static Bandwidth silverman() { return Bandwidth(0.0); }

  bool is_silverman() const noexcept { return h_ == 0.0; }
  double resolve(const VectorXd& samples, const VectorXd& weights) const;

 private:
  explicit Bandwidth(double h) : h_(h) {}
  double h_;
};

/// Weighted Silverman width 0.9 min(sd, IQR/1.34) n_eff^(-1/5), n_eff = 1 / sum w^2.
/// Falls back to 0.2 when the samples have no spread.
double silverman_bandwidth(const VectorXd& samples, const VectorXd& weights);

/// Gaussian-kernel mixture on a uniform grid spanning [min - 4h, max + 4h].
DensityGrid kde(const VectorXd& samples, const VectorXd& weights, double h);

/// Interpolation approximation of the first-passage distribution.
///
/// `curve` is the pattern Q on a grid whose first node is the prediction time,
/// `xi` the variance profile on the same grid. Draws k_n ~ N(0,1) for
/// n = 1..n_curves from a generator seeded with `seed`; censored curves are
/// dropped and the remaining weights renormalized.
RULDistribution interpolation_rul(const PatternCurve<double>& curve, const PatternCurve<double>& xi,
                                  double drift_mean, double threshold, std::size_t n_curves,
                                  std::uint64_t seed, Bandwidth bandwidth = Bandwidth::silverman());

/// Direct Euler–Maruyama simulation with first-passage counting (no
/// resampling). Paths start at drift_mean * Q(t0) with drift drift_mean.
RULDistribution mc_first_passage(const PatternCurve<double>& curve, const NoiseParams<double>& np,
                                 double drift_mean, double threshold, std::size_t n_paths,
                                 double dt, std::uint64_t seed,
                                 Bandwidth bandwidth = Bandwidth::silverman(),
                                 unsigned threads = 0);

struct PointInterval {
  double mean{0};
  double median{0};
  double lower{0};
  double upper{0};
};

/// Weighted nearest-rank quantile: smallest order statistic whose cumulative
/// weight reaches p; on an exact tie the two neighbouring order statistics
/// are averaged.
double weighted_quantile(const VectorXd& samples, const VectorXd& weights, double p);

PointInterval point_and_interval(const RULDistribution& dist, double level);

/// Wasserstein-1 distance between two weighted empirical distributions.
double wasserstein1(const VectorXd& a, const VectorXd& wa, const VectorXd& b, const VectorXd& wb);

/// Tab-separated "sample<TAB>weight" rows and "t<TAB>density" rows.
void write_samples(std::ostream& os, const RULDistribution& dist);
void write_density(std::ostream& os, const DensityGrid& grid);

}  // namespace rulkit
