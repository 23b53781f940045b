#include "rulkit/rul.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

namespace rulkit {
namespace {

constexpr double kTieTolerance = 1e-12;

// First index j with value(j) >= threshold, interpolated against j - 1.
template <typename ValueAt>
std::optional<double> scan_crossing(const VectorXd& t, ValueAt&& value_at, double threshold) {
  double prev = value_at(0);
  if (prev >= threshold) return t[0];
  for (Eigen::Index j = 1; j < t.size(); ++j) {
    const double v = value_at(j);
    if (v >= threshold) {
      const double w = (threshold - prev) / (v - prev);
      return t[j - 1] + w * (t[j] - t[j - 1]);
    }
    prev = v;
  }
  return std::nullopt;
}

VectorXd normalized(const VectorXd& w) {
  const double total = w.sum();
  if (!(total > 0)) throw std::invalid_argument("weights must have a positive sum");
  return w / total;
}

RULDistribution assemble(const std::vector<double>& crossings, Bandwidth bandwidth) {
  std::vector<double> kept;
  kept.reserve(crossings.size());
  for (double c : crossings)
    if (!std::isnan(c)) kept.push_back(c);
  const std::size_t censored = crossings.size() - kept.size();
  if (kept.empty()) throw AllCensoredError(censored);

  RULDistribution dist;
  dist.samples = Eigen::Map<const VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));
  dist.weights = VectorXd::Constant(dist.samples.size(), 1.0 / static_cast<double>(kept.size()));
  dist.censored_count = censored;
  dist.bandwidth = bandwidth.resolve(dist.samples, dist.weights);
  dist.density = kde(dist.samples, dist.weights, dist.bandwidth);
  return dist;
}

}  // namespace

double DensityGrid::integral() const {
  double s = 0;
  for (Eigen::Index j = 1; j < t.size(); ++j)
    s += 0.5 * (t[j] - t[j - 1]) * (density[j] + density[j - 1]);
  return s;
}

CrossingCurve make_crossing_curve(const PatternCurve<double>& mean, const PatternCurve<double>& xi,
                                  double k_sample) {
  if (mean.times() != xi.times())
    throw std::invalid_argument("crossing curve: mean and variance grids differ");
  VectorXd chi = mean.values() + k_sample * xi.values().cwiseMax(0.0).cwiseSqrt();
  return CrossingCurve{k_sample, PatternCurve<double>(mean.times(), std::move(chi))};
}

std::optional<double> first_crossing(const PatternCurve<double>& chi, double threshold) {
  const auto& v = chi.values();
  return scan_crossing(chi.times(), [&v](Eigen::Index j) { return v[j]; }, threshold);
}

Bandwidth Bandwidth::fixed(double h) {
  if (!(h > 0) || !std::isfinite(h)) throw std::invalid_argument("KDE bandwidth must be positive");
  return Bandwidth(h);
}

double Bandwidth::resolve(const VectorXd& samples, const VectorXd& weights) const {
  return is_silverman() ? silverman_bandwidth(samples, weights) : h_;
}

double silverman_bandwidth(const VectorXd& samples, const VectorXd& weights) {
  constexpr double kFallback = 0.2;
  if (samples.size() == 0) throw std::invalid_argument("silverman_bandwidth: no samples");
  const VectorXd w = normalized(weights);
  const double mean = w.dot(samples);
  const double var = w.dot((samples.array() - mean).square().matrix());
  const double sd = std::sqrt(std::max(0.0, var));
  const double iqr = weighted_quantile(samples, w, 0.75) - weighted_quantile(samples, w, 0.25);
  double spread = sd;
  if (iqr > 0) spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0)) return kFallback;
  const double n_eff = 1.0 / w.squaredNorm();
  return 0.9 * spread * std::pow(n_eff, -0.2);
}

DensityGrid kde(const VectorXd& samples, const VectorXd& weights, double h) {
  if (samples.size() == 0) throw std::invalid_argument("kde: no samples");
  if (samples.size() != weights.size()) throw std::invalid_argument("kde: weights length mismatch");
  if (!(h > 0)) throw std::invalid_argument("kde: bandwidth must be positive");
  const VectorXd w = normalized(weights);

  constexpr Eigen::Index kMaxNodes = 200001;
  // Zero-weight samples do not extend the grid.
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    if (w[i] > 0) {
      lo = std::min(lo, samples[i]);
      hi = std::max(hi, samples[i]);
    }
  }
  lo -= 4.0 * h;
  hi += 4.0 * h;
  Eigen::Index nodes = static_cast<Eigen::Index>(std::ceil((hi - lo) / (0.25 * h))) + 1;
  nodes = std::clamp<Eigen::Index>(nodes, 33, kMaxNodes);
  const double spacing = (hi - lo) / static_cast<double>(nodes - 1);

  DensityGrid grid;
  grid.t = VectorXd::LinSpaced(nodes, lo, hi);
  grid.density = VectorXd::Zero(nodes);
  const double norm = 1.0 / (h * std::sqrt(2.0 * std::numbers::pi));
  const double reach = 8.0 * h;  // kernel below 1e-14 of its peak beyond this
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    if (w[i] == 0.0) continue;
    const double x = samples[i];
    const auto first = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor((x - reach - lo) / spacing)));
    const auto last = std::min<Eigen::Index>(nodes - 1, static_cast<Eigen::Index>(std::ceil((x + reach - lo) / spacing)));
    for (Eigen::Index j = first; j <= last; ++j) {
      const double u = (grid.t[j] - x) / h;
      grid.density[j] += w[i] * norm * std::exp(-0.5 * u * u);
    }
  }
  return grid;
}

RULDistribution interpolation_rul(const PatternCurve<double>& curve, const PatternCurve<double>& xi,
                                  double drift_mean, double threshold, std::size_t n_curves,
                                  std::uint64_t seed, Bandwidth bandwidth) {
  if (n_curves == 0) throw std::invalid_argument("interpolation_rul: need at least one curve");
  if (curve.times() != xi.times())
    throw std::invalid_argument("interpolation_rul: pattern and variance grids differ");

  const VectorXd& t = curve.times();
  const VectorXd mean = drift_mean * curve.values();
  const VectorXd sd = xi.values().cwiseMax(0.0).cwiseSqrt();
  const double t0 = t[0];

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> crossings(n_curves);
  for (double& c : crossings) {
    const double k = normal(rng);
    const auto hit = scan_crossing(t, [&](Eigen::Index j) { return mean[j] + k * sd[j]; }, threshold);
    c = hit ? *hit - t0 : std::numeric_limits<double>::quiet_NaN();
  }
  return assemble(crossings, bandwidth);
}

RULDistribution mc_first_passage(const PatternCurve<double>& curve, const NoiseParams<double>& np,
                                 double drift_mean, double threshold, std::size_t n_paths,
                                 double dt, std::uint64_t seed, Bandwidth bandwidth,
                                 unsigned threads) {
  const double t0 = curve.front_time();
  std::vector<double> crossings(n_paths, std::numeric_limits<double>::quiet_NaN());
  euler_maruyama(
      curve, np, drift_mean, dt, n_paths, seed,
      [&](std::size_t p, double t_prev, double z_prev, double t_now, double z_now, Eigen::Index) {
        if (z_now < threshold) return true;
        if (z_prev >= threshold || t_now == t_prev) {
          crossings[p] = t_prev - t0;
        } else {
          crossings[p] = t_prev + (threshold - z_prev) / (z_now - z_prev) * (t_now - t_prev) - t0;
        }
        return false;
      },
      threads);
  return assemble(crossings, bandwidth);
}

double weighted_quantile(const VectorXd& samples, const VectorXd& weights, double p) {
  if (samples.size() == 0) throw std::invalid_argument("weighted_quantile: no samples");
  if (samples.size() != weights.size())
    throw std::invalid_argument("weighted_quantile: weights length mismatch");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("weighted_quantile: p outside [0,1]");
  const VectorXd w = normalized(weights);
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < samples.size(); ++i)
    if (w[i] > 0) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return samples[a] < samples[b]; });
  double cum = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    cum += w[order[r]];
    if (cum >= p - kTieTolerance) {
      if (std::abs(cum - p) <= kTieTolerance && r + 1 < order.size())
        return 0.5 * (samples[order[r]] + samples[order[r + 1]]);
      return samples[order[r]];
    }
  }
  return samples[order.back()];
}

PointInterval point_and_interval(const RULDistribution& dist, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must lie in (0,1)");
  if (dist.samples.size() < 2)
    throw std::invalid_argument("point_and_interval: need at least two non-censored samples");
  const VectorXd w = normalized(dist.weights);
  const double tail = 0.5 * (1.0 - level);
  PointInterval out;
  out.mean = w.dot(dist.samples);
  out.median = weighted_quantile(dist.samples, w, 0.5);
  out.lower = weighted_quantile(dist.samples, w, tail);
  out.upper = weighted_quantile(dist.samples, w, 1.0 - tail);
  return out;
}

double wasserstein1(const VectorXd& a, const VectorXd& wa, const VectorXd& b, const VectorXd& wb) {
  struct Atom {
    double x;
    double wa;
    double wb;
  };
  const VectorXd na = normalized(wa);
  const VectorXd nb = normalized(wb);
  std::vector<Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(a.size() + b.size()));
  for (Eigen::Index i = 0; i < a.size(); ++i) atoms.push_back({a[i], na[i], 0.0});
  for (Eigen::Index i = 0; i < b.size(); ++i) atoms.push_back({b[i], 0.0, nb[i]});
  std::sort(atoms.begin(), atoms.end(), [](const Atom& l, const Atom& r) { return l.x < r.x; });
  double fa = 0, fb = 0, dist = 0;
  for (std::size_t i = 0; i + 1 < atoms.size(); ++i) {
    fa += atoms[i].wa;
    fb += atoms[i].wb;
    dist += std::abs(fa - fb) * (atoms[i + 1].x - atoms[i].x);
  }
  return dist;
}

void write_samples(std::ostream& os, const RULDistribution& dist) {
  const auto old = os.precision(17);
  os << "sample\tweight\n";
  for (Eigen::Index i = 0; i < dist.samples.size(); ++i)
    os << dist.samples[i] << '\t' << dist.weights[i] << '\n';
  os.precision(old);
}

void write_density(std::ostream& os, const DensityGrid& grid) {
  const auto old = os.precision(17);
  os << "t\tdensity\n";
  for (Eigen::Index i = 0; i < grid.t.size(); ++i) os << grid.t[i] << '\t' << grid.density[i] << '\n';
  os.precision(old);
}

}  // namespace rulkit
