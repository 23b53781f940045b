#include "rulkit/synthetic.hpp"

#include "rulkit/cmapss.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace rulkit {

std::vector<TrainingPair> linear_model_pairs(std::size_t n_sequences, Eigen::Index history,
                                             Eigen::Index horizon, double slope,
                                             const NoiseParams<double>& np, std::uint64_t seed,
                                             double substep) {
  if (history < 1 || horizon < 1) throw std::invalid_argument("linear_model_pairs: empty window");
  np.validate();
  const Eigen::Index n = history + horizon;
  std::vector<TrainingPair> out;
  out.reserve(n_sequences);
  for (std::size_t s = 0; s < n_sequences; ++s) {
    auto track = std::make_shared<Track>();
    track->t = VectorXd::LinSpaced(n, 1.0, static_cast<double>(n));
    track->z.resize(n);
    std::mt19937_64 rng(mix_seed(seed, 2 * s));
    std::normal_distribution<double> n01;
    const double eta = std::sqrt(np.eta_b_sq);
    double z = slope * track->t[0] + eta * n01(rng);
    track->z[0] = z;
    for (Eigen::Index k = 1; k < history; ++k) {
      z += slope * (track->t[k] - track->t[k - 1]) + eta * std::sqrt(track->t[k] - track->t[k - 1]) * n01(rng);
      track->z[k] = z;
    }
    // Pattern shifted so that the simulator starts from the anchor value.
    const VectorXd tf = track->t.tail(horizon + 1);
    VectorXd qf = (z + slope * (tf.array() - tf[0])).matrix();
    euler_maruyama(
        PatternCurve<double>(tf, qf), np, 1.0, substep, 1, mix_seed(seed, 2 * s + 1),
        [&](std::size_t, double, double, double, double zn, Eigen::Index node) {
          if (node > 0) track->z[history - 1 + node] = zn;
          return true;
        },
        1);
    out.emplace_back(std::move(track), history, horizon);
  }
  return out;
}

}  // namespace rulkit

namespace rulkit {

std::vector<UnitSeries> synthetic_cmapss(std::size_t n_units, std::uint64_t seed, int min_life,
                                         int max_life) {
  if (n_units == 0 || min_life < 2 || max_life < min_life)
    throw std::invalid_argument("synthetic_cmapss: bad unit count or lifetimes");
  // baseline, full-wear shift and noise sd per sensor (FD001-like magnitudes)
  struct Channel {
    double base, shift, sd;
  };
  std::array<Channel, kSensorColumns> ch{};
  const std::array<double, kSensorColumns> base{518.67, 642.3,  1585.0, 1400.0, 14.62, 21.61, 553.9,
                                                2388.0, 9050.0, 1.3,    47.3,   521.9, 2388.0, 8140.0,
                                                8.42,   0.03,   392.0,  2388.0, 100.0, 38.9,  23.3};
  for (int s = 0; s < kSensorColumns; ++s) ch[static_cast<std::size_t>(s)] = {base[static_cast<std::size_t>(s)], 0, 0};
  ch[1] = {642.3, 1.4, 0.35};     // s2
  ch[2] = {1585.0, 14.0, 4.5};    // s3
  ch[3] = {1400.0, 28.0, 6.5};    // s4
  ch[10] = {47.3, 1.1, 0.22};     // s11
  ch[16] = {392.0, 4.5, 1.3};     // s17
  ch[6].sd = 0.6;                 // s7, s8, s9 wander without wear
  ch[7].sd = 0.05;
  ch[8].sd = 15.0;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> life_dist(min_life, max_life);
  std::uniform_real_distribution<double> shape_dist(1.6, 2.6);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<UnitSeries> units;
  for (std::size_t u = 0; u < n_units; ++u) {
    const int life = life_dist(rng);
    const double shape = shape_dist(rng);
    const double onset = 0.05 * gauss(rng);
    UnitSeries us;
    us.unit_id = static_cast<int>(u + 1);
    us.cycles = VectorXd::LinSpaced(life, 1.0, life);
    us.settings.resize(life, kSettingColumns);
    us.sensors.resize(life, kSensorColumns);
    for (int k = 0; k < life; ++k) {
      const double frac = static_cast<double>(k) / static_cast<double>(life - 1);
      const double wear = std::max(0.0, onset + std::pow(frac, shape) * (1.0 - onset));
      us.settings(k, 0) = 0.002 * gauss(rng);
      us.settings(k, 1) = 0.0003 * gauss(rng);
      us.settings(k, 2) = 100.0;
      for (int s = 0; s < kSensorColumns; ++s) {
        const auto& c = ch[static_cast<std::size_t>(s)];
        us.sensors(k, s) = c.base + c.shift * wear + (c.sd > 0 ? c.sd * gauss(rng) : 0.0);
      }
    }
    units.push_back(std::move(us));
  }
  return units;
}

}  // namespace rulkit
