#include "rulkit/prognosis.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

namespace rulkit {
namespace {

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Eigen::Index index_of(const VectorXd& t, double time) {
  const double* b = t.data();
  const double* e = b + t.size();
  const double* it = std::lower_bound(b, e, time);
  if (it == e || *it != time) return -1;
  return static_cast<Eigen::Index>(it - b);
}

}  // namespace

void PrognosisConfig::validate() const {
  if (!std::isfinite(threshold)) throw std::invalid_argument("prognosis: threshold must be finite");
  if (update_every < 1 || warmup < 0) throw std::invalid_argument("prognosis: bad update schedule");
  if (!(omega0_sq >= 0)) throw std::invalid_argument("prognosis: omega0_sq must be >= 0");
  if (n_curves < 1) throw std::invalid_argument("prognosis: need at least one crossing curve");
  if (!(level > 0 && level < 1)) throw std::invalid_argument("prognosis: level must lie in (0, 1)");
  if (!(grid_factor >= 1) || !(max_rul > 0)) throw std::invalid_argument("prognosis: bad grid settings");
}

NoiseParams<double> fit_wiener(const std::vector<Track>& tracks, Eigen::Index horizon, Eigen::Index stride) {
  if (horizon < 1 || stride < 1) throw std::invalid_argument("fit_wiener: horizon and stride must be >= 1");
  double sum_dz = 0, sum_dt = 0;
  std::size_t count = 0;
  for (const auto& tr : tracks) {
    if (tr.t.size() != tr.z.size()) throw std::invalid_argument("fit_wiener: track length mismatch");
    for (Eigen::Index k = 1; k < tr.t.size(); ++k) {
      const double dt = tr.t[k] - tr.t[k - 1];
      if (!(dt > 0)) throw std::invalid_argument("fit_wiener: times must increase");
      sum_dz += tr.z[k] - tr.z[k - 1];
      sum_dt += dt;
      ++count;
    }
  }
  if (count < 2) throw std::invalid_argument("fit_wiener: need at least two increments");
  NoiseParams<double> np;
  np.phi0 = sum_dz / sum_dt;

  double ss = 0;
  for (const auto& tr : tracks)
    for (Eigen::Index k = 1; k < tr.t.size(); ++k) {
      const double dt = tr.t[k] - tr.t[k - 1];
      const double r = tr.z[k] - tr.z[k - 1] - np.phi0 * dt;
      ss += r * r / dt;
    }
  const double s2 = ss / static_cast<double>(count);
  if (!(s2 > 0)) {
    np.gamma_sq = np.eta_b_sq = 0;
    return np;
  }

  struct Target {
    double r, span;
  };
  std::vector<Target> targets;
  for (const auto& tr : tracks)
    for (Eigen::Index a = 0; a + 1 < tr.t.size(); a += stride)
      for (Eigen::Index j = 1; j <= horizon && a + j < tr.t.size(); ++j) {
        const double span = tr.t[a + j] - tr.t[a];
        targets.push_back({tr.z[a + j] - tr.z[a] - np.phi0 * span, span});
      }

  const double floor = 1e-9 * s2;
  auto nll = [&](double x) {
    const double g = 3.0 * s2 * x;
    const double e = std::max(floor, s2 * (1.0 - x));
    double total = 0;
    for (const auto& tg : targets) {
      const double var = g * tg.span * tg.span * tg.span / 3.0 + e * tg.span;
      total += 0.5 * tg.r * tg.r / var + 0.5 * std::log(var);
    }
    return total;
  };
  const auto best = boost::math::tools::brent_find_minima(nll, 0.0, 1.0, 40);
  np.gamma_sq = 3.0 * s2 * best.first;
  np.eta_b_sq = std::max(floor, s2 * (1.0 - best.first));
  return np;
}

UnitForecaster::UnitForecaster(Track track, Method method, const NoiseParams<double>& np,
                               const PrognosisConfig& cfg, const TrajectoryModel* net)
    : track_(std::move(track)), method_(method), np_(np), cfg_(cfg), net_(net) {
  cfg_.validate();
  np_.validate();
  if (track_.t.size() != track_.z.size() || track_.t.size() < 1)
    throw std::invalid_argument("forecaster: empty or inconsistent track");
  for (Eigen::Index k = 1; k < track_.t.size(); ++k)
    if (!(track_.t[k] > track_.t[k - 1])) throw std::invalid_argument("forecaster: times must increase");
  if (is_dnn(method_)) {
    if (!net_) throw std::invalid_argument("forecaster: network methods need a trained model");
    states_ = encode(*net_, track_.t, track_.z);
  }
  if (!is_adaptive(method_)) return;

  DriftPosterior<double> post{np_.phi0, cfg_.omega0_sq, track_.t[0]};
  Eigen::Index prev = 0;
  const int last = static_cast<int>(std::floor(track_.t[track_.t.size() - 1]));
  for (int u : update_schedule(last, cfg_.update_every, cfg_.warmup)) {
    const Eigen::Index idx = index_of(track_.t, u);
    if (idx <= prev) continue;
    const auto q = pattern(prev, post.psi, track_.t[idx]).slice(track_.t[prev], track_.t[idx]);
    const auto jm = joint_moments(post, q, np_, track_.z[prev]);
    post = posterior_update(post, track_.z[idx], jm);
    trace_.push_back(post);
    prev = idx;
  }
}

PatternCurve<double> UnitForecaster::pattern(Eigen::Index idx, double psi, double t_end) const {
  if (idx < 0 || idx >= track_.t.size()) throw std::out_of_range("forecaster: history index");
  const double t_now = track_.t[idx];
  const double z_now = track_.z[idx];
  const auto steps = static_cast<Eigen::Index>(std::max(1.0, std::ceil(t_end - t_now - 1e-9)));
  const VectorXd times = VectorXd::LinSpaced(steps + 1, t_now, t_now + static_cast<double>(steps));
  VectorXd q(steps + 1);
  if (!is_dnn(method_)) {
    if (!(psi != 0.0)) throw std::invalid_argument("forecaster: drift mean must be nonzero");
    q = (times.array() - t_now + z_now / psi).matrix();
    return PatternCurve<double>(times, std::move(q));
  }
  const Eigen::Index decoded = std::min<Eigen::Index>(steps, net_->config().horizon);
  const auto head = forward_from_state(*net_, states_.col(idx), t_now, z_now, times.segment(1, decoded), psi);
  q.head(decoded + 1) = head.values();
  if (steps > decoded) {
    // mean rate over the decoded window; the last few steps are edge-prone
    const double slope = (q[decoded] - q[0]) / static_cast<double>(decoded);
    for (Eigen::Index k = decoded + 1; k <= steps; ++k)
      q[k] = q[decoded] + slope * static_cast<double>(k - decoded);
  }
  return PatternCurve<double>(times, std::move(q));
}

DriftPosterior<double> UnitForecaster::posterior_at(Eigen::Index idx) const {
  DriftPosterior<double> post{np_.phi0, cfg_.omega0_sq, track_.t[0]};
  for (const auto& p : trace_)
    if (p.t_last <= track_.t[idx]) post = p;
  return post;
}

Prognosis UnitForecaster::predict(Eigen::Index idx, std::uint64_t seed) const {
  if (idx < 0 || idx >= track_.t.size()) throw std::out_of_range("forecaster: history index");
  Prognosis out;
  out.t_now = track_.t[idx];
  out.z_now = track_.z[idx];
  if (out.t_now < cfg_.warmup)
    throw std::invalid_argument("prediction at cycle " + fmt(out.t_now) + " precedes the warmup: drift updates run every " +
                                std::to_string(cfg_.update_every) + " cycles from cycle " +
                                std::to_string(cfg_.warmup));
  out.posterior = posterior_at(idx);
  const double psi = out.posterior.psi;

  if (out.z_now >= cfg_.threshold) {
    out.mean_crossing = 0.0;
  } else {
    const auto probe = mean_trajectory(pattern(idx, psi, out.t_now + cfg_.max_rul), psi);
    if (const auto tc = first_crossing(probe, cfg_.threshold)) out.mean_crossing = *tc - out.t_now;
  }
  out.grid_end = out.mean_crossing ? std::clamp(cfg_.grid_factor * *out.mean_crossing, 1.0, cfg_.max_rul)
                                   : cfg_.max_rul;

  const auto q = pattern(idx, psi, out.t_now + out.grid_end);
  const auto xi = variance_profile(q, np_, out.t_now);
  try {
    auto dist = interpolation_rul(q, xi, psi, cfg_.threshold, cfg_.n_curves, seed);
    out.censored_count = dist.censored_count;
    if (dist.size() >= 2) {
      out.estimate = point_and_interval(dist, cfg_.level);
    } else {
      const double s = dist.samples[0];
      out.estimate = {s, s, s, s};
    }
    out.distribution = std::move(dist);
  } catch (const AllCensoredError& e) {
    out.censored = true;
    out.censored_count = e.censored_count();
    const double h = q.back_time() - out.t_now;
    out.estimate = {h, h, h, h};
  }
  out.predicted_rul = cfg_.use_median ? out.estimate.median : out.estimate.mean;
  return out;
}

std::vector<PredictionRecord> UnitForecaster::evaluate(int unit_id, double rul_offset,
                                                       std::uint64_t seed) const {
  std::vector<PredictionRecord> out;
  const double t_last = track_.t[track_.t.size() - 1];
  for (Eigen::Index idx = 0; idx < track_.t.size(); ++idx) {
    const double t = track_.t[idx];
    if (t < cfg_.warmup) continue;
    const auto p = predict(idx, prediction_seed(seed, unit_id, t));
    PredictionRecord r;
    r.unit_id = unit_id;
    r.eval_time = t;
    r.true_rul = rul_offset + t_last - t;
    r.predicted_rul = p.predicted_rul;
    r.ci_low = p.estimate.lower;
    r.ci_high = p.estimate.upper;
    r.method = method_;
    r.censored = p.censored;
    out.push_back(r);
  }
  return out;
}

std::uint64_t prediction_seed(std::uint64_t seed, int unit_id, double cycle) {
  return mix_seed(mix_seed(seed, static_cast<std::uint64_t>(unit_id)),
                  static_cast<std::uint64_t>(std::llround(cycle)));
}

void write_trace(std::ostream& os, const std::vector<DriftPosterior<double>>& trace) {
  os << "t\tpsi\tomega_sq\n";
  for (const auto& p : trace) os << fmt(p.t_last) << '\t' << fmt(p.psi) << '\t' << fmt(p.omega_sq) << '\n';
}

}  // namespace rulkit
