#include "rulkit/trajectory_net.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace rulkit {
namespace {

const std::string kWx = "encoder.w_x";
const std::string kWh = "encoder.w_h";
const std::string kB = "encoder.bias";
const std::string kC1w = "decoder.conv1.weight";
const std::string kC1b = "decoder.conv1.bias";
const std::string kC2w = "decoder.conv2.weight";
const std::string kC2b = "decoder.conv2.bias";
const std::string kHw = "decoder.head.weight";
const std::string kHb = "decoder.head.bias";
const std::string kLogGamma = "variance.log_gamma_sq";
const std::string kLogEta = "variance.log_eta_b_sq";

using ConstMap = Eigen::Map<const MatrixXd>;
using MutMap = Eigen::Map<MatrixXd>;

ConstMap view(const ParamLayout& layout, const VectorXd& v, const std::string& name) {
  const auto& b = layout.find(name);
  return ConstMap(v.data() + b.offset, b.rows, b.cols);
}

MutMap view(const ParamLayout& layout, VectorXd& v, const std::string& name) {
  const auto& b = layout.find(name);
  return MutMap(v.data() + b.offset, b.rows, b.cols);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Same-length 1-D convolution along columns with zero padding.
MatrixXd im2col(const MatrixXd& x, int k) {
  const Eigen::Index c = x.rows(), len = x.cols();
  const int pad = (k - 1) / 2;
  MatrixXd cols = MatrixXd::Zero(c * k, len);
  for (Eigen::Index j = 0; j < len; ++j)
    for (int kk = 0; kk < k; ++kk) {
      const Eigen::Index src = j + kk - pad;
      if (src < 0 || src >= len) continue;
      for (Eigen::Index ch = 0; ch < c; ++ch) cols(ch * k + kk, j) = x(ch, src);
    }
  return cols;
}

MatrixXd col2im(const MatrixXd& cols, Eigen::Index channels, int k) {
  const Eigen::Index len = cols.cols();
  const int pad = (k - 1) / 2;
  MatrixXd x = MatrixXd::Zero(channels, len);
  for (Eigen::Index j = 0; j < len; ++j)
    for (int kk = 0; kk < k; ++kk) {
      const Eigen::Index src = j + kk - pad;
      if (src < 0 || src >= len) continue;
      for (Eigen::Index ch = 0; ch < channels; ++ch) x(ch, src) += cols(ch * k + kk, j);
    }
  return x;
}

struct EncoderCache {
  MatrixXd x;      // 2 x n inputs
  MatrixXd gates;  // 4d x n activated (i, f, g, o)
  MatrixXd c;      // d x n
  MatrixXd h;      // d x n
};

EncoderCache encoder_forward(const TrajectoryModel& m, const VectorXd& t, const VectorXd& z,
                             Eigen::Index n) {
  const int d = m.config().hidden_dim;
  const auto wx = m.block(kWx);
  const auto wh = m.block(kWh);
  const auto b = m.block(kB);
  EncoderCache e;
  e.x.resize(2, n);
  e.x.row(0) = t.head(n).transpose() / m.cycle_scale();
  e.x.row(1) = z.head(n).transpose();
  e.gates.resize(4 * d, n);
  e.c.resize(d, n);
  e.h.resize(d, n);
  VectorXd h = VectorXd::Zero(d), c = VectorXd::Zero(d);
  for (Eigen::Index s = 0; s < n; ++s) {
    VectorXd a = wx * e.x.col(s) + wh * h + b.col(0);
    for (int r = 0; r < d; ++r) {
      a[r] = sigmoid(a[r]);
      a[d + r] = sigmoid(a[d + r]);
      a[2 * d + r] = std::tanh(a[2 * d + r]);
      a[3 * d + r] = sigmoid(a[3 * d + r]);
    }
    c = a.segment(d, d).cwiseProduct(c) + a.head(d).cwiseProduct(a.segment(2 * d, d));
    h = a.segment(3 * d, d).cwiseProduct(c.array().tanh().matrix());
    e.gates.col(s) = a;
    e.c.col(s) = c;
    e.h.col(s) = h;
  }
  return e;
}

void encoder_backward(const TrajectoryModel& m, const EncoderCache& e, const MatrixXd& d_h,
                      VectorXd& grad) {
  const auto& layout = m.layout();
  const int d = m.config().hidden_dim;
  const auto wh = m.block(kWh);
  auto g_wx = view(layout, grad, kWx);
  auto g_wh = view(layout, grad, kWh);
  auto g_b = view(layout, grad, kB);
  const Eigen::Index n = d_h.cols();
  VectorXd dh_next = VectorXd::Zero(d), dc_next = VectorXd::Zero(d);
  VectorXd da(4 * d);
  for (Eigen::Index s = n - 1; s >= 0; --s) {
    const VectorXd dh = d_h.col(s) + dh_next;
    const auto gates = e.gates.col(s);
    const auto i = gates.head(d).array();
    const auto f = gates.segment(d, d).array();
    const auto g = gates.segment(2 * d, d).array();
    const auto o = gates.segment(3 * d, d).array();
    const Eigen::ArrayXd tc = e.c.col(s).array().tanh();
    const Eigen::ArrayXd dc = dc_next.array() + dh.array() * o * (1.0 - tc * tc);
    const Eigen::ArrayXd c_prev = s > 0 ? Eigen::ArrayXd(e.c.col(s - 1).array()) : Eigen::ArrayXd::Zero(d);
    da.head(d) = (dc * g * i * (1.0 - i)).matrix();
    da.segment(d, d) = (dc * c_prev * f * (1.0 - f)).matrix();
    da.segment(2 * d, d) = (dc * i * (1.0 - g * g)).matrix();
    da.segment(3 * d, d) = (dh.array() * tc * o * (1.0 - o)).matrix();
    g_wx.noalias() += da * e.x.col(s).transpose();
    if (s > 0) g_wh.noalias() += da * e.h.col(s - 1).transpose();
    g_b.col(0) += da;
    dh_next.noalias() = wh.transpose() * da;
    dc_next = (dc * f).matrix();
  }
}

struct DecoderCache {
  MatrixXd c1, a1, m1, d1;
  MatrixXd c2, a2, m2, d2;
  VectorXd out;
};

MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64* rng) {
  if (!rng || p == 0.0) return MatrixXd::Ones(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  MatrixXd mask(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index r = 0; r < rows; ++r) mask(r, j) = keep(*rng) ? 1.0 / (1.0 - p) : 0.0;
  return mask;
}

// times: anchor followed by future times, already normalized.
void decoder_forward(const TrajectoryModel& m, const VectorXd& h, const VectorXd& times,
                     std::mt19937_64* rng, DecoderCache& dc) {
  const auto& cfg = m.config();
  const Eigen::Index d = cfg.hidden_dim;
  const Eigen::Index len = times.size();
  MatrixXd x0(d + 1, len);
  x0.topRows(d) = h.replicate(1, len);
  x0.row(d) = times.transpose();

  dc.c1 = im2col(x0, cfg.kernel_sizes[0]);
  dc.a1 = m.block(kC1w) * dc.c1;
  dc.a1.colwise() += m.block(kC1b).col(0);
  dc.m1 = dropout_mask(dc.a1.rows(), len, cfg.dropout_p, rng);
  dc.d1 = dc.a1.cwiseMax(0.0).cwiseProduct(dc.m1);

  dc.c2 = im2col(dc.d1, cfg.kernel_sizes[1]);
  dc.a2 = m.block(kC2w) * dc.c2;
  dc.a2.colwise() += m.block(kC2b).col(0);
  dc.m2 = dropout_mask(dc.a2.rows(), len, cfg.dropout_p, rng);
  dc.d2 = dc.a2.cwiseMax(0.0).cwiseProduct(dc.m2);

  dc.out = (m.block(kHw) * dc.d2).transpose();
  dc.out.array() += m.block(kHb)(0, 0);
}

// Returns the gradient with respect to the health vector.
VectorXd decoder_backward(const TrajectoryModel& m, const DecoderCache& dc, const VectorXd& d_out,
                          VectorXd& grad) {
  const auto& cfg = m.config();
  const auto& layout = m.layout();
  const Eigen::Index d = cfg.hidden_dim;

  view(layout, grad, kHw).noalias() += d_out.transpose() * dc.d2.transpose();
  view(layout, grad, kHb)(0, 0) += d_out.sum();

  MatrixXd d_a2 = (m.block(kHw).transpose() * d_out.transpose()).cwiseProduct(dc.m2);
  d_a2 = (dc.a2.array() > 0.0).select(d_a2, 0.0);
  view(layout, grad, kC2w).noalias() += d_a2 * dc.c2.transpose();
  view(layout, grad, kC2b).col(0) += d_a2.rowwise().sum();

  MatrixXd d_d1 = col2im(m.block(kC2w).transpose() * d_a2, dc.d1.rows(), cfg.kernel_sizes[1]);
  MatrixXd d_a1 = d_d1.cwiseProduct(dc.m1);
  d_a1 = (dc.a1.array() > 0.0).select(d_a1, 0.0);
  view(layout, grad, kC1w).noalias() += d_a1 * dc.c1.transpose();
  view(layout, grad, kC1b).col(0) += d_a1.rowwise().sum();

  const MatrixXd d_x0 = col2im(m.block(kC1w).transpose() * d_a1, d + 1, cfg.kernel_sizes[0]);
  return d_x0.topRows(d).rowwise().sum();
}

// The decoder always spans the full horizon so that a column's output does
// not depend on how many future times were requested; missing times continue
// at the mean requested spacing.
VectorXd decoder_times(const TrajectoryModel& m, double anchor_time, const VectorXd& future) {
  const Eigen::Index horizon = m.config().horizon;
  const Eigen::Index given = future.size();
  if (given > horizon) throw std::invalid_argument("decode: more future times than the horizon");
  VectorXd times(horizon + 1);
  times[0] = anchor_time;
  times.segment(1, given) = future;
  const double step = (future[given - 1] - anchor_time) / static_cast<double>(given);
  for (Eigen::Index j = given + 1; j <= horizon; ++j) times[j] = times[j - 1] + step;
  return times / m.cycle_scale();
}

}  // namespace

void NetConfig::validate() const {
  if (hidden_dim < 1) throw std::invalid_argument("net config: hidden_dim must be >= 1");
  if (horizon < 1) throw std::invalid_argument("net config: horizon must be >= 1");
  for (int i = 0; i < 2; ++i)
    if (conv_filters[i] < 1 || kernel_sizes[i] < 1)
      throw std::invalid_argument("net config: conv filters and kernel sizes must be >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0))
    throw std::invalid_argument("net config: dropout_p must lie in [0, 1)");
  if (!(learning_rate > 0)) throw std::invalid_argument("net config: learning_rate must be positive");
  if (!(decay >= 0)) throw std::invalid_argument("net config: decay must be nonnegative");
  if (epochs < 0 || batch_size < 1) throw std::invalid_argument("net config: bad epochs or batch_size");
  if (!(clip_norm > 0)) throw std::invalid_argument("net config: clip_norm must be positive");
}

TrainingPair::TrainingPair(std::shared_ptr<const Track> series, Eigen::Index history_len,
                           Eigen::Index n_targets)
    : series_(std::move(series)), history_len_(history_len), n_targets_(n_targets) {
  if (!series_) throw std::invalid_argument("training pair: null series");
  if (series_->t.size() != series_->z.size())
    throw std::invalid_argument("training pair: times and values differ in length");
  if (history_len_ < 1 || n_targets_ < 1 || history_len_ + n_targets_ > series_->t.size())
    throw std::invalid_argument("training pair: window outside the series");
  const Eigen::Index first = history_len_ - 1;
  PatternCurve<double> observed(series_->t.segment(first, n_targets_ + 1),
                                series_->z.segment(first, n_targets_ + 1));
  auto basis = variance_basis(observed, observed.front_time());
  drift_basis_ = basis.drift_part.tail(n_targets_);
  noise_basis_ = basis.noise_part.tail(n_targets_);
}

IncrementStats<double> TrainingPair::increment(Eigen::Index j) const {
  const Eigen::Index k = history_len_ + j;
  const double dz = series_->z[k] - series_->z[k - 1];
  return {dz, dz, series_->t[k] - series_->t[k - 1]};
}

std::vector<TrainingPair> make_training_pairs(std::shared_ptr<const Track> series,
                                              Eigen::Index min_history, Eigen::Index horizon,
                                              Eigen::Index stride) {
  if (!series) throw std::invalid_argument("make_training_pairs: null series");
  if (min_history < 1 || horizon < 1 || stride < 1)
    throw std::invalid_argument("make_training_pairs: min_history, horizon and stride must be >= 1");
  std::vector<TrainingPair> out;
  const Eigen::Index n = series->t.size();
  for (Eigen::Index len = min_history; len < n; len += stride)
    out.emplace_back(series, len, std::min(horizon, n - len));
  return out;
}

void ParamLayout::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  blocks_.push_back({std::move(name), rows, cols, size_});
  size_ += rows * cols;
}

const ParamBlock& ParamLayout::find(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw std::out_of_range("no parameter block named " + name);
}

const std::string& ParamLayout::owner(Eigen::Index i) const {
  for (const auto& b : blocks_)
    if (i >= b.offset && i < b.offset + b.size()) return b.name;
  throw std::out_of_range("parameter index outside the layout");
}

TrajectoryModel::TrajectoryModel(NetConfig cfg, double cycle_scale)
    : cfg_(std::move(cfg)), cycle_scale_(cycle_scale) {
  cfg_.validate();
  if (!(cycle_scale_ > 0) || !std::isfinite(cycle_scale_))
    throw std::invalid_argument("trajectory model: cycle_scale must be positive");
  const Eigen::Index d = cfg_.hidden_dim;
  const Eigen::Index f1 = cfg_.conv_filters[0], f2 = cfg_.conv_filters[1];
  layout_.add(kWx, 4 * d, 2);
  layout_.add(kWh, 4 * d, d);
  layout_.add(kB, 4 * d, 1);
  layout_.add(kC1w, f1, (d + 1) * cfg_.kernel_sizes[0]);
  layout_.add(kC1b, f1, 1);
  layout_.add(kC2w, f2, f1 * cfg_.kernel_sizes[1]);
  layout_.add(kC2b, f2, 1);
  layout_.add(kHw, 1, f2);
  layout_.add(kHb, 1, 1);
  layout_.add(kLogGamma, 1, 1);
  layout_.add(kLogEta, 1, 1);
  params_ = VectorXd::Zero(layout_.size());
}

TrajectoryModel TrajectoryModel::initialized(const NetConfig& cfg, double cycle_scale,
                                             std::uint64_t seed) {
  TrajectoryModel m(cfg, cycle_scale);
  std::mt19937_64 rng(seed);
  auto xavier = [&](const std::string& name, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    auto w = m.block(name);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
  };
  const double d = cfg.hidden_dim;
  const double k1 = cfg.kernel_sizes[0], k2 = cfg.kernel_sizes[1];
  const double f1 = cfg.conv_filters[0], f2 = cfg.conv_filters[1];
  xavier(kWx, 2, d);
  xavier(kWh, d, d);
  xavier(kC1w, (d + 1) * k1, f1 * k1);
  xavier(kC2w, f1 * k2, f2 * k2);
  xavier(kHw, f2, 1);
  m.block(kB).middleRows(cfg.hidden_dim, cfg.hidden_dim).setOnes();
  return m;
}

Eigen::Map<const MatrixXd> TrajectoryModel::block(const std::string& name) const {
  return view(layout_, params_, name);
}

Eigen::Map<MatrixXd> TrajectoryModel::block(const std::string& name) {
  return view(layout_, params_, name);
}

NoiseParams<double> TrajectoryModel::noise() const {
  return {std::exp(block(kLogGamma)(0, 0)), std::exp(block(kLogEta)(0, 0)), 1.0};
}

void TrajectoryModel::set_noise(const NoiseParams<double>& np) {
  if (!(np.gamma_sq > 0) || !(np.eta_b_sq > 0))
    throw std::invalid_argument("variance branch needs positive coefficients");
  block(kLogGamma)(0, 0) = std::log(np.gamma_sq);
  block(kLogEta)(0, 0) = std::log(np.eta_b_sq);
}

MatrixXd encode(const TrajectoryModel& model, const VectorXd& t, const VectorXd& z) {
  if (t.size() != z.size() || t.size() == 0)
    throw std::invalid_argument("encode: history must be nonempty with matching lengths");
  return encoder_forward(model, t, z, t.size()).h;
}

VectorXd decode(const TrajectoryModel& model, const VectorXd& h, double anchor_time,
                const VectorXd& future_times) {
  if (h.size() != model.config().hidden_dim)
    throw std::invalid_argument("decode: health vector has the wrong size");
  if (future_times.size() == 0) throw std::invalid_argument("decode: no future times");
  DecoderCache dc;
  decoder_forward(model, h, decoder_times(model, anchor_time, future_times), nullptr, dc);
  return dc.out.head(future_times.size() + 1);
}

PatternCurve<double> forward_from_state(const TrajectoryModel& model, const VectorXd& h,
                                        double anchor_time, double z_last,
                                        const VectorXd& future_times, double psi) {
  if (future_times.size() == 0) throw std::invalid_argument("forward: no future times");
  double prev = anchor_time;
  for (Eigen::Index j = 0; j < future_times.size(); ++j) {
    if (!(future_times[j] > prev))
      throw std::invalid_argument("forward: future times must be strictly increasing and after the history");
    prev = future_times[j];
  }
  if (!(psi != 0.0) || !std::isfinite(psi)) throw std::invalid_argument("forward: psi must be finite and nonzero");
  const VectorXd out = decode(model, h, anchor_time, future_times);
  VectorXd t(future_times.size() + 1);
  t[0] = anchor_time;
  t.tail(future_times.size()) = future_times;
  VectorXd q = (out.array() - out[0] + z_last / psi).matrix();
  return PatternCurve<double>(std::move(t), std::move(q));
}

PatternCurve<double> forward(const TrajectoryModel& model, const VectorXd& history_t,
                             const VectorXd& history_z, const VectorXd& future_times, double psi) {
  const MatrixXd h = encode(model, history_t, history_z);
  const Eigen::Index last = history_t.size() - 1;
  return forward_from_state(model, h.col(last), history_t[last], history_z[last], future_times, psi);
}

double nll_term(double residual, double var) {
  if (!(var > 0)) throw std::invalid_argument("nll: predictive variance must be positive");
  return 0.5 * residual * residual / var + 0.5 * std::log(var);
}

double nll_loss(const PatternCurve<double>& predicted, const TrainingPair& pair,
                const NoiseParams<double>& np) {
  double sum = 0;
  const auto ft = pair.future_times();
  const auto fz = pair.future_values();
  for (Eigen::Index j = 0; j < pair.n_targets(); ++j) {
    const double var = np.gamma_sq * pair.drift_basis()[j] + np.eta_b_sq * pair.noise_basis()[j];
    sum += nll_term(fz[j] - predicted(ft[j]), var);
  }
  return sum / static_cast<double>(pair.n_targets());
}

double batch_loss(const TrajectoryModel& model, const std::vector<const TrainingPair*>& pairs,
                  VectorXd* grad, std::mt19937_64* dropout_rng) {
  if (pairs.empty()) throw std::invalid_argument("batch_loss: no training pairs");
  if (grad) grad->setZero(model.n_params());

  std::vector<std::vector<const TrainingPair*>> groups;
  std::unordered_map<const Track*, std::size_t> group_of;
  double total = 0;
  for (const auto* p : pairs) {
    auto [it, fresh] = group_of.try_emplace(&p->series(), groups.size());
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(p);
    total += static_cast<double>(p->n_targets());
  }

  const auto np = model.noise();
  const int d = model.config().hidden_dim;
  double sum = 0, d_log_gamma = 0, d_log_eta = 0;
  DecoderCache dc;
  for (const auto& group : groups) {
    const Track& series = group.front()->series();
    Eigen::Index max_len = 0;
    for (const auto* p : group) max_len = std::max(max_len, p->history_len());
    const EncoderCache enc = encoder_forward(model, series.t, series.z, max_len);
    MatrixXd d_h;
    if (grad) d_h = MatrixXd::Zero(d, max_len);

    for (const auto* p : group) {
      const Eigen::Index last = p->history_len() - 1;
      const VectorXd future = p->future_times();
      decoder_forward(model, enc.h.col(last), decoder_times(model, p->anchor_time(), future),
                      dropout_rng, dc);
      const auto fz = p->future_values();
      VectorXd d_out = VectorXd::Zero(dc.out.size());
      for (Eigen::Index j = 0; j < p->n_targets(); ++j) {
        const double q = p->anchor_value() + dc.out[j + 1] - dc.out[0];
        const double r = fz[j] - q;
        const double a = np.gamma_sq * p->drift_basis()[j];
        const double b = np.eta_b_sq * p->noise_basis()[j];
        const double var = a + b;
        sum += nll_term(r, var);
        if (grad) {
          const double d_q = -r / var / total;
          d_out[j + 1] += d_q;
          d_out[0] -= d_q;
          const double d_var = 0.5 * (1.0 / var - r * r / (var * var)) / total;
          d_log_gamma += d_var * a;
          d_log_eta += d_var * b;
        }
      }
      if (grad) d_h.col(last) += decoder_backward(model, dc, d_out, *grad);
    }
    if (grad) encoder_backward(model, enc, d_h, *grad);
  }
  if (grad) {
    (*grad)[model.layout().find(kLogGamma).offset] += d_log_gamma;
    (*grad)[model.layout().find(kLogEta).offset] += d_log_eta;
  }
  return sum / total;
}

GradCheckReport compare_gradients(const VectorXd& analytic, const VectorXd& numeric,
                                  const ParamLayout& layout, double abs_floor) {
  if (analytic.size() != numeric.size() || analytic.size() != layout.size())
    throw std::invalid_argument("compare_gradients: size mismatch");
  GradCheckReport r;
  double worst = -1;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double scale = std::max(std::abs(a), std::abs(n));
    const double err = std::abs(a - n);
    double score;
    if (scale < abs_floor) {
      ++r.abs_compared;
      r.max_abs_error = std::max(r.max_abs_error, err);
      score = err < 1e-8 ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
      const double rel = err / scale;
      r.max_rel_error = std::max(r.max_rel_error, rel);
      score = rel;
    }
    if (score > worst) {
      worst = score;
      r.worst_index = i;
    }
  }
  if (r.worst_index >= 0) r.worst_block = layout.owner(r.worst_index);
  return r;
}

GradCheckReport grad_check(const TrajectoryModel& model, const TrainingPair& pair, double epsilon) {
  const std::vector<const TrainingPair*> batch{&pair};
  VectorXd analytic;
  batch_loss(model, batch, &analytic);
  TrajectoryModel probe = model;
  VectorXd numeric(model.n_params());
  for (Eigen::Index i = 0; i < model.n_params(); ++i) {
    const double orig = probe.params()[i];
    probe.params()[i] = orig + epsilon;
    const double up = batch_loss(probe, batch);
    probe.params()[i] = orig - epsilon;
    const double down = batch_loss(probe, batch);
    probe.params()[i] = orig;
    numeric[i] = (up - down) / (2 * epsilon);
  }
  return compare_gradients(analytic, numeric, model.layout());
}

namespace {

// Fit the two variance terms to residuals of a naive forecast (anchor plus the
// pooled rate): var = s2 * (x * A / ma + (1 - x) * B / mb), s2 profiled out,
// x by Brent on [0, 1].
NoiseParams<double> initial_noise(const std::vector<TrainingPair>& pairs) {
  std::unordered_map<const Track*, bool> seen;
  double dz = 0, dt = 0;
  for (const auto& p : pairs) {
    const Track& s = p.series();
    if (!seen.try_emplace(&s, true).second) continue;
    const Eigen::Index n = s.t.size();
    if (n < 2) continue;
    dz += s.z[n - 1] - s.z[0];
    dt += s.t[n - 1] - s.t[0];
  }
  const double rate = dt > 0 ? dz / dt : 0.0;

  struct Term {
    double r2, a, b;
  };
  std::vector<Term> terms;
  std::vector<double> as, bs;
  for (const auto& p : pairs) {
    const auto ft = p.future_times();
    const auto fz = p.future_values();
    for (Eigen::Index j = 0; j < p.n_targets(); ++j) {
      const double r = fz[j] - p.anchor_value() - rate * (ft[j] - p.anchor_time());
      terms.push_back({r * r, p.drift_basis()[j], p.noise_basis()[j]});
      as.push_back(p.drift_basis()[j]);
      bs.push_back(p.noise_basis()[j]);
    }
  }
  auto median = [](std::vector<double>& v) {
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  const double ma = std::max(median(as), 1e-300), mb = std::max(median(bs), 1e-300);
  constexpr double lo = 1e-4, hi = 1 - 1e-4;
  auto scale = [&](double x) {
    double s = 0;
    for (const auto& t : terms) s += t.r2 / (x * t.a / ma + (1 - x) * t.b / mb);
    return s / static_cast<double>(terms.size());
  };
  auto profile = [&](double x) {
    double logs = 0;
    for (const auto& t : terms) logs += std::log(x * t.a / ma + (1 - x) * t.b / mb);
    return 0.5 * static_cast<double>(terms.size()) * std::log(scale(x)) + 0.5 * logs;
  };
  const double x = boost::math::tools::brent_find_minima(profile, lo, hi, 30).first;
  const double s2 = std::max(scale(x), 1e-20);
  return {std::max(s2 * x / ma, 1e-12), std::max(s2 * (1 - x) / mb, 1e-12), 1.0};
}

}  // namespace

TrajectoryModel train(const std::vector<TrainingPair>& pairs, const NetConfig& cfg,
                      std::uint64_t seed, TrainReport* report, const EpochCallback& on_epoch) {
  cfg.validate();
  if (pairs.empty()) throw std::invalid_argument("train: no training pairs");
  double cycle_scale = 0;
  for (const auto& p : pairs) cycle_scale = std::max(cycle_scale, p.series().t.maxCoeff());

  TrajectoryModel model = TrajectoryModel::initialized(cfg, cycle_scale, mix_seed(seed, 0));
  model.set_noise(initial_noise(pairs));

  const auto& layout = model.layout();
  const Eigen::Index n = model.n_params();
  Eigen::ArrayXd decay_mask = Eigen::ArrayXd::Ones(n);
  decay_mask[layout.find(kLogGamma).offset] = 0;
  decay_mask[layout.find(kLogEta).offset] = 0;

  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  Eigen::ArrayXd m1 = Eigen::ArrayXd::Zero(n), m2 = Eigen::ArrayXd::Zero(n);
  std::mt19937_64 shuffle_rng(mix_seed(seed, 1));
  std::mt19937_64 dropout_rng(mix_seed(seed, 2));
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainReport local;
  local.cycle_scale = cycle_scale;
  VectorXd grad;
  std::vector<const TrainingPair*> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double weighted = 0, terms = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      batch.clear();
      double batch_terms = 0;
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t k = start; k < stop; ++k) {
        batch.push_back(&pairs[order[k]]);
        batch_terms += static_cast<double>(pairs[order[k]].n_targets());
      }
      const double loss = batch_loss(model, batch, &grad, &dropout_rng);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << ", step " << local.steps << ": loss " << loss
            << ", gamma^2 " << model.noise().gamma_sq << ", eta_B^2 " << model.noise().eta_b_sq;
        throw TrainingDiverged(msg.str());
      }
      const double norm = grad.norm();
      if (norm > cfg.clip_norm) grad *= cfg.clip_norm / norm;

      ++local.steps;
      const double t = static_cast<double>(local.steps);
      m1 = beta1 * m1 + (1 - beta1) * grad.array();
      m2 = beta2 * m2 + (1 - beta2) * grad.array().square();
      const Eigen::ArrayXd step = (m1 / (1 - std::pow(beta1, t))) /
                                  ((m2 / (1 - std::pow(beta2, t))).sqrt() + adam_eps);
      model.params().array() -= cfg.learning_rate * (step + cfg.decay * decay_mask * model.params().array());

      weighted += loss * batch_terms;
      terms += batch_terms;
    }
    local.epoch_loss.push_back(weighted / terms);
    if (on_epoch) on_epoch(epoch, local.epoch_loss.back(), model);
  }
  if (report) *report = std::move(local);
  return model;
}

}  // namespace rulkit
