#include "rulkit/trees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace rulkit {
namespace {

// Per-feature split candidates; code(x) = number of thresholds below x, so
// "x <= thresholds[b]" is the same test as "code <= b".
struct Binned {
  std::vector<std::vector<double>> thresholds;
  std::vector<std::vector<std::uint16_t>> codes;  // [feature][row]
};

Binned bin_features(const MatrixXd& x, int max_bins) {
  Binned b;
  const Eigen::Index n = x.rows();
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    std::vector<double> v(x.col(f).data(), x.col(f).data() + n);
    std::sort(v.begin(), v.end());
    std::vector<double> u = v;
    u.erase(std::unique(u.begin(), u.end()), u.end());
    std::vector<double> thr;
    if (static_cast<int>(u.size()) <= max_bins) {
      for (std::size_t i = 0; i + 1 < u.size(); ++i) thr.push_back(0.5 * (u[i] + u[i + 1]));
    } else {
      for (int k = 1; k < max_bins; ++k) thr.push_back(v[static_cast<std::size_t>(k * n / max_bins)]);
      thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
      if (!thr.empty() && thr.back() >= u.back()) thr.pop_back();
    }
    std::vector<std::uint16_t> code(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      code[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(
          std::lower_bound(thr.begin(), thr.end(), x(i, f)) - thr.begin());
    b.thresholds.push_back(std::move(thr));
    b.codes.push_back(std::move(code));
  }
  return b;
}

class TreeBuilder {
 public:
  TreeBuilder(const Binned& bins, const VectorXd& y, const TreeParams& p, std::mt19937_64& rng)
      : bins_(bins), y_(y), p_(p), rng_(rng) {}

  Tree build(std::vector<std::uint32_t> rows) {
    Tree tree;
    grow(tree, rows, 0);
    return tree;
  }

 private:
  int grow(Tree& tree, std::vector<std::uint32_t>& rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double sum = 0;
    for (auto r : rows) sum += y_[r];
    const double n = static_cast<double>(rows.size());
    tree.nodes[static_cast<std::size_t>(id)].value = sum / n;
    if (depth >= p_.max_depth || rows.size() < 2 * static_cast<std::size_t>(p_.min_leaf)) return id;

    const int n_features = static_cast<int>(bins_.codes.size());
    std::vector<int> features(static_cast<std::size_t>(n_features));
    std::iota(features.begin(), features.end(), 0);
    std::shuffle(features.begin(), features.end(), rng_);
    const int tries = std::clamp(static_cast<int>(std::ceil(p_.max_features * n_features)), 1, n_features);

    double best_gain = 1e-12 * std::max(1.0, sum * sum / n);
    int best_f = -1, best_b = -1;
    const double parent = sum * sum / n;
    for (int k = 0; k < tries; ++k) {
      const int f = features[static_cast<std::size_t>(k)];
      const auto& code = bins_.codes[static_cast<std::size_t>(f)];
      const std::size_t nb = bins_.thresholds[static_cast<std::size_t>(f)].size() + 1;
      if (nb < 2) continue;
      hist_sum_.assign(nb, 0.0);
      hist_cnt_.assign(nb, 0.0);
      int lo = static_cast<int>(nb), hi = -1;
      for (auto r : rows) {
        const int c = code[r];
        hist_sum_[static_cast<std::size_t>(c)] += y_[r];
        hist_cnt_[static_cast<std::size_t>(c)] += 1;
        lo = std::min(lo, c);
        hi = std::max(hi, c);
      }
      if (lo >= hi) continue;
      auto gain_at = [&](int b, double& s_left, double& n_left) {
        s_left = 0;
        n_left = 0;
        for (int c = lo; c <= b; ++c) {
          s_left += hist_sum_[static_cast<std::size_t>(c)];
          n_left += hist_cnt_[static_cast<std::size_t>(c)];
        }
      };
      if (p_.random_threshold) {
        std::uniform_int_distribution<int> pick(lo, hi - 1);
        const int b = pick(rng_);
        double sl, nl;
        gain_at(b, sl, nl);
        const double nr = n - nl, sr = sum - sl;
        if (nl < p_.min_leaf || nr < p_.min_leaf) continue;
        const double gain = sl * sl / nl + sr * sr / nr - parent;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = f;
          best_b = b;
        }
      } else {
        double sl = 0, nl = 0;
        for (int b = lo; b < hi; ++b) {
          sl += hist_sum_[static_cast<std::size_t>(b)];
          nl += hist_cnt_[static_cast<std::size_t>(b)];
          const double nr = n - nl, sr = sum - sl;
          if (nl < p_.min_leaf || nr < p_.min_leaf) continue;
          const double gain = sl * sl / nl + sr * sr / nr - parent;
          if (gain > best_gain) {
            best_gain = gain;
            best_f = f;
            best_b = b;
          }
        }
      }
    }
    if (best_f < 0) return id;

    const auto& code = bins_.codes[static_cast<std::size_t>(best_f)];
    std::vector<std::uint32_t> left, right;
    for (auto r : rows) (code[r] <= best_b ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best_f;
    node.threshold = bins_.thresholds[static_cast<std::size_t>(best_f)][static_cast<std::size_t>(best_b)];
    const int l = grow(tree, left, depth + 1);
    const int r = grow(tree, right, depth + 1);
    tree.nodes[static_cast<std::size_t>(id)].left = l;
    tree.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  const Binned& bins_;
  const VectorXd& y_;
  const TreeParams& p_;
  std::mt19937_64& rng_;
  std::vector<double> hist_sum_, hist_cnt_;
};

void check_xy(const MatrixXd& x, const VectorXd& y) {
  if (x.rows() == 0 || x.rows() != y.size())
    throw std::invalid_argument("regressor fit: need matching, nonempty features and targets");
  if (x.rows() > std::numeric_limits<std::uint32_t>::max())
    throw std::invalid_argument("regressor fit: too many rows");
}

VectorXd predict_sum(const std::vector<Tree>& trees, const MatrixXd& x) {
  VectorXd out = VectorXd::Zero(x.rows());
  for (const auto& t : trees)
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] += t.predict(x.data() + i, x.rows());
  return out;
}

TreeParams params_from_json(const nlohmann::json& j) {
  TreeParams p;
  p.max_depth = j.at("max_depth");
  p.min_leaf = j.at("min_leaf");
  p.max_features = j.at("max_features");
  p.random_threshold = j.at("random_threshold");
  p.max_bins = j.at("max_bins");
  return p;
}

nlohmann::json params_to_json(const TreeParams& p) {
  return {{"max_depth", p.max_depth},
          {"min_leaf", p.min_leaf},
          {"max_features", p.max_features},
          {"random_threshold", p.random_threshold},
          {"max_bins", p.max_bins}};
}

std::vector<Tree> trees_from_json(const nlohmann::json& j) {
  std::vector<Tree> out;
  for (const auto& t : j) out.push_back(Tree::from_json(t));
  return out;
}

}  // namespace

double Tree::predict(const double* row, Eigen::Index stride) const {
  int k = 0;
  while (true) {
    const auto& n = nodes[static_cast<std::size_t>(k)];
    if (n.feature < 0) return n.value;
    k = row[n.feature * stride] <= n.threshold ? n.left : n.right;
  }
}

nlohmann::json Tree::to_json() const {
  nlohmann::json f = nlohmann::json::array(), t = nlohmann::json::array(), l = nlohmann::json::array(),
                 r = nlohmann::json::array(), v = nlohmann::json::array();
  for (const auto& n : nodes) {
    f.push_back(n.feature);
    t.push_back(n.threshold);
    l.push_back(n.left);
    r.push_back(n.right);
    v.push_back(n.value);
  }
  return {{"feature", f}, {"threshold", t}, {"left", l}, {"right", r}, {"value", v}};
}

Tree Tree::from_json(const nlohmann::json& j) {
  Tree tree;
  const auto& f = j.at("feature");
  tree.nodes.resize(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto& n = tree.nodes[i];
    n.feature = f[i];
    n.threshold = j.at("threshold")[i];
    n.left = j.at("left")[i];
    n.right = j.at("right")[i];
    n.value = j.at("value")[i];
    const auto size = static_cast<int>(f.size());
    if (n.feature >= 0 && (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) ||
                           n.left >= size || n.right >= size))
      throw std::runtime_error("tree: malformed node links");
  }
  if (tree.nodes.empty()) throw std::runtime_error("tree: no nodes");
  return tree;
}

TreeEnsemble::TreeEnsemble(std::string kind, int n_trees, bool bootstrap, TreeParams params)
    : kind_(std::move(kind)), n_trees_(n_trees), bootstrap_(bootstrap), params_(params) {
  if (n_trees_ < 1) throw std::invalid_argument("tree ensemble: need at least one tree");
}

std::unique_ptr<TreeEnsemble> TreeEnsemble::random_forest(int n_trees, int max_depth) {
  TreeParams p;
  p.max_depth = max_depth;
  p.min_leaf = 10;
  p.max_features = 0.6;
  return std::make_unique<TreeEnsemble>("random_forest", n_trees, true, p);
}

std::unique_ptr<TreeEnsemble> TreeEnsemble::extra_trees(int n_trees, int max_depth) {
  TreeParams p;
  p.max_depth = max_depth;
  p.min_leaf = 10;
  p.max_features = 1.0;
  p.random_threshold = true;
  return std::make_unique<TreeEnsemble>("extra_trees", n_trees, false, p);
}

void TreeEnsemble::fit(const MatrixXd& x, const VectorXd& y, std::uint64_t seed) {
  check_xy(x, y);
  const Binned bins = bin_features(x, params_.max_bins);
  const auto n = static_cast<std::uint32_t>(x.rows());
  trees_.clear();
  for (int t = 0; t < n_trees_; ++t) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<std::uint32_t> rows(n);
    if (bootstrap_) {
      std::uniform_int_distribution<std::uint32_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0u);
    }
    TreeBuilder builder(bins, y, params_, rng);
    trees_.push_back(builder.build(std::move(rows)));
  }
}

VectorXd TreeEnsemble::predict(const MatrixXd& x) const {
  if (trees_.empty()) throw std::logic_error("tree ensemble used before fit");
  return predict_sum(trees_, x) / static_cast<double>(trees_.size());
}

nlohmann::json TreeEnsemble::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"kind", kind_}, {"n_trees", n_trees_}, {"bootstrap", bootstrap_},
          {"params", params_to_json(params_)}, {"trees", trees}};
}

std::unique_ptr<TreeEnsemble> TreeEnsemble::from_json(const nlohmann::json& j) {
  auto m = std::make_unique<TreeEnsemble>(j.at("kind").get<std::string>(), j.at("n_trees").get<int>(),
                                          j.at("bootstrap").get<bool>(), params_from_json(j.at("params")));
  m->trees_ = trees_from_json(j.at("trees"));
  return m;
}

GradientBoosting::GradientBoosting(int n_rounds, double learning_rate, int max_depth, double subsample)
    : n_rounds_(n_rounds), learning_rate_(learning_rate), subsample_(subsample) {
  if (n_rounds_ < 1 || !(learning_rate_ > 0) || !(subsample_ > 0 && subsample_ <= 1))
    throw std::invalid_argument("gradient boosting: bad settings");
  params_.max_depth = max_depth;
  params_.min_leaf = 10;
}

void GradientBoosting::fit(const MatrixXd& x, const VectorXd& y, std::uint64_t seed) {
  check_xy(x, y);
  const Binned bins = bin_features(x, params_.max_bins);
  const auto n = static_cast<std::uint32_t>(x.rows());
  base_ = y.mean();
  VectorXd f = VectorXd::Constant(n, base_);
  trees_.clear();
  std::mt19937_64 rng(seed);
  std::vector<std::uint32_t> all(n);
  std::iota(all.begin(), all.end(), 0u);
  const auto take = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::llround(subsample_ * n)));
  for (int round = 0; round < n_rounds_; ++round) {
    const VectorXd resid = y - f;
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<std::uint32_t> rows(all.begin(), all.begin() + take);
    TreeBuilder builder(bins, resid, params_, rng);
    Tree tree = builder.build(std::move(rows));
    for (auto& node : tree.nodes) node.value *= learning_rate_;
    for (Eigen::Index i = 0; i < x.rows(); ++i) f[i] += tree.predict(x.data() + i, x.rows());
    trees_.push_back(std::move(tree));
  }
}

VectorXd GradientBoosting::predict(const MatrixXd& x) const {
  if (trees_.empty()) throw std::logic_error("gradient boosting used before fit");
  return (predict_sum(trees_, x).array() + base_).matrix();
}

nlohmann::json GradientBoosting::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"kind", kind()},         {"n_rounds", n_rounds_},  {"learning_rate", learning_rate_},
          {"subsample", subsample_}, {"params", params_to_json(params_)}, {"base", base_},
          {"trees", trees}};
}

std::unique_ptr<GradientBoosting> GradientBoosting::from_json(const nlohmann::json& j) {
  const auto p = params_from_json(j.at("params"));
  auto m = std::make_unique<GradientBoosting>(j.at("n_rounds").get<int>(), j.at("learning_rate").get<double>(),
                                              p.max_depth, j.at("subsample").get<double>());
  m->params_ = p;
  m->base_ = j.at("base");
  m->trees_ = trees_from_json(j.at("trees"));
  return m;
}

std::unique_ptr<Regressor> make_regressor(const std::string& kind) {
  if (kind == "random_forest") return TreeEnsemble::random_forest();
  if (kind == "extra_trees") return TreeEnsemble::extra_trees();
  if (kind == "gradient_boosting") return std::make_unique<GradientBoosting>();
  if (kind == "gradient_boosted_stumps") return std::make_unique<GradientBoosting>(300, 0.1, 1, 0.8);
  throw std::invalid_argument("unknown regressor kind: " + kind);
}

std::unique_ptr<Regressor> regressor_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "random_forest" || kind == "extra_trees") return TreeEnsemble::from_json(j);
  if (kind == "gradient_boosting") return GradientBoosting::from_json(j);
  if (kind == "constant") return std::make_unique<ConstantRegressor>(j.at("value").get<double>());
  throw std::runtime_error("unknown regressor kind in model file: " + kind);
}

}  // namespace rulkit
