#pragma once

// Histogram-binned regression trees: bagged ensembles (random forest and
// extremely randomized trees) and gradient boosting.

#include "rulkit/common.hpp"

#include "json.hpp"

#include <memory>
#include <string>
#include <vector>

namespace rulkit {

class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual void fit(const MatrixXd& x, const VectorXd& y, std::uint64_t seed) = 0;
  virtual VectorXd predict(const MatrixXd& x) const = 0;
  virtual std::string kind() const = 0;
  virtual nlohmann::json to_json() const = 0;
};

struct TreeNode {
  int feature{-1};  ///< -1 marks a leaf
  double threshold{0};
  int left{-1};
  int right{-1};
  double value{0};
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(const double* row, Eigen::Index stride) const;
  nlohmann::json to_json() const;
  static Tree from_json(const nlohmann::json& j);
};

struct TreeParams {
  int max_depth{8};
  int min_leaf{20};
  double max_features{1.0};      ///< fraction of features tried per split
  bool random_threshold{false};  ///< one random cut per feature instead of the best
  int max_bins{64};
};

/// Random forest (bootstrap, best split) or extra trees (no bootstrap,
/// random cuts), depending on the flags.
class TreeEnsemble final : public Regressor {
 public:
  TreeEnsemble(std::string kind, int n_trees, bool bootstrap, TreeParams params);

  static std::unique_ptr<TreeEnsemble> random_forest(int n_trees = 30, int max_depth = 10);
  static std::unique_ptr<TreeEnsemble> extra_trees(int n_trees = 30, int max_depth = 10);

  void fit(const MatrixXd& x, const VectorXd& y, std::uint64_t seed) override;
  VectorXd predict(const MatrixXd& x) const override;
  std::string kind() const override { return kind_; }
  nlohmann::json to_json() const override;
  static std::unique_ptr<TreeEnsemble> from_json(const nlohmann::json& j);

  const std::vector<Tree>& trees() const noexcept { return trees_; }

 private:
  std::string kind_;
  int n_trees_;
  bool bootstrap_;
  TreeParams params_;
  std::vector<Tree> trees_;
};

/// Least-squares boosting of shallow trees (depth 1 gives stumps).
class GradientBoosting final : public Regressor {
 public:
  GradientBoosting(int n_rounds = 150, double learning_rate = 0.1, int max_depth = 3,
                   double subsample = 0.8);

  void fit(const MatrixXd& x, const VectorXd& y, std::uint64_t seed) override;
  VectorXd predict(const MatrixXd& x) const override;
  std::string kind() const override { return "gradient_boosting"; }
  nlohmann::json to_json() const override;
  static std::unique_ptr<GradientBoosting> from_json(const nlohmann::json& j);

 private:
  int n_rounds_;
  double learning_rate_;
  double subsample_;
  TreeParams params_;
  double base_{0};
  std::vector<Tree> trees_;
};

/// Always predicts a fixed value; useful as a stacking test double.
class ConstantRegressor final : public Regressor {
 public:
  explicit ConstantRegressor(double value = 0) : value_(value) {}
  void fit(const MatrixXd&, const VectorXd&, std::uint64_t) override {}
  VectorXd predict(const MatrixXd& x) const override { return VectorXd::Constant(x.rows(), value_); }
  std::string kind() const override { return "constant"; }
  nlohmann::json to_json() const override { return {{"kind", "constant"}, {"value", value_}}; }

 private:
  double value_;
};

std::unique_ptr<Regressor> make_regressor(const std::string& kind);
std::unique_ptr<Regressor> regressor_from_json(const nlohmann::json& j);

}  // namespace rulkit
