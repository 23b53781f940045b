#pragma once

// NASA C-MAPSS turbofan files and the stacked-regression health index.

#include "rulkit/common.hpp"
#include "rulkit/trajectory_net.hpp"
#include "rulkit/trees.hpp"

#include "json.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace rulkit {

inline constexpr int kSettingColumns = 3;
inline constexpr int kSensorColumns = 21;
inline constexpr double kHiThreshold = 0.95;

struct UnitSeries {
  int unit_id{0};
  VectorXd cycles;    ///< 1..T
  MatrixXd settings;  ///< T x 3
  MatrixXd sensors;   ///< T x 21, column k holds sensor s_{k+1}
  VectorXd hi;        ///< empty until compute_hi
  double failure_threshold{kHiThreshold};

  Eigen::Index length() const noexcept { return cycles.size(); }
  /// Cycles and health index as a degradation track; requires hi.
  Track track() const;
};

/// Whitespace-separated rows of 26 numbers: unit, cycle, 3 settings, 21 sensors.
std::vector<UnitSeries> parse_cmapss(const std::string& path);
std::vector<UnitSeries> parse_cmapss(std::istream& is, const std::string& name);

/// Same layout, shortest round-trip number formatting.
void write_cmapss(std::ostream& os, const std::vector<UnitSeries>& units);

/// One true RUL per line (test-set truth files).
std::vector<double> parse_rul_truth(const std::string& path);

/// (t - min) / (max - min) per engine.
VectorXd normalize_cycles(const UnitSeries& unit);

/// Spearman rank correlation with average ranks for ties.
double spearman(const VectorXd& a, const VectorXd& b);

struct FeatureScaler {
  VectorXd mean;
  VectorXd scale;
};

/// Base regressors mapping (selected sensors, cycle) to normalized cycles;
/// the health index is their clipped average.
struct StackedHIModel {
  std::vector<int> sensor_ids;
  FeatureScaler scaler;
  std::vector<std::unique_ptr<Regressor>> base_models;
  std::vector<std::string> warnings;

  /// Standardized feature matrix for one unit.
  MatrixXd features(const UnitSeries& unit) const;
  /// Unclipped per-model predictions, one column per base model.
  MatrixXd base_predictions(const UnitSeries& unit) const;

  nlohmann::json to_json() const;
  static StackedHIModel from_json(const nlohmann::json& j);
};

inline const std::vector<int> kDefaultSensors{2, 3, 4, 11, 17};
inline const std::vector<std::string> kDefaultRegressors{"random_forest", "extra_trees",
                                                         "gradient_boosting"};

StackedHIModel fit_stacked_hi(const std::vector<UnitSeries>& train_units,
                              const std::vector<int>& sensor_ids, std::uint64_t seed,
                              const std::vector<std::string>& regressors = kDefaultRegressors);

/// Stacks already-constructed regressors (fitted here).
StackedHIModel fit_stacked_hi(const std::vector<UnitSeries>& train_units,
                              const std::vector<int>& sensor_ids, std::uint64_t seed,
                              std::vector<std::unique_ptr<Regressor>> base_models);

UnitSeries compute_hi(const UnitSeries& unit, const StackedHIModel& model);

/// Unit-level seeded split with ceil(fraction n) training units.
std::pair<std::vector<UnitSeries>, std::vector<UnitSeries>> split_train_test(
    const std::vector<UnitSeries>& units, double train_fraction, std::uint64_t seed);

/// "unit<TAB>cycle<TAB>hi" rows.
void write_hi(std::ostream& os, const std::vector<UnitSeries>& units);
/// Reads write_hi output back into units carrying only cycles and hi.
std::vector<UnitSeries> read_hi(const std::string& path);

}  // namespace rulkit
