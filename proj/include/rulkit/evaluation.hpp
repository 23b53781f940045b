#pragma once

// RMSE / PICP / MPIW over per-cycle RUL predictions and the method
// comparison tables built from them.

#include "rulkit/common.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rulkit {

enum class Method { adaptive_dnn, dnn, adaptive_wiener, wiener };

inline constexpr Method kAllMethods[] = {Method::adaptive_dnn, Method::dnn, Method::adaptive_wiener,
                                         Method::wiener};

std::string method_name(Method m);
Method parse_method(const std::string& name);
bool is_adaptive(Method m) noexcept;
bool is_dnn(Method m) noexcept;
/// Plain DNN predictions are reported without an interval.
bool is_probabilistic(Method m) noexcept;

struct PredictionRecord {
  int unit_id{0};
  double eval_time{0};
  double true_rul{0};
  double predicted_rul{0};
  double ci_low{0};
  double ci_high{0};
  Method method{Method::adaptive_dnn};
  bool censored{false};  ///< no sampled curve crossed; prediction is the grid horizon

  void validate() const;
};

double rmse(const std::vector<PredictionRecord>& records);
/// Fraction with ci_low <= true_rul <= ci_high.
double picp(const std::vector<PredictionRecord>& records);
double mpiw(const std::vector<PredictionRecord>& records);

struct ComparisonRow {
  Method method{Method::adaptive_dnn};
  std::size_t count{0};
  double rmse{0};
  std::optional<double> picp;
  std::optional<double> mpiw;
};

/// One row per method present, in the canonical method order.
std::vector<ComparisonRow> comparison_table(const std::vector<PredictionRecord>& records);

/// Aligned text table; absent metrics print as "-".
void write_comparison(std::ostream& os, const std::vector<ComparisonRow>& rows, double level);
/// Machine-readable "method<TAB>n<TAB>rmse<TAB>picp<TAB>mpiw" rows; absent as "NA".
void write_comparison_rows(std::ostream& os, const std::vector<ComparisonRow>& rows);

struct OrderingCheck {
  std::string name;
  bool passed{false};
  bool evaluated{false};  ///< false when a method involved is missing
};

/// adaptive-dnn <= dnn, dnn <= adaptive-wiener, adaptive-dnn <= adaptive-wiener,
/// adaptive-wiener <= wiener (all on RMSE).
std::vector<OrderingCheck> ordering_checks(const std::vector<ComparisonRow>& rows);

struct CycleRmse {
  int cycle{0};
  Method method{Method::adaptive_dnn};
  double rmse{0};
  std::size_t units{0};
};

/// RMSE per absolute evaluation cycle, averaged over the units still alive
/// at that cycle.
std::vector<CycleRmse> per_cycle_rmse(const std::vector<PredictionRecord>& records);
void write_cycle_rmse(std::ostream& os, const std::vector<CycleRmse>& rows);

void write_records(std::ostream& os, const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> read_records(std::istream& is, const std::string& name);

}  // namespace rulkit
