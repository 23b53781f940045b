#pragma once

// Experiment configuration and the pipeline stages behind the command line:
// ingest -> train -> predict -> evaluate, each reading and writing artifacts
// under the output directory.

#include "rulkit/cmapss.hpp"
#include "rulkit/evaluation.hpp"
#include "rulkit/prognosis.hpp"
#include "rulkit/trajectory_net.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rulkit {

struct ExperimentConfig {
  std::string data_dir{"data/CMAPSS"};
  std::string train_subset{"FD002"};
  std::vector<std::string> eval_subsets{"FD001", "FD003", "FD004"};
  std::vector<int> sensors{kDefaultSensors};
  std::vector<std::string> regressors{kDefaultRegressors};
  double train_fraction{0.8};
  NetConfig net;
  int min_history{20};
  int pair_stride{10};
  int wiener_horizon{50};
  int wiener_stride{10};
  std::optional<double> gamma_sq_override;
  std::optional<double> eta_b_sq_override;
  PrognosisConfig prognosis;
  std::uint64_t seed{42};
  std::string out_dir{"out"};
  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};

  void validate() const;

  /// FNV-1a 64 of the canonical JSON without out_dir, as 16 hex digits.
  std::string hash() const;
  /// "# config_hash=<hash> seed=<seed>"
  std::string artifact_header() const;

  std::filesystem::path out() const { return out_dir; }
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_config(const std::string& path);

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a(std::string_view bytes) noexcept;

/// A set of units to evaluate: HI tracks plus the RUL remaining after each
/// unit's last cycle (0 for run-to-failure units).
struct EvalSet {
  std::string name;
  std::vector<UnitSeries> units;
  std::vector<double> rul_offset;
};

/// Names of the evaluation sets produced by ingest: "<train>-heldout" and
/// "<S>-test" for each evaluation subset.
std::vector<std::string> eval_set_names(const ExperimentConfig& cfg);

void cmd_ingest(const ExperimentConfig& cfg, std::ostream& log);
void cmd_train(const ExperimentConfig& cfg, std::ostream& log);

struct TrainedMethods {
  std::optional<TrajectoryModel> net;
  NoiseParams<double> net_noise;
  NoiseParams<double> wiener;
};

TrainedMethods load_trained(const ExperimentConfig& cfg);
EvalSet load_eval_set(const ExperimentConfig& cfg, const std::string& name);
std::vector<UnitSeries> load_train_hi(const ExperimentConfig& cfg);

/// Per-cycle predictions for every selected set and method, written to
/// predictions/<set>.tsv. `only_subset` restricts the sets by subset prefix.
void cmd_predict_all(const ExperimentConfig& cfg, const std::string& only_subset, std::ostream& log);

/// One unit at one cycle: writes samples, density and posterior trace.
Prognosis cmd_predict_one(const ExperimentConfig& cfg, const std::string& set, int unit, int cycle,
                          Method method, std::ostream& log);

struct SetEvaluation {
  std::string set;
  std::vector<ComparisonRow> rows;
  std::vector<OrderingCheck> checks;
};

std::vector<SetEvaluation> cmd_evaluate(const ExperimentConfig& cfg, const std::string& only_subset,
                                        std::ostream& log);

void cmd_bench(const ExperimentConfig& cfg, std::size_t repetitions, std::ostream& log);

/// Writes C-MAPSS-format train/test/RUL files for the given subsets.
void cmd_synth(const std::string& dir, const std::vector<std::pair<std::string, std::size_t>>& subsets,
               std::uint64_t seed, std::ostream& log);

}  // namespace rulkit
