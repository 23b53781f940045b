#include "rulkit/experiment.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace rulkit;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string subset;
  std::vector<std::string> methods;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override the config seed");
  cmd->add_option("--subset", c.subset, "FD001..FD004")->check(CLI::IsMember({"FD001", "FD002", "FD003", "FD004"}));
  cmd->add_option("--method", c.methods, "adaptive-dnn, dnn, adaptive-wiener, wiener (repeatable)");
  cmd->add_option("--out", c.out, "Output directory");
}

ExperimentConfig resolve(const Common& c, bool subset_is_training) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (!c.methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : c.methods) cfg.methods.push_back(parse_method(m));
  }
  if (subset_is_training && !c.subset.empty()) cfg.train_subset = c.subset;
  cfg.validate();
  return cfg;
}

void write_config_copy(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out());
  std::ofstream os(cfg.out() / "config.json");
  os << nlohmann::json(cfg).dump(1) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Remaining-useful-life prognosis with a learned Wiener degradation model"};
  app.require_subcommand(1);

  Common common;
  auto* ingest = app.add_subcommand("ingest", "Parse C-MAPSS files, fit the health-index model, write HI series");
  auto* train = app.add_subcommand("train", "Train the trajectory network and fit the Wiener baseline");
  auto* predict = app.add_subcommand("predict", "RUL distributions: one unit at one cycle, or every cycle of every set");
  auto* evaluate = app.add_subcommand("evaluate", "Comparison tables and per-cycle RMSE from saved predictions");
  auto* bench = app.add_subcommand("bench", "Runtime of interpolation vs path simulation");
  auto* run_all = app.add_subcommand("run-all", "ingest, train, predict and evaluate");
  auto* synth = app.add_subcommand("synth", "Write synthetic C-MAPSS-format files");
  for (auto* c : {ingest, train, predict, evaluate, bench, run_all}) add_common(c, common);

  std::string set;
  std::optional<int> unit, cycle;
  predict->add_option("--set", set, "Evaluation set, e.g. FD002-heldout or FD001-test");
  predict->add_option("--unit", unit, "Unit id (single prediction)");
  predict->add_option("--cycle", cycle, "Prediction cycle (single prediction)");

  std::size_t reps = 20;
  bench->add_option("--repetitions", reps, "Timed runs per setting")->check(CLI::PositiveNumber);

  std::string synth_dir = "data/synthetic";
  std::vector<std::string> synth_subsets{"FD001:100", "FD002:260", "FD003:100", "FD004:248"};
  std::uint64_t synth_seed = 7;
  synth->add_option("--dir", synth_dir, "Output directory");
  synth->add_option("--subsets", synth_subsets, "NAME:UNITS entries");
  synth->add_option("--seed", synth_seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      const auto cfg = resolve(common, true);
      write_config_copy(cfg);
      cmd_ingest(cfg, std::cout);
    } else if (*train) {
      cmd_train(resolve(common, true), std::cout);
    } else if (*predict) {
      const auto cfg = resolve(common, false);
      if (unit || cycle) {
        if (!unit || !cycle) throw std::invalid_argument("predict: --unit and --cycle go together");
        std::string name = set;
        if (name.empty())
          name = common.subset.empty() || common.subset == cfg.train_subset ? cfg.train_subset + "-heldout"
                                                                            : common.subset + "-test";
        const Method m = common.methods.empty() ? Method::adaptive_dnn : parse_method(common.methods.front());
        cmd_predict_one(cfg, name, *unit, *cycle, m, std::cout);
      } else {
        cmd_predict_all(cfg, common.subset, std::cout);
      }
    } else if (*evaluate) {
      cmd_evaluate(resolve(common, false), common.subset, std::cout);
    } else if (*bench) {
      cmd_bench(resolve(common, false), reps, std::cout);
    } else if (*run_all) {
      const auto cfg = resolve(common, true);
      write_config_copy(cfg);
      cmd_ingest(cfg, std::cout);
      cmd_train(cfg, std::cout);
      cmd_predict_all(cfg, "", std::cout);
      cmd_evaluate(cfg, "", std::cout);
    } else if (*synth) {
      std::vector<std::pair<std::string, std::size_t>> subsets;
      for (const auto& s : synth_subsets) {
        const auto colon = s.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("synth: expected NAME:UNITS, got " + s);
        subsets.emplace_back(s.substr(0, colon), std::stoul(s.substr(colon + 1)));
      }
      cmd_synth(synth_dir, subsets, synth_seed, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
