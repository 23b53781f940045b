#include "rulkit/experiment.hpp"

#include "rulkit/benchmark.hpp"
#include "rulkit/checkpoint.hpp"
#include "rulkit/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace rulkit {
namespace {

using Json = nlohmann::json;

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
  body(os);
  os.flush();
  if (!os) throw std::runtime_error(path.string() + ": write failed");
}

Json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error(path.string() + ": cannot open file");
  try {
    return Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::string subset_file(const ExperimentConfig& cfg, const std::string& prefix, const std::string& subset) {
  return (fs::path(cfg.data_dir) / (prefix + "_" + subset + ".txt")).string();
}

fs::path hi_path(const ExperimentConfig& cfg, const std::string& name) {
  return cfg.out() / "hi" / (name + ".tsv");
}

fs::path offsets_path(const ExperimentConfig& cfg, const std::string& name) {
  return cfg.out() / "hi" / (name + ".offsets.tsv");
}

void write_eval_set(const ExperimentConfig& cfg, const EvalSet& set) {
  write_file(hi_path(cfg, set.name), [&](std::ostream& os) {
    os << cfg.artifact_header() << '\n';
    write_hi(os, set.units);
  });
  write_file(offsets_path(cfg, set.name), [&](std::ostream& os) {
    os << cfg.artifact_header() << '\n' << "unit\trul_offset\n";
    for (std::size_t i = 0; i < set.units.size(); ++i)
      os << set.units[i].unit_id << '\t' << set.rul_offset[i] << '\n';
  });
}

std::vector<Track> tracks_of(const std::vector<UnitSeries>& units) {
  std::vector<Track> out;
  out.reserve(units.size());
  for (const auto& u : units) out.push_back(u.track());
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool matches_subset(const std::string& set, const std::string& only) {
  return only.empty() || set.rfind(only, 0) == 0;
}

bool wants_net(const ExperimentConfig& cfg) {
  return std::any_of(cfg.methods.begin(), cfg.methods.end(), [](Method m) { return is_dnn(m); });
}

const char* const kKnownKeys[] = {"data_dir",       "train_subset",   "eval_subsets",  "sensors",
                                  "regressors",     "train_fraction", "net",           "min_history",
                                  "pair_stride",    "wiener_horizon", "wiener_stride", "noise_overrides",
                                  "prognosis",      "seed",           "out_dir",       "methods"};

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void ExperimentConfig::validate() const {
  net.validate();
  prognosis.validate();
  if (sensors.empty()) throw std::invalid_argument("config: no sensors selected");
  if (regressors.empty()) throw std::invalid_argument("config: no regressors");
  if (!(train_fraction > 0 && train_fraction < 1)) throw std::invalid_argument("config: train_fraction must lie in (0, 1)");
  if (min_history < 1 || pair_stride < 1 || wiener_horizon < 1 || wiener_stride < 1)
    throw std::invalid_argument("config: window settings must be >= 1");
  if (methods.empty()) throw std::invalid_argument("config: no methods");
  if (gamma_sq_override && !(*gamma_sq_override > 0))
    throw std::invalid_argument("config: gamma_sq override must be > 0");
  if (eta_b_sq_override && !(*eta_b_sq_override > 0))
    throw std::invalid_argument("config: eta_b_sq override must be > 0");
}

std::string ExperimentConfig::hash() const {
  Json j = *this;
  j.erase("out_dir");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

std::string ExperimentConfig::artifact_header() const {
  return "# config_hash=" + hash() + " seed=" + std::to_string(seed);
}

void to_json(Json& j, const ExperimentConfig& c) {
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.push_back(method_name(m));
  const auto& p = c.prognosis;
  j = Json{{"data_dir", c.data_dir},
           {"train_subset", c.train_subset},
           {"eval_subsets", c.eval_subsets},
           {"sensors", c.sensors},
           {"regressors", c.regressors},
           {"train_fraction", c.train_fraction},
           {"net", c.net},
           {"min_history", c.min_history},
           {"pair_stride", c.pair_stride},
           {"wiener_horizon", c.wiener_horizon},
           {"wiener_stride", c.wiener_stride},
           {"noise_overrides",
            {{"gamma_sq", c.gamma_sq_override ? Json(*c.gamma_sq_override) : Json(nullptr)},
             {"eta_b_sq", c.eta_b_sq_override ? Json(*c.eta_b_sq_override) : Json(nullptr)}}},
           {"prognosis",
            {{"threshold", p.threshold},
             {"update_every", p.update_every},
             {"warmup", p.warmup},
             {"omega0_sq", p.omega0_sq},
             {"n_curves", p.n_curves},
             {"level", p.level},
             {"grid_factor", p.grid_factor},
             {"max_rul", p.max_rul},
             {"point", p.use_median ? "median" : "mean"}}},
           {"seed", c.seed},
           {"out_dir", c.out_dir},
           {"methods", methods}};
}

void from_json(const Json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKnownKeys), std::end(kKnownKeys), key) == std::end(kKnownKeys))
      throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  c.data_dir = j.value("data_dir", c.data_dir);
  c.train_subset = j.value("train_subset", c.train_subset);
  c.eval_subsets = j.value("eval_subsets", c.eval_subsets);
  c.sensors = j.value("sensors", c.sensors);
  c.regressors = j.value("regressors", c.regressors);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  if (j.contains("net")) {
    Json merged = c.net;
    merged.update(j.at("net"));
    c.net = merged.get<NetConfig>();
  }
  c.min_history = j.value("min_history", c.min_history);
  c.pair_stride = j.value("pair_stride", c.pair_stride);
  c.wiener_horizon = j.value("wiener_horizon", c.wiener_horizon);
  c.wiener_stride = j.value("wiener_stride", c.wiener_stride);
  if (j.contains("noise_overrides")) {
    const auto& o = j.at("noise_overrides");
    if (o.contains("gamma_sq") && !o.at("gamma_sq").is_null()) c.gamma_sq_override = o.at("gamma_sq").get<double>();
    if (o.contains("eta_b_sq") && !o.at("eta_b_sq").is_null()) c.eta_b_sq_override = o.at("eta_b_sq").get<double>();
  }
  if (j.contains("prognosis")) {
    const auto& p = j.at("prognosis");
    auto& q = c.prognosis;
    q.threshold = p.value("threshold", q.threshold);
    q.update_every = p.value("update_every", q.update_every);
    q.warmup = p.value("warmup", q.warmup);
    q.omega0_sq = p.value("omega0_sq", q.omega0_sq);
    q.n_curves = p.value("n_curves", q.n_curves);
    q.level = p.value("level", q.level);
    q.grid_factor = p.value("grid_factor", q.grid_factor);
    q.max_rul = p.value("max_rul", q.max_rul);
    const auto point = p.value("point", std::string(q.use_median ? "median" : "mean"));
    if (point != "mean" && point != "median") throw std::invalid_argument("config: prognosis.point must be mean or median");
    q.use_median = point == "median";
  }
  c.seed = j.value("seed", c.seed);
  c.out_dir = j.value("out_dir", c.out_dir);
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
  }
}

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig c;
  try {
    c = read_json(path).get<ExperimentConfig>();
  } catch (const Json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  c.validate();
  return c;
}

std::vector<std::string> eval_set_names(const ExperimentConfig& cfg) {
  std::vector<std::string> out{cfg.train_subset + "-heldout"};
  for (const auto& s : cfg.eval_subsets) out.push_back(s + "-test");
  return out;
}

void cmd_ingest(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto all = parse_cmapss(subset_file(cfg, "train", cfg.train_subset));
  log << cfg.train_subset << ": " << all.size() << " units\n";
  auto [train, heldout] = split_train_test(all, cfg.train_fraction, mix_seed(cfg.seed, 10));
  log << "split: " << train.size() << " train / " << heldout.size() << " held out\n";

  const auto model = fit_stacked_hi(train, cfg.sensors, mix_seed(cfg.seed, 11), cfg.regressors);
  for (const auto& w : model.warnings) log << "warning: " << w << '\n';

  std::vector<double> rho;
  for (auto& u : train) {
    u = compute_hi(u, model);
    rho.push_back(spearman(u.hi, u.cycles));
  }
  for (auto& u : heldout) u = compute_hi(u, model);
  log << "median Spearman(HI, cycle) on training units: " << median(rho) << '\n';

  write_file(cfg.out() / "hi_model.json", [&](std::ostream& os) {
    Json j = model.to_json();
    j["config_hash"] = cfg.hash();
    j["seed"] = cfg.seed;
    os << j.dump(1) << '\n';
  });
  write_file(hi_path(cfg, "train"), [&](std::ostream& os) {
    os << cfg.artifact_header() << '\n';
    write_hi(os, train);
  });
  write_eval_set(cfg, {cfg.train_subset + "-heldout", heldout, std::vector<double>(heldout.size(), 0.0)});

  for (const auto& s : cfg.eval_subsets) {
    auto units = parse_cmapss(subset_file(cfg, "test", s));
    const auto truth = parse_rul_truth(subset_file(cfg, "RUL", s));
    if (truth.size() != units.size())
      throw std::runtime_error(subset_file(cfg, "RUL", s) + ": " + std::to_string(truth.size()) +
                               " RUL values for " + std::to_string(units.size()) + " test units");
    for (auto& u : units) u = compute_hi(u, model);
    write_eval_set(cfg, {s + "-test", units, truth});
    log << s << " test: " << units.size() << " units\n";
  }
}

std::vector<UnitSeries> load_train_hi(const ExperimentConfig& cfg) {
  return read_hi(hi_path(cfg, "train").string());
}

EvalSet load_eval_set(const ExperimentConfig& cfg, const std::string& name) {
  EvalSet set;
  set.name = name;
  set.units = read_hi(hi_path(cfg, name).string());
  const auto path = offsets_path(cfg, name);
  std::ifstream is(path);
  if (!is) throw std::runtime_error(path.string() + ": cannot open file");
  std::map<int, double> offsets;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.rfind("unit\t", 0) == 0) continue;
    std::istringstream ls(line);
    int unit;
    double off;
    if (!(ls >> unit >> off)) throw ParseError(path.string(), line_no, "expected unit and rul_offset");
    offsets[unit] = off;
  }
  for (const auto& u : set.units) {
    const auto it = offsets.find(u.unit_id);
    if (it == offsets.end())
      throw std::runtime_error(path.string() + ": no RUL offset for unit " + std::to_string(u.unit_id));
    set.rul_offset.push_back(it->second);
  }
  return set;
}

void cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const auto units = load_train_hi(cfg);
  if (units.empty()) throw std::runtime_error("train: no training units in " + hi_path(cfg, "train").string());
  const auto tracks = tracks_of(units);
  Json table = Json::array();

  if (wants_net(cfg)) {
    std::vector<TrainingPair> pairs;
    for (const auto& tr : tracks) {
      auto p = make_training_pairs(std::make_shared<const Track>(tr), cfg.min_history, cfg.net.horizon,
                                   cfg.pair_stride);
      std::move(p.begin(), p.end(), std::back_inserter(pairs));
    }
    if (pairs.empty()) throw std::runtime_error("train: no training pairs (series shorter than min_history)");
    log << "training on " << pairs.size() << " pairs from " << units.size() << " units\n";
    TrainReport report;
    auto model = train(pairs, cfg.net, mix_seed(cfg.seed, 20), &report,
                       [&](int epoch, double loss, const TrajectoryModel&) { log << "epoch " << epoch << " loss " << loss << '\n'; });
    auto np = model.noise();
    if (cfg.gamma_sq_override) np.gamma_sq = *cfg.gamma_sq_override;
    if (cfg.eta_b_sq_override) np.eta_b_sq = *cfg.eta_b_sq_override;
    model.set_noise(np);
    save_checkpoint((cfg.out() / "model.ckpt").string(), model,
                    {{"config_hash", cfg.hash()}, {"seed", cfg.seed}, {"pairs", pairs.size()}});
    write_file(cfg.out() / "train_loss.tsv", [&](std::ostream& os) {
      os << cfg.artifact_header() << '\n' << "epoch\tloss\n";
      for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
        os << e + 1 << '\t' << std::setprecision(17) << report.epoch_loss[e] << '\n';
    });
    table.push_back(Json{{"method", "adaptive-dnn"}, {"phi0", np.phi0}, {"gamma_sq", np.gamma_sq}, {"eta_b_sq", np.eta_b_sq}});
    table.push_back(Json{{"method", "dnn"}, {"phi0", np.phi0}, {"gamma_sq", np.gamma_sq}, {"eta_b_sq", np.eta_b_sq}});
  }

  const auto w = fit_wiener(tracks, cfg.wiener_horizon, cfg.wiener_stride);
  write_file(cfg.out() / "wiener.json", [&](std::ostream& os) {
    os << Json{{"phi0", w.phi0}, {"gamma_sq", w.gamma_sq}, {"eta_b_sq", w.eta_b_sq},
               {"config_hash", cfg.hash()}, {"seed", cfg.seed}}.dump(1)
       << '\n';
  });
  table.push_back(Json{{"method", "adaptive-wiener"}, {"phi0", w.phi0}, {"gamma_sq", w.gamma_sq}, {"eta_b_sq", w.eta_b_sq}});
  table.push_back(Json{{"method", "wiener"}, {"phi0", w.phi0}, {"gamma_sq", w.gamma_sq}, {"eta_b_sq", w.eta_b_sq}});

  write_file(cfg.out() / "noise_params.tsv", [&](std::ostream& os) {
    os << cfg.artifact_header() << '\n' << "method\tphi0\tgamma_sq\teta_b_sq\n";
    for (const auto& r : table)
      os << r["method"].get<std::string>() << '\t' << std::setprecision(6) << r["phi0"].get<double>() << '\t'
         << r["gamma_sq"].get<double>() << '\t' << r["eta_b_sq"].get<double>() << '\n';
  });
  log << std::left << std::setw(17) << "method" << std::setw(14) << "phi0" << std::setw(14) << "gamma^2"
      << "eta_B^2\n";
  for (const auto& r : table)
    log << std::left << std::setw(17) << r["method"].get<std::string>() << std::setw(14) << std::setprecision(4)
        << r["phi0"].get<double>() << std::setw(14) << r["gamma_sq"].get<double>() << r["eta_b_sq"].get<double>()
        << '\n';
}

TrainedMethods load_trained(const ExperimentConfig& cfg) {
  TrainedMethods t;
  const auto ckpt = cfg.out() / "model.ckpt";
  if (wants_net(cfg)) {
    auto c = load_checkpoint(ckpt.string());
    t.net_noise = c.model.noise();
    t.net.emplace(std::move(c.model));
  }
  const Json w = read_json(cfg.out() / "wiener.json");
  t.wiener.phi0 = w.at("phi0");
  t.wiener.gamma_sq = w.at("gamma_sq");
  t.wiener.eta_b_sq = w.at("eta_b_sq");
  return t;
}

namespace {

UnitForecaster make_forecaster(const TrainedMethods& tm, const ExperimentConfig& cfg, const UnitSeries& u,
                               Method m) {
  if (is_dnn(m)) return UnitForecaster(u.track(), m, tm.net_noise, cfg.prognosis, &*tm.net);
  return UnitForecaster(u.track(), m, tm.wiener, cfg.prognosis);
}

}  // namespace

void cmd_predict_all(const ExperimentConfig& cfg, const std::string& only_subset, std::ostream& log) {
  cfg.validate();
  const auto tm = load_trained(cfg);
  std::size_t sets = 0;
  for (const auto& name : eval_set_names(cfg)) {
    if (!matches_subset(name, only_subset)) continue;
    ++sets;
    const auto set = load_eval_set(cfg, name);
    const auto start = std::chrono::steady_clock::now();
    std::vector<PredictionRecord> records;
    for (Method m : cfg.methods)
      for (std::size_t i = 0; i < set.units.size(); ++i) {
        const auto& u = set.units[i];
        auto r = make_forecaster(tm, cfg, u, m).evaluate(u.unit_id, set.rul_offset[i], cfg.seed);
        records.insert(records.end(), r.begin(), r.end());
      }
    write_file(cfg.out() / "predictions" / (name + ".tsv"), [&](std::ostream& os) {
      os << cfg.artifact_header() << '\n';
      write_records(os, records);
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log << name << ": " << records.size() << " predictions over " << set.units.size() << " units ("
        << std::fixed << std::setprecision(1) << secs << " s)\n"
        << std::defaultfloat;
  }
  if (sets == 0) throw std::runtime_error("predict: no evaluation set matches subset '" + only_subset + "'");
}

Prognosis cmd_predict_one(const ExperimentConfig& cfg, const std::string& set_name, int unit, int cycle,
                          Method method, std::ostream& log) {
  cfg.validate();
  const auto tm = load_trained(cfg);
  const auto set = load_eval_set(cfg, set_name);
  const auto it = std::find_if(set.units.begin(), set.units.end(), [&](const UnitSeries& u) { return u.unit_id == unit; });
  if (it == set.units.end()) throw std::invalid_argument("predict: unit " + std::to_string(unit) + " not in set " + set_name);
  Eigen::Index idx = -1;
  for (Eigen::Index k = 0; k < it->length(); ++k)
    if (it->cycles[k] == cycle) idx = k;
  if (idx < 0)
    throw std::invalid_argument("predict: unit " + std::to_string(unit) + " has no cycle " + std::to_string(cycle) +
                                " (observed 1.." + std::to_string(it->length()) + ")");
  const auto fc = make_forecaster(tm, cfg, *it, method);
  const auto p = fc.predict(idx, prediction_seed(cfg.seed, unit, cycle));

  const std::string stem = set_name + "_unit" + std::to_string(unit) + "_cycle" + std::to_string(cycle) + "_" +
                           method_name(method);
  const auto dir = cfg.out() / "predict";
  std::vector<DriftPosterior<double>> trace;
  for (const auto& post : fc.trace())
    if (post.t_last <= cycle) trace.push_back(post);
  write_file(dir / (stem + ".trace.tsv"), [&](std::ostream& os) {
    os << cfg.artifact_header() << '\n';
    write_trace(os, trace);
  });
  if (p.distribution) {
    write_file(dir / (stem + ".samples.tsv"), [&](std::ostream& os) {
      os << cfg.artifact_header() << '\n';
      write_samples(os, *p.distribution);
    });
    write_file(dir / (stem + ".density.tsv"), [&](std::ostream& os) {
      os << cfg.artifact_header() << '\n';
      write_density(os, p.distribution->density);
    });
  }
  const double true_rul = set.rul_offset[static_cast<std::size_t>(it - set.units.begin())] +
                          it->cycles[it->length() - 1] - cycle;
  write_file(dir / (stem + ".summary.json"), [&](std::ostream& os) {
    os << Json{{"config_hash", cfg.hash()},
               {"seed", cfg.seed},
               {"set", set_name},
               {"unit", unit},
               {"cycle", cycle},
               {"method", method_name(method)},
               {"psi", p.posterior.psi},
               {"omega_sq", p.posterior.omega_sq},
               {"mean", p.estimate.mean},
               {"median", p.estimate.median},
               {"lower", p.estimate.lower},
               {"upper", p.estimate.upper},
               {"level", cfg.prognosis.level},
               {"censored", p.censored_count},
               {"true_rul", true_rul}}
              .dump(1)
       << '\n';
  });
  if (p.censored) {
    log << "no sampled curve reached the threshold within " << p.grid_end
        << " cycles: failure is not predicted inside the horizon (all " << p.censored_count
        << " curves censored)\n";
  } else {
    log << set_name << " unit " << unit << " cycle " << cycle << " [" << method_name(method) << "]: RUL "
        << p.predicted_rul << " (" << 100 * cfg.prognosis.level << "% CI " << p.estimate.lower << " .. "
        << p.estimate.upper << "), true " << true_rul << ", psi " << p.posterior.psi << '\n';
    if (p.censored_count > 0) log << p.censored_count << " curves censored and dropped\n";
  }
  return p;
}

std::vector<SetEvaluation> cmd_evaluate(const ExperimentConfig& cfg, const std::string& only_subset,
                                        std::ostream& log) {
  cfg.validate();
  std::vector<SetEvaluation> out;
  for (const auto& name : eval_set_names(cfg)) {
    if (!matches_subset(name, only_subset)) continue;
    const auto path = cfg.out() / "predictions" / (name + ".tsv");
    std::ifstream is(path);
    if (!is) continue;
    const auto records = read_records(is, path.string());
    if (records.empty()) throw std::runtime_error(path.string() + ": no prediction records");
    std::set<Method> present;
    for (const auto& r : records) present.insert(r.method);
    for (Method m : cfg.methods)
      if (!present.count(m))
        throw std::runtime_error(path.string() + ": no predictions for method " + method_name(m));

    SetEvaluation ev{name, comparison_table(records), {}};
    ev.checks = ordering_checks(ev.rows);
    const auto cycles = per_cycle_rmse(records);
    const auto tables = cfg.out() / "tables";
    write_file(tables / (name + ".txt"), [&](std::ostream& os) {
      os << cfg.artifact_header() << '\n';
      write_comparison(os, ev.rows, cfg.prognosis.level);
    });
    write_file(tables / (name + ".tsv"), [&](std::ostream& os) {
      os << cfg.artifact_header() << '\n';
      write_comparison_rows(os, ev.rows);
    });
    write_file(tables / (name + ".per_cycle.tsv"), [&](std::ostream& os) {
      os << cfg.artifact_header() << '\n';
      write_cycle_rmse(os, cycles);
    });
    write_file(tables / (name + ".checks.tsv"), [&](std::ostream& os) {
      os << cfg.artifact_header() << '\n' << "check\tresult\n";
      for (const auto& c : ev.checks) os << c.name << '\t' << (c.evaluated ? (c.passed ? "pass" : "fail") : "n/a") << '\n';
    });
    log << "== " << name << " ==\n";
    write_comparison(log, ev.rows, cfg.prognosis.level);
    for (const auto& c : ev.checks)
      if (c.evaluated) log << (c.passed ? "PASS  " : "FAIL  ") << c.name << '\n';
    out.push_back(std::move(ev));
  }
  if (out.empty())
    throw std::runtime_error("evaluate: no predictions found under " + (cfg.out() / "predictions").string() +
                             " (run predict first)");
  return out;
}

void cmd_bench(const ExperimentConfig& cfg, std::size_t repetitions, std::ostream& log) {
  auto problem = BenchProblem::linear(240, 0.1);
  problem.seed = cfg.seed;
  const std::vector<BenchSetting> settings{{RulAlgorithm::interpolation, 20},
                                           {RulAlgorithm::simulation, 20},
                                           {RulAlgorithm::simulation, 100},
                                           {RulAlgorithm::simulation, 500},
                                           {RulAlgorithm::simulation, 1000}};
  const auto rows = benchmark_runtimes(problem, settings, repetitions);
  write_file(cfg.out() / "tables" / "bench.txt", [&](std::ostream& os) {
    os << cfg.artifact_header() << '\n';
    write_timing_table(os, rows);
  });
  write_file(cfg.out() / "tables" / "bench.tsv", [&](std::ostream& os) {
    os << cfg.artifact_header() << '\n';
    write_timing_rows(os, rows);
  });
  write_timing_table(log, rows);
  const double ratio = rows[4].median_seconds / rows[0].median_seconds;
  log << "simulation(1000) / interpolation(20) = " << std::fixed << std::setprecision(1) << ratio << "x\n"
      << std::defaultfloat;
}

void cmd_synth(const std::string& dir, const std::vector<std::pair<std::string, std::size_t>>& subsets,
               std::uint64_t seed, std::ostream& log) {
  fs::create_directories(dir);
  std::uint64_t k = 0;
  for (const auto& [name, n] : subsets) {
    const auto train = synthetic_cmapss(n, mix_seed(seed, 2 * k));
    auto test = synthetic_cmapss(n, mix_seed(seed, 2 * k + 1));
    ++k;
    std::mt19937_64 rng(mix_seed(seed, 1000 + k));
    std::uniform_real_distribution<double> cut(0.3, 0.9);
    std::vector<double> rul;
    for (auto& u : test) {
      const auto keep = std::max<Eigen::Index>(31, static_cast<Eigen::Index>(cut(rng) * static_cast<double>(u.length())));
      rul.push_back(static_cast<double>(u.length() - keep));
      u.cycles.conservativeResize(keep);
      u.settings.conservativeResize(keep, Eigen::NoChange);
      u.sensors.conservativeResize(keep, Eigen::NoChange);
    }
    write_file(fs::path(dir) / ("train_" + name + ".txt"), [&](std::ostream& os) { write_cmapss(os, train); });
    write_file(fs::path(dir) / ("test_" + name + ".txt"), [&](std::ostream& os) { write_cmapss(os, test); });
    write_file(fs::path(dir) / ("RUL_" + name + ".txt"), [&](std::ostream& os) {
      for (double r : rul) os << r << '\n';
    });
    log << name << ": " << n << " synthetic units\n";
  }
}

}  // namespace rulkit
