#include "rulkit/cmapss.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace rulkit {
namespace {

constexpr int kColumns = 2 + kSettingColumns + kSensorColumns;

bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size() && std::isfinite(out);
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

void write_number(std::ostream& os, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  os.write(buf, ptr - buf);
}

VectorXd ranks(const VectorXd& v) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  VectorXd r(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

void check_sensor_ids(const std::vector<int>& ids) {
  if (ids.empty()) throw std::invalid_argument("health index: no sensors selected");
  for (int s : ids)
    if (s < 1 || s > kSensorColumns)
      throw std::invalid_argument("health index: sensor id " + std::to_string(s) + " outside 1..21");
}

}  // namespace

Track UnitSeries::track() const {
  if (hi.size() != cycles.size()) throw std::logic_error("unit " + std::to_string(unit_id) + " has no health index");
  return Track{cycles, hi};
}

std::vector<UnitSeries> parse_cmapss(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error(path + ": cannot open file");
  return parse_cmapss(is, path);
}

std::vector<UnitSeries> parse_cmapss(std::istream& is, const std::string& name) {
  struct Row {
    std::size_t line;
    double cycle;
    std::array<double, kColumns> v;
  };
  std::map<int, std::vector<Row>> by_unit;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != kColumns)
      throw ParseError(name, line_no,
                       "expected 26 columns, found " + std::to_string(toks.size()));
    Row row{line_no, 0, {}};
    for (int c = 0; c < kColumns; ++c)
      if (!parse_double(toks[static_cast<std::size_t>(c)], row.v[static_cast<std::size_t>(c)]))
        throw ParseError(name, line_no,
                         "column " + std::to_string(c + 1) + " is not a number: '" +
                             std::string(toks[static_cast<std::size_t>(c)]) + "'");
    const double unit = row.v[0];
    row.cycle = row.v[1];
    if (unit != std::floor(unit) || unit < 1 || row.cycle != std::floor(row.cycle))
      throw ParseError(name, line_no, "unit and cycle must be positive integers");
    by_unit[static_cast<int>(unit)].push_back(row);
  }

  std::vector<UnitSeries> units;
  for (auto& [id, rows] : by_unit) {
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.cycle < b.cycle; });
    for (std::size_t k = 0; k < rows.size(); ++k)
      if (rows[k].cycle != static_cast<double>(k + 1))
        throw ParseError(name, rows[k].line,
                         "unit " + std::to_string(id) + ": cycles not contiguous from 1 (expected " +
                             std::to_string(k + 1) + ")");
    UnitSeries u;
    u.unit_id = id;
    const auto n = static_cast<Eigen::Index>(rows.size());
    u.cycles.resize(n);
    u.settings.resize(n, kSettingColumns);
    u.sensors.resize(n, kSensorColumns);
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& v = rows[static_cast<std::size_t>(k)].v;
      u.cycles[k] = v[1];
      for (int c = 0; c < kSettingColumns; ++c) u.settings(k, c) = v[static_cast<std::size_t>(2 + c)];
      for (int c = 0; c < kSensorColumns; ++c) u.sensors(k, c) = v[static_cast<std::size_t>(5 + c)];
    }
    units.push_back(std::move(u));
  }
  return units;
}

void write_cmapss(std::ostream& os, const std::vector<UnitSeries>& units) {
  for (const auto& u : units)
    for (Eigen::Index k = 0; k < u.length(); ++k) {
      os << u.unit_id << ' ';
      write_number(os, u.cycles[k]);
      for (int c = 0; c < kSettingColumns; ++c) {
        os << ' ';
        write_number(os, u.settings(k, c));
      }
      for (int c = 0; c < kSensorColumns; ++c) {
        os << ' ';
        write_number(os, u.sensors(k, c));
      }
      os << '\n';
    }
}

std::vector<double> parse_rul_truth(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error(path + ": cannot open file");
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    double v;
    if (toks.size() != 1 || !parse_double(toks[0], v) || v < 0)
      throw ParseError(path, line_no, "expected one nonnegative number");
    out.push_back(v);
  }
  return out;
}

VectorXd normalize_cycles(const UnitSeries& unit) {
  if (unit.length() < 2)
    throw std::invalid_argument("normalize_cycles: unit " + std::to_string(unit.unit_id) +
                                " has fewer than two cycles");
  const double lo = unit.cycles.minCoeff(), hi = unit.cycles.maxCoeff();
  VectorXd out = (unit.cycles.array() - lo) / (hi - lo);
  return out;
}

double spearman(const VectorXd& a, const VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("spearman: need two equal series");
  const VectorXd ra = ranks(a), rb = ranks(b);
  const VectorXd ca = ra.array() - ra.mean(), cb = rb.array() - rb.mean();
  const double den = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  return den > 0 ? ca.dot(cb) / den : 0.0;
}

MatrixXd StackedHIModel::features(const UnitSeries& unit) const {
  check_sensor_ids(sensor_ids);
  const auto f = static_cast<Eigen::Index>(sensor_ids.size()) + 1;
  if (scaler.mean.size() != f || scaler.scale.size() != f)
    throw std::invalid_argument("health index: scaler does not match the selected sensors");
  if (unit.sensors.cols() != kSensorColumns || unit.sensors.rows() != unit.length())
    throw std::invalid_argument("health index: unit " + std::to_string(unit.unit_id) +
                                " lacks the sensor columns");
  MatrixXd x(unit.length(), f);
  for (std::size_t k = 0; k < sensor_ids.size(); ++k)
    x.col(static_cast<Eigen::Index>(k)) = unit.sensors.col(sensor_ids[k] - 1);
  x.col(f - 1) = unit.cycles;
  for (Eigen::Index c = 0; c < f; ++c)
    x.col(c) = (x.col(c).array() - scaler.mean[c]) / scaler.scale[c];
  return x;
}

MatrixXd StackedHIModel::base_predictions(const UnitSeries& unit) const {
  if (base_models.empty()) throw std::logic_error("health index model has no base models");
  const MatrixXd x = features(unit);
  MatrixXd out(unit.length(), static_cast<Eigen::Index>(base_models.size()));
  for (std::size_t k = 0; k < base_models.size(); ++k)
    out.col(static_cast<Eigen::Index>(k)) = base_models[k]->predict(x);
  return out;
}

nlohmann::json StackedHIModel::to_json() const {
  nlohmann::json base = nlohmann::json::array();
  for (const auto& m : base_models) base.push_back(m->to_json());
  return {{"format", "rulkit-stacked-hi"},
          {"sensor_ids", sensor_ids},
          {"scaler_mean", std::vector<double>(scaler.mean.data(), scaler.mean.data() + scaler.mean.size())},
          {"scaler_scale", std::vector<double>(scaler.scale.data(), scaler.scale.data() + scaler.scale.size())},
          {"warnings", warnings},
          {"base_models", base}};
}

StackedHIModel StackedHIModel::from_json(const nlohmann::json& j) {
  StackedHIModel m;
  m.sensor_ids = j.at("sensor_ids").get<std::vector<int>>();
  const auto mean = j.at("scaler_mean").get<std::vector<double>>();
  const auto scale = j.at("scaler_scale").get<std::vector<double>>();
  m.scaler.mean = Eigen::Map<const VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  m.scaler.scale = Eigen::Map<const VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  m.warnings = j.value("warnings", std::vector<std::string>{});
  for (const auto& b : j.at("base_models")) m.base_models.push_back(regressor_from_json(b));
  return m;
}

StackedHIModel fit_stacked_hi(const std::vector<UnitSeries>& train_units,
                              const std::vector<int>& sensor_ids, std::uint64_t seed,
                              const std::vector<std::string>& regressors) {
  std::vector<std::unique_ptr<Regressor>> base;
  for (const auto& kind : regressors) base.push_back(make_regressor(kind));
  return fit_stacked_hi(train_units, sensor_ids, seed, std::move(base));
}

StackedHIModel fit_stacked_hi(const std::vector<UnitSeries>& train_units,
                              const std::vector<int>& sensor_ids, std::uint64_t seed,
                              std::vector<std::unique_ptr<Regressor>> base_models) {
  if (train_units.empty()) throw std::invalid_argument("fit_stacked_hi: no training units");
  if (base_models.empty()) throw std::invalid_argument("fit_stacked_hi: no base models");
  check_sensor_ids(sensor_ids);
  StackedHIModel model;
  model.sensor_ids = sensor_ids;
  const auto f = static_cast<Eigen::Index>(sensor_ids.size()) + 1;
  Eigen::Index rows = 0;
  for (const auto& u : train_units) rows += u.length();

  MatrixXd x(rows, f);
  VectorXd y(rows);
  Eigen::Index at = 0;
  for (const auto& u : train_units) {
    const Eigen::Index n = u.length();
    for (std::size_t k = 0; k < sensor_ids.size(); ++k)
      x.block(at, static_cast<Eigen::Index>(k), n, 1) = u.sensors.col(sensor_ids[k] - 1);
    x.block(at, f - 1, n, 1) = u.cycles;
    y.segment(at, n) = normalize_cycles(u);
    at += n;
  }
  model.scaler.mean = x.colwise().mean().transpose();
  model.scaler.scale.resize(f);
  for (Eigen::Index c = 0; c < f; ++c) {
    const double sd = std::sqrt((x.col(c).array() - model.scaler.mean[c]).square().mean());
    if (sd > 1e-12 * std::max(1.0, std::abs(model.scaler.mean[c]))) {
      model.scaler.scale[c] = sd;
    } else {
      model.scaler.scale[c] = 1.0;
      model.warnings.push_back(c + 1 < f ? "sensor s" + std::to_string(sensor_ids[static_cast<std::size_t>(c)]) +
                                               " is constant on the training set"
                                         : "cycle column is constant on the training set");
    }
    x.col(c) = (x.col(c).array() - model.scaler.mean[c]) / model.scaler.scale[c];
  }
  for (std::size_t k = 0; k < base_models.size(); ++k) base_models[k]->fit(x, y, mix_seed(seed, k));
  model.base_models = std::move(base_models);
  return model;
}

UnitSeries compute_hi(const UnitSeries& unit, const StackedHIModel& model) {
  UnitSeries out = unit;
  out.hi = model.base_predictions(unit).rowwise().mean().cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

std::pair<std::vector<UnitSeries>, std::vector<UnitSeries>> split_train_test(
    const std::vector<UnitSeries>& units, double train_fraction, std::uint64_t seed) {
  if (units.size() < 2) throw std::invalid_argument("split_train_test: need at least two units");
  if (!(train_fraction > 0 && train_fraction <= 1))
    throw std::invalid_argument("split_train_test: fraction must lie in (0, 1]");
  const auto n_train = static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(units.size()) - 1e-9));
  if (n_train >= units.size()) throw std::invalid_argument("split_train_test: test set would be empty");
  std::vector<std::size_t> idx(units.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::size_t> tr(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> te(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  auto by_id = [&](std::size_t a, std::size_t b) { return units[a].unit_id < units[b].unit_id; };
  std::sort(tr.begin(), tr.end(), by_id);
  std::sort(te.begin(), te.end(), by_id);
  std::pair<std::vector<UnitSeries>, std::vector<UnitSeries>> out;
  for (auto i : tr) out.first.push_back(units[i]);
  for (auto i : te) out.second.push_back(units[i]);
  return out;
}

void write_hi(std::ostream& os, const std::vector<UnitSeries>& units) {
  os << "unit\tcycle\thi\n";
  for (const auto& u : units) {
    if (u.hi.size() != u.length()) throw std::logic_error("write_hi: unit without health index");
    for (Eigen::Index k = 0; k < u.length(); ++k) {
      os << u.unit_id << '\t';
      write_number(os, u.cycles[k]);
      os << '\t';
      write_number(os, u.hi[k]);
      os << '\n';
    }
  }
}

std::vector<UnitSeries> read_hi(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error(path + ": cannot open file");
  std::map<int, std::vector<std::pair<double, double>>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "unit\tcycle\thi") throw ParseError(path, line_no, "expected header 'unit<TAB>cycle<TAB>hi'");
      header_seen = true;
      continue;
    }
    const auto toks = split_ws(line);
    double u, c, h;
    if (toks.size() != 3 || !parse_double(toks[0], u) || !parse_double(toks[1], c) || !parse_double(toks[2], h))
      throw ParseError(path, line_no, "expected unit, cycle and hi");
    rows[static_cast<int>(u)].emplace_back(c, h);
  }
  std::vector<UnitSeries> units;
  for (auto& [id, r] : rows) {
    UnitSeries s;
    s.unit_id = id;
    s.cycles.resize(static_cast<Eigen::Index>(r.size()));
    s.hi.resize(static_cast<Eigen::Index>(r.size()));
    for (std::size_t k = 0; k < r.size(); ++k) {
      s.cycles[static_cast<Eigen::Index>(k)] = r[k].first;
      s.hi[static_cast<Eigen::Index>(k)] = r[k].second;
      if (k > 0 && !(r[k].first > r[k - 1].first))
        throw ParseError(path, line_no, "unit " + std::to_string(id) + ": cycles not increasing");
    }
    units.push_back(std::move(s));
  }
  return units;
}

}  // namespace rulkit
