#include "rulkit/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace rulkit {
namespace {

void require_nonempty(const std::vector<PredictionRecord>& r, const char* what) {
  if (r.empty()) throw std::invalid_argument(std::string(what) + ": no records");
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

double parse_num(const std::string& tok, const std::string& name, std::size_t line) {
  double v;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError(name, line, "not a number: '" + tok + "'");
  return v;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::adaptive_dnn: return "adaptive-dnn";
    case Method::dnn: return "dnn";
    case Method::adaptive_wiener: return "adaptive-wiener";
    case Method::wiener: return "wiener";
  }
  throw std::logic_error("unknown method");
}

Method parse_method(const std::string& name) {
  for (Method m : kAllMethods)
    if (method_name(m) == name) return m;
  throw std::invalid_argument("unknown method '" + name +
                              "' (expected adaptive-dnn, dnn, adaptive-wiener or wiener)");
}

bool is_adaptive(Method m) noexcept { return m == Method::adaptive_dnn || m == Method::adaptive_wiener; }
bool is_dnn(Method m) noexcept { return m == Method::adaptive_dnn || m == Method::dnn; }
bool is_probabilistic(Method m) noexcept { return m != Method::dnn; }

void PredictionRecord::validate() const {
  if (!(ci_low <= ci_high)) throw std::invalid_argument("prediction record: ci_low > ci_high");
  if (!(true_rul >= 0)) throw std::invalid_argument("prediction record: negative true RUL");
}

double rmse(const std::vector<PredictionRecord>& records) {
  require_nonempty(records, "rmse");
  double s = 0;
  for (const auto& r : records) s += (r.predicted_rul - r.true_rul) * (r.predicted_rul - r.true_rul);
  return std::sqrt(s / static_cast<double>(records.size()));
}

double picp(const std::vector<PredictionRecord>& records) {
  require_nonempty(records, "picp");
  std::size_t inside = 0;
  for (const auto& r : records)
    if (r.ci_low <= r.true_rul && r.true_rul <= r.ci_high) ++inside;
  return static_cast<double>(inside) / static_cast<double>(records.size());
}

double mpiw(const std::vector<PredictionRecord>& records) {
  require_nonempty(records, "mpiw");
  double s = 0;
  for (const auto& r : records) s += r.ci_high - r.ci_low;
  return s / static_cast<double>(records.size());
}

std::vector<ComparisonRow> comparison_table(const std::vector<PredictionRecord>& records) {
  std::vector<ComparisonRow> rows;
  for (Method m : kAllMethods) {
    std::vector<PredictionRecord> group;
    for (const auto& r : records)
      if (r.method == m) group.push_back(r);
    if (group.empty()) continue;
    ComparisonRow row;
    row.method = m;
    row.count = group.size();
    row.rmse = rmse(group);
    if (is_probabilistic(m)) {
      row.picp = picp(group);
      row.mpiw = mpiw(group);
    }
    rows.push_back(row);
  }
  return rows;
}

void write_comparison(std::ostream& os, const std::vector<ComparisonRow>& rows, double level) {
  const std::string picp_head = "PICP(" + fixed(100 * level, 0) + "% CI)";
  os << std::left << std::setw(17) << "method" << std::right << std::setw(8) << "n" << std::setw(10)
     << "RMSE" << std::setw(15) << picp_head << std::setw(10) << "MPIW" << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(17) << method_name(r.method) << std::right << std::setw(8) << r.count
       << std::setw(10) << fixed(r.rmse, 2) << std::setw(15)
       << (r.picp ? fixed(100 * *r.picp, 2) : "-") << std::setw(10) << (r.mpiw ? fixed(*r.mpiw, 2) : "-")
       << '\n';
  }
}

void write_comparison_rows(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << "method\tn\trmse\tpicp\tmpiw\n";
  for (const auto& r : rows)
    os << method_name(r.method) << '\t' << r.count << '\t' << fmt(r.rmse) << '\t'
       << (r.picp ? fmt(*r.picp) : "NA") << '\t' << (r.mpiw ? fmt(*r.mpiw) : "NA") << '\n';
}

std::vector<OrderingCheck> ordering_checks(const std::vector<ComparisonRow>& rows) {
  auto find = [&](Method m) -> const ComparisonRow* {
    for (const auto& r : rows)
      if (r.method == m) return &r;
    return nullptr;
  };
  auto check = [&](Method a, Method b) {
    OrderingCheck c;
    c.name = method_name(a) + " <= " + method_name(b);
    const auto* ra = find(a);
    const auto* rb = find(b);
    if (ra && rb) {
      c.evaluated = true;
      c.passed = ra->rmse <= rb->rmse;
    }
    return c;
  };
  return {check(Method::adaptive_dnn, Method::dnn), check(Method::dnn, Method::adaptive_wiener),
          check(Method::adaptive_dnn, Method::adaptive_wiener),
          check(Method::adaptive_wiener, Method::wiener)};
}

std::vector<CycleRmse> per_cycle_rmse(const std::vector<PredictionRecord>& records) {
  std::map<std::pair<int, int>, std::pair<double, std::size_t>> acc;
  for (const auto& r : records) {
    auto& a = acc[{static_cast<int>(r.method), static_cast<int>(std::lround(r.eval_time))}];
    a.first += (r.predicted_rul - r.true_rul) * (r.predicted_rul - r.true_rul);
    ++a.second;
  }
  std::vector<CycleRmse> out;
  for (const auto& [key, a] : acc)
    out.push_back({key.second, static_cast<Method>(key.first),
                   std::sqrt(a.first / static_cast<double>(a.second)), a.second});
  return out;
}

void write_cycle_rmse(std::ostream& os, const std::vector<CycleRmse>& rows) {
  os << "# binning=absolute_cycle averaged_over=units_alive\n";
  os << "cycle\tmethod\trmse\tunits\n";
  for (const auto& r : rows)
    os << r.cycle << '\t' << method_name(r.method) << '\t' << fmt(r.rmse) << '\t' << r.units << '\n';
}

void write_records(std::ostream& os, const std::vector<PredictionRecord>& records) {
  os << "unit\teval_time\ttrue_rul\tpredicted_rul\tci_low\tci_high\tmethod\tcensored\n";
  for (const auto& r : records)
    os << r.unit_id << '\t' << fmt(r.eval_time) << '\t' << fmt(r.true_rul) << '\t' << fmt(r.predicted_rul)
       << '\t' << fmt(r.ci_low) << '\t' << fmt(r.ci_high) << '\t' << method_name(r.method) << '\t'
       << (r.censored ? 1 : 0) << '\n';
}

std::vector<PredictionRecord> read_records(std::istream& is, const std::string& name) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      if (line.rfind("unit\t", 0) == 0) continue;
    }
    std::vector<std::string> tok;
    std::istringstream ls(line);
    for (std::string s; std::getline(ls, s, '\t');) tok.push_back(s);
    if (tok.size() != 8) throw ParseError(name, line_no, "expected 8 tab-separated fields");
    PredictionRecord r;
    r.unit_id = static_cast<int>(parse_num(tok[0], name, line_no));
    r.eval_time = parse_num(tok[1], name, line_no);
    r.true_rul = parse_num(tok[2], name, line_no);
    r.predicted_rul = parse_num(tok[3], name, line_no);
    r.ci_low = parse_num(tok[4], name, line_no);
    r.ci_high = parse_num(tok[5], name, line_no);
    try {
      r.method = parse_method(tok[6]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(name, line_no, e.what());
    }
    r.censored = tok[7] == "1";
    try {
      r.validate();
    } catch (const std::invalid_argument& e) {
      throw ParseError(name, line_no, e.what());
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace rulkit
