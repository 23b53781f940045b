#include "rulkit/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <ostream>

namespace rulkit {

std::string to_string(RulAlgorithm a) {
  return a == RulAlgorithm::interpolation ? "interpolation" : "simulation";
}

BenchProblem BenchProblem::linear(double horizon, double spacing) {
  const auto n = static_cast<Eigen::Index>(std::llround(horizon / spacing)) + 1;
  VectorXd t = VectorXd::LinSpaced(n, 0.0, horizon);
  return BenchProblem{PatternCurve<double>(t, t), NoiseParams<double>{5e-4, 1e-4, 0.01}};
}

std::vector<TimingRow> benchmark_runtimes(const BenchProblem& problem,
                                          const std::vector<BenchSetting>& settings,
                                          std::size_t repetitions) {
  using clock = std::chrono::steady_clock;
  std::vector<TimingRow> rows;
  const auto bw = Bandwidth::fixed(problem.bandwidth);
  for (const auto& s : settings) {
    auto run = [&] {
      if (s.algorithm == RulAlgorithm::interpolation) {
        const auto xi = variance_profile(problem.pattern, problem.noise, problem.pattern.front_time());
        return interpolation_rul(problem.pattern, xi, problem.drift, problem.threshold, s.size,
                                 problem.seed, bw);
      }
      return mc_first_passage(problem.pattern, problem.noise, problem.drift, problem.threshold,
                              s.size, problem.dt, problem.seed, bw, 1);
    };
    (void)run();
    std::vector<double> seconds;
    seconds.reserve(repetitions);
    for (std::size_t r = 0; r < repetitions; ++r) {
      const auto start = clock::now();
      auto dist = run();
      const auto stop = clock::now();
      if (dist.size() == 0) throw std::logic_error("benchmark produced an empty distribution");
      seconds.push_back(std::chrono::duration<double>(stop - start).count());
    }
    std::sort(seconds.begin(), seconds.end());
    const std::size_t n = seconds.size();
    const double median = n % 2 ? seconds[n / 2] : 0.5 * (seconds[n / 2 - 1] + seconds[n / 2]);
    rows.push_back({to_string(s.algorithm), s.size, median, repetitions});
  }
  return rows;
}

void write_timing_table(std::ostream& os, const std::vector<TimingRow>& rows) {
  os << std::left << std::setw(16) << "Method" << std::right << std::setw(8) << "Size"
     << std::setw(14) << "Time/s" << std::setw(8) << "Reps" << '\n';
  for (const auto& r : rows)
    os << std::left << std::setw(16) << r.method << std::right << std::setw(8) << r.size
       << std::setw(14) << std::setprecision(6) << std::fixed << r.median_seconds
       << std::setw(8) << r.repetitions << '\n';
  os.unsetf(std::ios::floatfield);
}

void write_timing_rows(std::ostream& os, const std::vector<TimingRow>& rows) {
  os << "method\tsize\tmedian_seconds\trepetitions\n";
  const auto old = os.precision(9);
  for (const auto& r : rows)
    os << r.method << '\t' << r.size << '\t' << r.median_seconds << '\t' << r.repetitions << '\n';
  os.precision(old);
}

}  // namespace rulkit
