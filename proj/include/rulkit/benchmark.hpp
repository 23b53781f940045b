#pragma once

#include "rulkit/degradation.hpp"
#include "rulkit/rul.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace rulkit {

enum class RulAlgorithm { interpolation, simulation };

std::string to_string(RulAlgorithm a);

struct BenchSetting {
  RulAlgorithm algorithm;
  std::size_t size;  ///< interpolation curves or simulated paths
};

/// Linear test problem shared by both algorithms.
struct BenchProblem {
  PatternCurve<double> pattern;
  NoiseParams<double> noise;
  double drift{0.01};
  double threshold{0.8};
  double dt{0.1};
  double bandwidth{0.2};
  std::uint64_t seed{1};

  /// Q(t) = t on [0, horizon] with uniform spacing.
  static BenchProblem linear(double horizon, double spacing);
};

struct TimingRow {
  std::string method;
  std::size_t size{0};
  double median_seconds{0};
  std::size_t repetitions{0};
};

/// Median wall-clock time over `repetitions` runs per setting, after one
/// untimed warm-up run. Single-threaded.
std::vector<TimingRow> benchmark_runtimes(const BenchProblem& problem,
                                          const std::vector<BenchSetting>& settings,
                                          std::size_t repetitions = 20);

void write_timing_table(std::ostream& os, const std::vector<TimingRow>& rows);
void write_timing_rows(std::ostream& os, const std::vector<TimingRow>& rows);

}  // namespace rulkit
