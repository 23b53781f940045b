#pragma once

#include "rulkit/degradation.hpp"
#include "rulkit/trajectory_net.hpp"

#include <memory>
#include <vector>

namespace rulkit {

/// Sequences that follow the degradation model with Q(t) = slope t.
///
/// Cycles run 1..history+horizon. Up to the anchor (the last history point)
/// the drift is held at 1, matching the training convention; afterwards it
/// starts from 1 and diffuses with gamma^2 while Z gains eta_B noise. Each
/// sequence yields exactly one training pair.
std::vector<TrainingPair> linear_model_pairs(std::size_t n_sequences, Eigen::Index history,
                                             Eigen::Index horizon, double slope,
                                             const NoiseParams<double>& np, std::uint64_t seed,
                                             double substep = 0.05);

}  // namespace rulkit

namespace rulkit {

struct UnitSeries;

/// Run-to-failure engines in the C-MAPSS column layout. Five informative
/// sensors (s2, s3, s4, s11, s17) drift with a hidden wear level, a few
/// others are pure noise and the rest are constant.
std::vector<UnitSeries> synthetic_cmapss(std::size_t n_units, std::uint64_t seed,
                                         int min_life = 128, int max_life = 320);

}  // namespace rulkit
