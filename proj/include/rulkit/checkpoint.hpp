#pragma once

// Single-file model checkpoint:
//   8 bytes  "RKCKPT01"
//   8 bytes  header length (little-endian uint64)
//   header   JSON: config, cycle_scale, tensor names and shapes, free metadata
//   payload  every tensor as little-endian float64, column-major, in header order

#include "rulkit/trajectory_net.hpp"

#include "json.hpp"

#include <string>

namespace rulkit {

void to_json(nlohmann::json& j, const NetConfig& cfg);
void from_json(const nlohmann::json& j, NetConfig& cfg);

struct Checkpoint {
  TrajectoryModel model;
  nlohmann::json meta;
};

void save_checkpoint(const std::string& path, const TrajectoryModel& model,
                     const nlohmann::json& meta = nlohmann::json::object());

Checkpoint load_checkpoint(const std::string& path);

}  // namespace rulkit
