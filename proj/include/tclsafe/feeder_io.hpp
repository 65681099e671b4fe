#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "tclsafe/grid.hpp"
#include "tclsafe/range.hpp"

namespace tclsafe::grid {

/// Feeder document: {nodes, branches:[{from,to,r,x}], v0, bases:{power_mva, voltage_kv}}.
FeederModel feeder_from_json(const nlohmann::json& doc);
nlohmann::json feeder_to_json(const FeederModel& feeder);
FeederModel load_feeder(const std::filesystem::path& path);
void save_feeder(const FeederModel& feeder, const std::filesystem::path& path);

enum class FeederShape { chain, star, binary_tree, branched };

FeederShape parse_feeder_shape(const std::string& name);
std::string to_string(FeederShape shape);

struct FeederGeneratorSpec {
  FeederShape shape = FeederShape::branched;
  int nodes = 8;
  Range resistance{0.001, 0.003};
  Range reactance{0.001, 0.003};
  double substation_voltage = 1.0;
  PerUnitBase base{};
  std::uint64_t seed = 1;
};

/// Synthetic radial feeder; branch impedances are uniform on the given ranges.
///   chain:       j <- j-1
///   star:        every node hangs off the substation
///   binary_tree: j <- j/2 (heap numbering)
///   branched:    a main chain of n - n/3 nodes with laterals on every
///                second chain node starting at node 2
FeederModel generate_feeder(const FeederGeneratorSpec& spec);

}  // namespace tclsafe::grid
