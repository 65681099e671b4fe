#include "tclsafe/feeder_io.hpp"

#include <fstream>
#include <random>

#include "tclsafe/error.hpp"
#include "tclsafe/rng.hpp"

namespace tclsafe::grid {

using nlohmann::json;

FeederModel feeder_from_json(const json& doc) {
  try {
    const int nodes = doc.at("nodes").get<int>();
    std::vector<Branch> branches;
    for (const auto& b : doc.at("branches")) {
      branches.push_back({b.at("from").get<int>(), b.at("to").get<int>(), b.at("r").get<double>(),
                          b.at("x").get<double>()});
    }
    PerUnitBase base;
    if (doc.contains("bases")) {
      const auto& bases = doc.at("bases");
      base.power_mva = bases.value("power_mva", base.power_mva);
      base.voltage_kv = bases.value("voltage_kv", base.voltage_kv);
    }
    return FeederModel(nodes, std::move(branches), doc.value("v0", 1.0), base);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed feeder document: ") + e.what());
  }
}

json feeder_to_json(const FeederModel& feeder) {
  json branches = json::array();
  for (const auto& b : feeder.branches())
    branches.push_back({{"from", b.from}, {"to", b.to}, {"r", b.r}, {"x", b.x}});
  return {{"nodes", feeder.node_count()},
          {"branches", std::move(branches)},
          {"v0", feeder.substation_voltage()},
          {"bases", {{"power_mva", feeder.base().power_mva}, {"voltage_kv", feeder.base().voltage_kv}}}};
}

FeederModel load_feeder(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open feeder file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("feeder file " + path.string() + " is not valid JSON: " + e.what());
  }
  return feeder_from_json(doc);
}

void save_feeder(const FeederModel& feeder, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write feeder file " + path.string());
  out << feeder_to_json(feeder).dump(2) << '\n';
}

FeederShape parse_feeder_shape(const std::string& name) {
  if (name == "chain") return FeederShape::chain;
  if (name == "star") return FeederShape::star;
  if (name == "binary_tree" || name == "binary") return FeederShape::binary_tree;
  if (name == "branched") return FeederShape::branched;
  throw ConfigError("unknown feeder shape '" + name + "'");
}

std::string to_string(FeederShape shape) {
  switch (shape) {
    case FeederShape::chain: return "chain";
    case FeederShape::star: return "star";
    case FeederShape::binary_tree: return "binary_tree";
    case FeederShape::branched: return "branched";
  }
  return "unknown";
}

FeederModel generate_feeder(const FeederGeneratorSpec& spec) {
  if (spec.nodes < 1) throw ConfigError("generator needs at least one node");
  for (const Range& r : {spec.resistance, spec.reactance})
    if (!(r.lo > 0.0) || r.hi < r.lo) throw ConfigError("impedance ranges must satisfy 0 < lo <= hi");

  const int n = spec.nodes;
  const int main_length = n - n / 3;
  auto parent_of = [&](int j) {
    switch (spec.shape) {
      case FeederShape::chain: return j - 1;
      case FeederShape::star: return 0;
      case FeederShape::binary_tree: return j / 2;
      case FeederShape::branched:
        if (j <= main_length) return j - 1;
        return std::min(2 + 2 * (j - main_length - 1), main_length);
    }
    return j - 1;
  };

  Stream rng = make_stream(spec.seed, StreamDomain::feeder_generator);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Branch> branches;
  branches.reserve(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j) {
    const double r = spec.resistance.lo + (spec.resistance.hi - spec.resistance.lo) * unit(rng);
    const double x = spec.reactance.lo + (spec.reactance.hi - spec.reactance.lo) * unit(rng);
    branches.push_back({parent_of(j), j, r, x});
  }
  return FeederModel(n, std::move(branches), spec.substation_voltage, spec.base);
}

}  // namespace tclsafe::grid
