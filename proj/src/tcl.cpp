#include "tclsafe/tcl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "tclsafe/error.hpp"
#include "tclsafe/rng.hpp"

namespace tclsafe::tcl {

double TclParams::decay(double dt_seconds) const {
  return std::exp(-(dt_seconds / 3600.0) / (thermal_resistance * thermal_capacitance));
}

double TclParams::duty_cycle() const {
  // Free-running cycle times of the affine model between the band edges.
  const double on_target = ambient_temp + thermal_resistance * transfer_rate;
  if (ambient_temp <= upper()) return 0.0;
  if (on_target >= lower()) return 1.0;
  const double t_off = std::log((ambient_temp - lower()) / (ambient_temp - upper()));
  const double t_on = std::log((upper() - on_target) / (lower() - on_target));
  return t_on / (t_on + t_off);
}

void TclParams::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!(transfer_rate < 0.0)) throw ConfigError("only cooling TCLs are modeled: transfer_rate must be < 0");
  if (!(cop > 0.0)) throw ConfigError("coefficient of performance must be positive");
  if (!(thermal_resistance > 0.0) || !(thermal_capacitance > 0.0))
    throw ConfigError("thermal resistance and capacitance must be positive");
  if (!(deadband_width > 0.0)) throw ConfigError("dead-band width must be positive");
  if (!(reactive_ratio > 0.0)) throw ConfigError("reactive ratio must be positive");
  if (!finite(ambient_temp) || !finite(setpoint)) throw ConfigError("temperatures must be finite");
  if (node < 1) throw ConfigError("TCL node index must be >= 1");
}

NodeCounts::NodeCounts(int node_count)
    : on_before(static_cast<std::size_t>(node_count), 0),
      off_before(on_before),
      thermostat_on(on_before),
      thermostat_off(on_before),
      command_on(on_before),
      command_off(on_before),
      on_after(on_before) {}

namespace {
int sum(const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0); }
}  // namespace

int NodeCounts::total_thermostat_on() const { return sum(thermostat_on); }
int NodeCounts::total_thermostat_off() const { return sum(thermostat_off); }
int NodeCounts::total_off_before() const { return sum(off_before); }
int NodeCounts::total_on_before() const { return sum(on_before); }

TclPopulation::TclPopulation(std::vector<TclParams> params, std::vector<TclState> states,
                             int node_count, double dt_seconds)
    : params_(std::move(params)),
      states_(std::move(states)),
      node_count_(node_count),
      dt_seconds_(dt_seconds) {
  if (node_count < 1) throw ConfigError("population needs a feeder with at least one node");
  if (!(dt_seconds > 0.0)) throw ConfigError("time step must be positive");
  if (params_.size() != states_.size()) throw ConfigError("parameter and state lists differ in length");

  const auto n = static_cast<std::size_t>(node_count);
  node_counts_.assign(n, 0);
  avg_real_.assign(n, 0.0);
  avg_reactive_.assign(n, 0.0);
  decay_.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const TclParams& p = params_[i];
    p.validate();
    if (p.node > node_count)
      throw ConfigError("TCL " + std::to_string(i) + " sits on node " + std::to_string(p.node) +
                        " beyond the feeder");
    if (!std::isfinite(states_[i].temperature)) throw ConfigError("TCL temperature must be finite");
    const auto j = static_cast<std::size_t>(p.node - 1);
    ++node_counts_[j];
    avg_real_[j] += p.rated_real();
    avg_reactive_[j] += p.rated_reactive();
    decay_.push_back(p.decay(dt_seconds));
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (node_counts_[j] > 0) {
      avg_real_[j] /= node_counts_[j];
      avg_reactive_[j] /= node_counts_[j];
    }
  }
}

std::vector<int> TclPopulation::on_counts() const {
  std::vector<int> out(static_cast<std::size_t>(node_count_), 0);
  for (std::size_t i = 0; i < size(); ++i)
    if (states_[i].on) ++out[static_cast<std::size_t>(params_[i].node - 1)];
  return out;
}

double TclPopulation::aggregate_real_kw() const {
  double total = 0.0;
  for (std::size_t i = 0; i < size(); ++i)
    if (states_[i].on) total += params_[i].rated_real();
  return total;
}

double TclPopulation::rated_total_kw() const {
  double total = 0.0;
  for (const auto& p : params_) total += p.rated_real();
  return total;
}

std::vector<double> TclPopulation::next_temperatures() const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) {
    const TclParams& p = params_[i];
    const double a = decay_[i];
    const double drive = p.ambient_temp + (states_[i].on ? p.thermal_resistance * p.transfer_rate : 0.0);
    out[i] = a * states_[i].temperature + (1.0 - a) * drive;
  }
  return out;
}

StepReport TclPopulation::step(double command, std::uint64_t seed, std::uint64_t step_index) {
  if (!(std::abs(command) <= 1.0)) throw ConfigError("command must lie in [-1, 1]");
  StepReport report{NodeCounts(node_count_), 0.0};
  NodeCounts& c = report.counts;
  const auto next = next_temperatures();

  for (std::size_t i = 0; i < size(); ++i) {
    const TclParams& p = params_[i];
    TclState& s = states_[i];
    const auto j = static_cast<std::size_t>(p.node - 1);
    (s.on ? c.on_before : c.off_before)[j] += 1;

    s.temperature = next[i];
    if (s.temperature >= p.upper()) {
      if (!s.on) ++c.thermostat_on[j];
      s.on = true;
    } else if (s.temperature <= p.lower()) {
      if (s.on) ++c.thermostat_off[j];
      s.on = false;
    } else {
      Stream rng = make_stream(seed, StreamDomain::device_switching, step_index, i);
      const double z = rng.uniform();
      if (!s.on && z <= command) {
        s.on = true;
        ++c.command_on[j];
      } else if (s.on && z <= -command) {
        s.on = false;
        ++c.command_off[j];
      }
    }
    if (s.on) {
      ++c.on_after[j];
      report.aggregate_real_kw += p.rated_real();
    }
  }
  return report;
}

StepReport TclPopulation::step_with_modes(std::span<const char> modes) {
  if (modes.size() != size()) throw ConfigError("mode assignment length does not match population");
  StepReport report{NodeCounts(node_count_), 0.0};
  NodeCounts& c = report.counts;
  const auto next = next_temperatures();
  for (std::size_t i = 0; i < size(); ++i) {
    TclState& s = states_[i];
    const auto j = static_cast<std::size_t>(params_[i].node - 1);
    (s.on ? c.on_before : c.off_before)[j] += 1;
    s.temperature = next[i];
    const bool target = modes[i] != 0;
    if (target && !s.on) ++c.command_on[j];
    if (!target && s.on) ++c.command_off[j];
    s.on = target;
    if (s.on) {
      ++c.on_after[j];
      report.aggregate_real_kw += params_[i].rated_real();
    }
  }
  return report;
}

void TclPopulation::set_states(std::vector<TclState> states) {
  if (states.size() != size()) throw ConfigError("state list length does not match population");
  states_ = std::move(states);
}

void ParameterRanges::validate() const {
  const std::pair<const char*, Range> all[] = {
      {"ambient_temp", ambient_temp}, {"thermal_capacitance", thermal_capacitance},
      {"thermal_resistance", thermal_resistance}, {"transfer_rate", transfer_rate},
      {"cop", cop}, {"setpoint", setpoint},
      {"deadband_width", deadband_width}, {"power_factor", power_factor}};
  for (const auto& [name, r] : all)
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi)
      throw ConfigError(std::string("parameter range '") + name + "' must satisfy lo <= hi");
  if (!(transfer_rate.hi < 0.0)) throw ConfigError("transfer_rate range must be negative (cooling)");
  if (!(cop.lo > 0.0) || !(thermal_capacitance.lo > 0.0) || !(thermal_resistance.lo > 0.0) ||
      !(deadband_width.lo > 0.0))
    throw ConfigError("cop, thermal constants and dead-band width ranges must be positive");
  if (!(power_factor.lo > 0.0) || !(power_factor.hi < 1.0))
    throw ConfigError("power factor range must lie inside (0, 1)");
}

double ParameterRanges::mean_rated_real() const {
  const double inv_cop = cop.width() > 0.0 ? std::log(cop.hi / cop.lo) / cop.width() : 1.0 / cop.lo;
  return -transfer_rate.mid() * inv_cop;
}

double ParameterRanges::mean_duty_cycle() const {
  TclParams p;
  p.ambient_temp = ambient_temp.mid();
  p.thermal_resistance = thermal_resistance.mid();
  p.thermal_capacitance = thermal_capacitance.mid();
  p.transfer_rate = transfer_rate.mid();
  p.cop = cop.mid();
  p.setpoint = setpoint.mid();
  p.deadband_width = deadband_width.mid();
  return p.duty_cycle();
}

TclPopulation sample_population(int count, std::span<const double> node_weights,
                                const ParameterRanges& ranges, double dt_seconds, std::uint64_t seed) {
  if (count < 1) throw ConfigError("population count must be at least 1");
  if (node_weights.empty()) throw ConfigError("node weights must cover at least one node");
  ranges.validate();
  double total_weight = 0.0;
  for (double w : node_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("node weights must be finite and nonnegative");
    total_weight += w;
  }
  if (!(total_weight > 0.0)) throw ConfigError("node weights must not all be zero");

  // Largest-remainder apportionment, ties to the lower node index.
  const std::size_t n = node_weights.size();
  std::vector<int> per_node(n, 0);
  std::vector<std::pair<double, std::size_t>> remainder;
  int assigned = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double share = count * node_weights[j] / total_weight;
    per_node[j] = static_cast<int>(std::floor(share));
    assigned += per_node[j];
    remainder.emplace_back(share - per_node[j], j);
  }
  std::stable_sort(remainder.begin(), remainder.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < count; ++k, ++assigned) ++per_node[remainder[k % n].second];

  std::vector<TclParams> params;
  std::vector<TclState> states;
  params.reserve(static_cast<std::size_t>(count));
  states.reserve(static_cast<std::size_t>(count));
  std::size_t device = 0;
  for (std::size_t j = 0; j < n; ++j) {
    for (int k = 0; k < per_node[j]; ++k, ++device) {
      Stream rng = make_stream(seed, StreamDomain::population_sampling, device);
      auto draw = [&rng](const Range& r) { return r.lo + (r.hi - r.lo) * rng.uniform(); };
      TclParams p;
      p.ambient_temp = draw(ranges.ambient_temp);
      p.thermal_capacitance = draw(ranges.thermal_capacitance);
      p.thermal_resistance = draw(ranges.thermal_resistance);
      p.transfer_rate = draw(ranges.transfer_rate);
      p.cop = draw(ranges.cop);
      p.setpoint = draw(ranges.setpoint);
      p.deadband_width = draw(ranges.deadband_width);
      p.reactive_ratio = std::tan(std::acos(draw(ranges.power_factor)));
      p.node = static_cast<int>(j) + 1;
      TclState s;
      s.temperature = p.lower() + p.deadband_width * rng.uniform();
      s.on = rng.uniform() < p.duty_cycle();
      params.push_back(p);
      states.push_back(s);
    }
  }
  return TclPopulation(std::move(params), std::move(states), static_cast<int>(n), dt_seconds);
}

grid::NodalInjection nodal_tcl_power(const TclPopulation& population, double kw_per_unit) {
  auto out = grid::NodalInjection::zeros(population.node_count());
  const auto params = population.params();
  const auto states = population.states();
  for (std::size_t i = 0; i < population.size(); ++i) {
    if (!states[i].on) continue;
    const auto j = static_cast<std::size_t>(params[i].node - 1);
    out.real_power[j] += params[i].rated_real() / kw_per_unit;
    out.reactive_power[j] += params[i].rated_reactive() / kw_per_unit;
  }
  return out;
}

nlohmann::json population_to_json(const TclPopulation& population) {
  nlohmann::json devices = nlohmann::json::array();
  const auto params = population.params();
  const auto states = population.states();
  for (std::size_t i = 0; i < population.size(); ++i) {
    const TclParams& p = params[i];
    devices.push_back({{"node", p.node},
                       {"ambient_temp", p.ambient_temp},
                       {"thermal_resistance", p.thermal_resistance},
                       {"thermal_capacitance", p.thermal_capacitance},
                       {"transfer_rate", p.transfer_rate},
                       {"cop", p.cop},
                       {"setpoint", p.setpoint},
                       {"deadband_width", p.deadband_width},
                       {"reactive_ratio", p.reactive_ratio},
                       {"temperature", states[i].temperature},
                       {"on", states[i].on}});
  }
  return {{"node_count", population.node_count()},
          {"dt_seconds", population.dt_seconds()},
          {"devices", std::move(devices)}};
}

TclPopulation population_from_json(const nlohmann::json& doc) {
  try {
    std::vector<TclParams> params;
    std::vector<TclState> states;
    for (const auto& d : doc.at("devices")) {
      TclParams p;
      p.node = d.at("node").get<int>();
      p.ambient_temp = d.at("ambient_temp").get<double>();
      p.thermal_resistance = d.at("thermal_resistance").get<double>();
      p.thermal_capacitance = d.at("thermal_capacitance").get<double>();
      p.transfer_rate = d.at("transfer_rate").get<double>();
      p.cop = d.at("cop").get<double>();
      p.setpoint = d.at("setpoint").get<double>();
      p.deadband_width = d.at("deadband_width").get<double>();
      p.reactive_ratio = d.at("reactive_ratio").get<double>();
      params.push_back(p);
      states.push_back({d.at("temperature").get<double>(), d.at("on").get<bool>()});
    }
    return TclPopulation(std::move(params), std::move(states), doc.at("node_count").get<int>(),
                         doc.at("dt_seconds").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed population snapshot: ") + e.what());
  }
}

void save_population(const TclPopulation& population, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write population snapshot " + path.string());
  out << population_to_json(population).dump(1) << '\n';
}

TclPopulation load_population(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open population snapshot " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("population snapshot is not valid JSON: " + std::string(e.what()));
  }
  return population_from_json(doc);
}

}  // namespace tclsafe::tcl
