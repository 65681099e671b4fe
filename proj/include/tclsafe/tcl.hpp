#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "tclsafe/grid.hpp"
#include "tclsafe/range.hpp"

namespace tclsafe::tcl {

/// Thermal and electrical parameters of one cooling TCL.
struct TclParams {
  double ambient_temp = 30.0;         ///< degC
  double thermal_resistance = 2.0;    ///< degC/kW
  double thermal_capacitance = 2.0;   ///< kWh/degC
  double transfer_rate = -16.0;       ///< kW, negative for cooling
  double cop = 2.5;
  double setpoint = 22.5;             ///< degC
  double deadband_width = 1.75;       ///< degC
  double reactive_ratio = 0.25;       ///< tan(arccos(power factor))
  int node = 1;

  double lower() const { return setpoint - 0.5 * deadband_width; }
  double upper() const { return setpoint + 0.5 * deadband_width; }
  /// ON-mode electrical draw |p_tr| / cop, kW (stored positive).
  double rated_real() const { return -transfer_rate / cop; }
  double rated_reactive() const { return reactive_ratio * rated_real(); }
  /// exp(-dt / (r c)) with dt in seconds.
  double decay(double dt_seconds) const;
  /// Long-run ON fraction of a free-running thermostat, clamped to [0, 1].
  double duty_cycle() const;

  void validate() const;
};

struct TclState {
  double temperature = 22.5;
  bool on = false;
};

/// Per-node switching tallies of one step; every vector has one entry per node.
struct NodeCounts {
  std::vector<int> on_before;
  std::vector<int> off_before;
  std::vector<int> thermostat_on;   ///< S^ON
  std::vector<int> thermostat_off;  ///< S^OFF
  std::vector<int> command_on;      ///< C^ON
  std::vector<int> command_off;     ///< C^OFF
  std::vector<int> on_after;

  explicit NodeCounts(int node_count = 0);
  int total_thermostat_on() const;
  int total_thermostat_off() const;
  int total_off_before() const;
  int total_on_before() const;
};

struct StepReport {
  NodeCounts counts;
  double aggregate_real_kw = 0.0;
};

/// The controllable fleet. Devices are kept grouped by node.
class TclPopulation {
 public:
  TclPopulation(std::vector<TclParams> params, std::vector<TclState> states, int node_count,
                double dt_seconds);

  std::size_t size() const { return params_.size(); }
  int node_count() const { return node_count_; }
  double dt_seconds() const { return dt_seconds_; }
  std::span<const TclParams> params() const { return params_; }
  std::span<const TclState> states() const { return states_; }
  std::span<const double> decay() const { return decay_; }

  /// n_j^TCL, element i for node i+1.
  const std::vector<int>& node_counts() const { return node_counts_; }
  /// Mean rated real / reactive ON draw per node, kW / kvar (zero on empty nodes).
  const std::vector<double>& avg_real() const { return avg_real_; }
  const std::vector<double>& avg_reactive() const { return avg_reactive_; }

  std::vector<int> on_counts() const;
  double aggregate_real_kw() const;
  double rated_total_kw() const;

  /// One control step under broadcast command u. Each device draws its switch
  /// variate from the stream keyed (seed, step, device index).
  StepReport step(double command, std::uint64_t seed, std::uint64_t step_index);

  /// Direct mode assignment used by the centralized benchmark: temperatures
  /// advance with the previous modes, then `modes` is applied verbatim.
  /// Mode changes are tallied as command switches.
  StepReport step_with_modes(std::span<const char> modes);

  /// Temperatures one step ahead of the current state, for the current modes.
  std::vector<double> next_temperatures() const;

  void set_states(std::vector<TclState> states);

 private:
  std::vector<TclParams> params_;
  std::vector<TclState> states_;
  std::vector<double> decay_;
  int node_count_;
  double dt_seconds_;
  std::vector<int> node_counts_;
  std::vector<double> avg_real_;
  std::vector<double> avg_reactive_;
};

/// Uniform sampling intervals; defaults are the case-study intervals.
struct ParameterRanges {
  Range ambient_temp{29.0, 31.0};
  Range thermal_capacitance{1.5, 2.5};
  Range thermal_resistance{1.2, 2.5};
  Range transfer_rate{-18.0, -14.0};
  Range cop{2.3, 2.7};
  Range setpoint{20.0, 25.0};
  Range deadband_width{1.5, 2.0};
  Range power_factor{0.95, 0.99};

  void validate() const;
  /// Mean rated real draw |p_tr| / cop of a device drawn from these ranges, kW.
  double mean_rated_real() const;
  double mean_duty_cycle() const;
};

/// Draw a population of `count` devices. Nodes get counts proportional to
/// `node_weights` (largest-remainder rounding); temperatures start uniform in
/// each dead-band and modes Bernoulli(duty cycle).
TclPopulation sample_population(int count, std::span<const double> node_weights,
                                const ParameterRanges& ranges, double dt_seconds, std::uint64_t seed);

/// Exact per-node TCL draw sum_i p^i m^i, divided by `kw_per_unit`
/// (pass the feeder's kW-per-pu to get pu, 1.0 for kW).
grid::NodalInjection nodal_tcl_power(const TclPopulation& population, double kw_per_unit = 1.0);

/// Snapshot of every device's parameters and state.
nlohmann::json population_to_json(const TclPopulation& population);
TclPopulation population_from_json(const nlohmann::json& doc);
void save_population(const TclPopulation& population, const std::filesystem::path& path);
TclPopulation load_population(const std::filesystem::path& path);

}  // namespace tclsafe::tcl
