#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tclsafe/feeder_io.hpp"
#include "tclsafe/load_model.hpp"
#include "tclsafe/tcl.hpp"
#include "tclsafe/utility.hpp"

namespace tclsafe::harness {

enum class Controller { proposed, tracking, opf };

Controller parse_controller(const std::string& name);
std::string to_string(Controller controller);

struct FeederSpec {
  std::optional<std::filesystem::path> file;
  grid::FeederGeneratorSpec generator{};
  /// Scale impedances so the TCL-free minimum voltage at peak mean load is
  /// v_floor + calibration_margin. Ignored when the margin is unset.
  std::optional<double> calibration_margin = 0.01;
};

struct LoadSpec {
  /// Explicit nominal loads in kW / kvar per node; drawn when empty.
  std::vector<double> nominal_real_kw;
  std::vector<double> nominal_reactive_kvar;
  Range nominal_real_range_kw{150.0, 350.0};
  double power_factor = 0.9;  ///< nominal q/p of drawn loads
  load::MultiplierProfile profile = load::MultiplierProfile::afternoon_peak();
  double sd_fraction = 0.15;
  Range truncation_fraction{-0.25, 0.675};
  double correlation = 0.0;
};

enum class PenetrationBasis { rated, expected };

struct PopulationSpec {
  /// Per-node TCL nominal draw as a fraction of p^Ln.
  double penetration = 0.25;
  PenetrationBasis basis = PenetrationBasis::rated;
  /// Overrides the penetration-derived count when set.
  std::optional<int> count;
  tcl::ParameterRanges ranges{};
};

struct ReferenceSpec {
  std::optional<std::filesystem::path> file;
  double file_start_seconds = 0.0;
  /// p_ref = rated_fleet_kw * (offset_fraction + scale_fraction * raw).
  double offset_fraction = 0.25;
  double scale_fraction = 0.1;
  /// Absolute kW offset and scale; take precedence over the fractions.
  std::optional<double> offset_kw;
  std::optional<double> scale_kw;
};

/// Diagnostic safety-curve settings.
struct CurveSpec {
  double time_seconds = 14.0 * 3600.0;  ///< observation instant
  int points = 101;
  std::int64_t samples = 10000;  ///< per point
};

struct ScenarioConfig {
  std::string name = "scenario";
  FeederSpec feeder;
  LoadSpec loads;
  PopulationSpec population;
  ReferenceSpec reference;
  double dt_seconds = 60.0;
  int horizon = 120;                     ///< recorded steps
  double start_seconds = 13.0 * 3600.0;  ///< absolute time of step 0
  utility::SafetyConfig safety{};
  Controller controller = Controller::proposed;
  int bins_per_mode = 20;
  double command_grid_step = 0.01;
  CurveSpec curve{};
  std::uint64_t seed = 1;

  void validate() const;
};

/// Everything a scenario derives from its config before stepping.
struct ScenarioSetup {
  grid::FeederModel feeder;
  double impedance_scale = 1.0;
  load::LoadModel loads;
  tcl::TclPopulation population;
  std::vector<double> reference_kw;  ///< horizon + 1 samples, index k at step k
};

ScenarioSetup build_setup(const ScenarioConfig& config);

struct StepRecord {
  int t = 0;
  double time_seconds = 0.0;
  double p_ref = 0.0;
  double p_agg = 0.0;
  std::optional<double> u;  ///< empty for the OPF benchmark
  double lower = -1.0;
  double upper = 1.0;
  std::optional<double> min_voltage;  ///< empty when the ground-truth solve failed
  bool safe = false;
  std::int64_t samples_used = 0;
  bool infeasible = false;
  double accepted_m = 0.0;
  double w_on_hat = 0.0;
  double w_off_hat = 0.0;
  std::optional<double> w_on_actual;
  std::optional<double> w_off_actual;
  std::string solver_error;
};

struct Summary {
  double rmse_kw = 0.0;
  double safety_probability = 0.0;
  int violation_count = 0;
  int steps = 0;
  double wall_time_seconds = 0.0;
};

struct ScenarioResult {
  std::string name;
  Controller controller = Controller::proposed;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
  std::vector<StepRecord> records;
  Summary summary;
};

Summary compute_metrics(const std::vector<StepRecord>& records);

ScenarioResult run_scenario(const ScenarioConfig& config);
ScenarioResult run_tracking_benchmark(ScenarioConfig config);
ScenarioResult run_opf_benchmark(ScenarioConfig config);

/// Impedance factor placing the TCL-free minimum voltage at peak mean load
/// at `target` (bisection on the factor).
double calibrate_impedance(const grid::FeederModel& feeder, const load::LoadModel& loads, double peak_time,
                           double target);

struct ComparisonRow {
  std::string controller;  ///< tracking, opf, proposed_eps<eps>
  double epsilon = 0.0;    ///< 0 for the benchmarks
  double mean_rmse_kw = 0.0;
  double mean_safety = 0.0;
  int total_violations = 0;
  int total_steps = 0;
  int seeds = 0;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  std::vector<ScenarioResult> runs;
};

/// Tracking, OPF and the proposed controller at each epsilon, on every seed.
/// Runs are independent; `workers` > 1 runs them concurrently.
Comparison compare(const ScenarioConfig& base, const std::vector<std::uint64_t>& seeds,
                   const std::vector<double>& epsilons = {0.05, 0.02}, int workers = 1);

/// Scenario setup plus the utility's observation at one instant, with the
/// fleet in its initial state and the bin model at its measured ON fraction.
struct Snapshot {
  ScenarioSetup setup;
  utility::UtilityObservation observation;
  double now = 0.0;
  double next = 0.0;
};

Snapshot snapshot_at(const ScenarioConfig& config, double time_seconds);

/// The utility's view of one instant.
utility::UtilityObservation observe(const tcl::TclPopulation& population, const grid::NodalInjection& loads_pu,
                                    double kw_per_pu, const aggregator::WFractions& w);

}  // namespace tclsafe::harness
