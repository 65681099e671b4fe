#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tclsafe/tcl.hpp"

namespace tclsafe::aggregator {

/// Population statistics the aggregator is allowed to know: parameter means,
/// the fleet's total rated draw and the control step.
struct FleetStatistics {
  double ambient_temp = 30.0;
  double thermal_resistance = 1.85;
  double thermal_capacitance = 2.0;
  double transfer_rate = -16.0;
  double setpoint = 22.5;
  double deadband_width = 1.75;
  double rated_power_total = 0.0;  ///< kW, sum of |p^i|
  double dt_seconds = 60.0;

  static FleetStatistics from_population(const tcl::TclPopulation& population);
};

/// Admissible command interval [lower, upper] inside [-1, 1].
struct ConstraintSet {
  double lower = -1.0;
  double upper = 1.0;

  void validate() const;
  bool contains(double u) const { return u >= lower && u <= upper; }
};

/// Thermostat switch fractions forecast for the next step.
struct WFractions {
  double on = 0.0;   ///< share of OFF devices the thermostat turns ON
  double off = 0.0;  ///< share of ON devices the thermostat turns OFF
};

/// Two-column Markov bin model over normalized dead-band temperature.
/// State index k < N is OFF bin k, N + k is ON bin k; bin 0 sits at the
/// lower dead-band edge. A(u) = A0 + u+ B_on + u- B_off, where the command
/// parts move in-band mass to the mirrored bin of the other column.
class BinModel {
 public:
  explicit BinModel(const FleetStatistics& stats, int bins_per_mode = 20);

  int bin_count() const { return bins_; }
  double rated_power_total() const { return rated_power_total_; }
  std::span<const double> state() const { return state_; }
  void set_state(std::vector<double> state);

  /// Row-stochastic 2N x 2N transition matrix for command u.
  Eigen::MatrixXd transition(double u) const;
  /// State distribution one step ahead under u; does not mutate.
  std::vector<double> predict(double u) const;

  double on_mass() const;
  double expected_aggregate_power(double u) const;
  WFractions estimate_w_fractions() const;

  void advance(double u);
  /// Rescale the columns so the ON mass equals a measured ON fraction,
  /// keeping each column's temperature profile.
  void correct_on_fraction(double fraction);
  /// Stationary distribution of A(0).
  void reset_stationary();
  std::vector<double> stationary() const;

 private:
  int bins_;
  double rated_power_total_;
  Eigen::MatrixXd base_;
  Eigen::MatrixXd on_push_;
  Eigen::MatrixXd off_push_;
  std::vector<double> cross_;  ///< thermostat crossing probability per state
  std::vector<double> state_;
};

/// Grid search of |E[P_agg](u) - p_ref| over {lower, lower + step, ...} plus
/// upper (and 0 when admissible); ties go to the smallest |u|.
double choose_command(const BinModel& model, double p_ref_kw, const ConstraintSet& bounds,
                      double grid_step = 0.01);

}  // namespace tclsafe::aggregator
