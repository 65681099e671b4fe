#pragma once

#include <cstdint>
#include <vector>

#include "tclsafe/aggregator.hpp"
#include "tclsafe/certification.hpp"
#include "tclsafe/grid.hpp"
#include "tclsafe/load_model.hpp"
#include "tclsafe/rng.hpp"

namespace tclsafe::utility {

/// The chance-constraint contract.
struct SafetyConfig {
  double epsilon = 0.05;
  double beta = 0.001;
  double v_floor = 0.95;  ///< pu
  std::int64_t max_samples = 100000;
  std::int64_t batch_size = 2000;
  double bisection_tol = 1.0 / 64.0;
  bool use_lindistflow_in_mc = false;
  /// Lower command bound against over-voltage (off unless enabled).
  bool check_over_voltage = false;
  double v_ceiling = 1.05;  ///< pu
  bool futility_stop = true;
  int workers = 0;  ///< 0 = one per hardware thread

  void validate() const;
  certification::TestOptions test_options() const;
};

/// What the utility sees at time t. Powers in pu; element i is node i+1.
struct UtilityObservation {
  grid::NodalInjection measured;
  std::vector<double> w_on;
  std::vector<double> w_off;
  std::vector<int> tcl_counts;
  std::vector<double> avg_real;      ///< p-bar_j, pu
  std::vector<double> avg_reactive;  ///< q-bar_j, pu

  void validate(int node_count) const;
};

/// Per-node pmf over N_j^ON(t); pmf[j][n] for n = 0..n_j^TCL.
struct OnCountPosterior {
  std::vector<std::vector<double>> pmf;
  std::vector<char> degenerate;  ///< node fell back to the Mahalanobis point mass
};

/// Pr(N_j = n | p_j, q_j) proportional to f_j(p_j - p-bar_j n, q_j - q-bar_j n),
/// evaluated with the load law at `time_seconds`. Nodes are independent.
OnCountPosterior posterior_on_counts(const UtilityObservation& obs, const load::LoadModel& loads,
                                     double time_seconds);

/// Intermediate quantities of one realization, exposed for testing.
struct Realization {
  std::vector<int> on_now;     ///< n-tilde^ON(t)
  std::vector<int> s_on;
  std::vector<int> s_off;
  std::vector<int> c_on;
  std::vector<int> c_off;
  std::vector<int> on_next;    ///< n-tilde^ON(t+1)
  grid::NodalInjection injection;
  grid::SweepWorkspace workspace;
  grid::VoltageSolution solution;
  bool diverged = false;
  double min_voltage = 0.0;
  double max_voltage = 0.0;
};

/// One step of the utility's problem: everything that stays fixed across the
/// probes of one constraint-set construction. Immutable; sampling is
/// thread-safe.
class SafetyProblem {
 public:
  SafetyProblem(const grid::FeederModel& feeder, const load::LoadModel& loads, const UtilityObservation& obs,
                double time_now_seconds, double time_next_seconds, const SafetyConfig& config);

  const SafetyConfig& config() const { return config_; }
  const OnCountPosterior& posterior() const { return posterior_; }
  int node_count() const { return n_; }

  /// Steps 1-4 for command u; fills `out`.
  void realize(double u, Stream& rng, Realization& out) const;
  /// x-tilde_u: under-voltage indicator, or the over-voltage one when `under_voltage` is false.
  bool sample(double u, Stream& rng, bool under_voltage = true) const;

 private:
  const grid::FeederModel& feeder_;
  SafetyConfig config_;
  int n_;
  OnCountPosterior posterior_;
  std::vector<std::vector<double>> cdf_;
  std::vector<load::NodeLaw> next_laws_;
  std::vector<int> counts_;
  std::vector<double> p_bar_;
  std::vector<double> q_bar_;
  std::vector<double> w_on_;
  std::vector<double> w_off_;
};

/// Certify command u with the sequential acceptance test. Realization k of
/// probe `probe_id` uses the stream keyed (seed, probe_id, k).
certification::TestResult test_command(const SafetyProblem& problem, double u, std::uint64_t seed,
                                       std::uint64_t probe_id, bool under_voltage = true);

struct ProbeRecord {
  double u = 0.0;
  bool under_voltage = true;
  certification::TestResult result;
};

struct ConstraintResult {
  aggregator::ConstraintSet set;
  bool infeasible = false;
  std::int64_t samples_used = 0;
  double accepted_m = 0.0;  ///< m-tilde of the probe certifying the upper bound
  std::vector<ProbeRecord> probes;
};

/// Largest certified upper bound by bisection starting at u = 1; [-1, -1]
/// plus the infeasible flag when even u = -1 fails.
ConstraintResult construct_constraint_set(const SafetyProblem& problem, std::uint64_t seed);

struct CurvePoint {
  double u = 0.0;
  double nu_hat = 0.0;
  double std_error = 0.0;
  std::int64_t samples = 0;
};

/// Plain Monte-Carlo estimate of nu_u on each grid point.
std::vector<CurvePoint> estimate_safety_curve(const SafetyProblem& problem, const std::vector<double>& u_grid,
                                              std::int64_t samples, std::uint64_t seed);

}  // namespace tclsafe::utility
