#pragma once

#include <utility>
#include <vector>

#include "tclsafe/range.hpp"
#include "tclsafe/rng.hpp"

namespace tclsafe::load {

/// Piecewise-linear multiplier of the nominal load over absolute time,
/// held constant outside the first and last knot.
struct MultiplierProfile {
  std::vector<std::pair<double, double>> knots;  ///< (time_s, multiplier), increasing time

  double at(double time_seconds) const;
  double min_value() const;
  double max_value() const;
  void validate() const;

  /// 0.5 at 13.0 h rising to 0.65 at 13.9 h, flat to 14.1 h, back to 0.5 at 15.0 h.
  static MultiplierProfile afternoon_peak();
  static MultiplierProfile constant(double value);
};

/// Moments and truncation box of one node's load at one instant.
struct NodeLaw {
  double mean_real = 0.0;
  double mean_reactive = 0.0;
  double sd_real = 0.0;
  double sd_reactive = 0.0;
  Range real_box;
  Range reactive_box;
  double correlation = 0.0;
};

struct LoadModelSpec {
  std::vector<double> nominal_real;      ///< p^Ln per node, pu
  std::vector<double> nominal_reactive;  ///< q^Ln per node, pu
  MultiplierProfile real_profile = MultiplierProfile::afternoon_peak();
  MultiplierProfile reactive_profile = MultiplierProfile::afternoon_peak();
  double sd_fraction_real = 0.15;        ///< sd as a fraction of nominal
  double sd_fraction_reactive = 0.15;
  Range truncation_fraction{-0.25, 0.675};  ///< box as fractions of nominal
  double correlation = 0.0;              ///< real/reactive correlation within a node
};

/// Uncontrollable nodal loads: independent across nodes, truncated bivariate
/// normal within a node. Immutable and shareable across threads.
class LoadModel {
 public:
  explicit LoadModel(LoadModelSpec spec);

  int node_count() const { return static_cast<int>(spec_.nominal_real.size()); }
  const LoadModelSpec& spec() const { return spec_; }

  /// Law of node j (0-based) at absolute time t.
  NodeLaw law(int node, double time_seconds) const;

  /// Log of the unnormalized truncated density (-inf outside the box).
  static double log_kernel(const NodeLaw& law, double p, double q);
  /// Mass of the untruncated bivariate normal inside the box.
  static double box_mass(const NodeLaw& law);
  /// Normalized truncated density.
  static double density(const NodeLaw& law, double p, double q);
  /// Numerical integral of `density` over the box; should be 1.
  static double integrate_density(const NodeLaw& law);

  /// One exact draw from the truncated law.
  static std::pair<double, double> draw(const NodeLaw& law, Stream& rng);
  /// Draw every node at time t into p, q (length n).
  void sample(double time_seconds, Stream& rng, std::vector<double>& p, std::vector<double>& q) const;

  /// Truncation upper bounds p^Lmax, q^Lmax per node.
  std::vector<double> max_real() const;
  std::vector<double> max_reactive() const;
  std::vector<double> mean_real(double time_seconds) const;
  std::vector<double> mean_reactive(double time_seconds) const;

 private:
  LoadModelSpec spec_;
};

}  // namespace tclsafe::load
