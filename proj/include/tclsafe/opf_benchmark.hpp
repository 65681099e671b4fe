#pragma once

#include <vector>

#include "tclsafe/grid.hpp"
#include "tclsafe/tcl.hpp"

namespace tclsafe::opf {

struct OpfInput {
  const tcl::TclPopulation* population = nullptr;
  const grid::FeederModel* feeder = nullptr;
  const grid::LinearSensitivity* sensitivity = nullptr;
  std::vector<double> load_real_max;      ///< p^Lmax per node, pu
  std::vector<double> load_reactive_max;  ///< q^Lmax per node, pu
  double v_floor = 0.95;
  double p_ref_kw = 0.0;
  int exact_limit = 20;  ///< enumerate when at most this many devices are free
};

struct OpfDecision {
  std::vector<char> modes;  ///< next mode per device
  double p_agg_kw = 0.0;
  bool infeasible = false;  ///< voltage limit fails even at the minimum assignment
  bool exact = false;       ///< solved by enumeration
};

/// Mode a device must take next step, or -1 when either mode keeps its
/// temperature inside the dead-band one step later.
int forced_mode(const tcl::TclParams& params, double decay, double next_temperature);

/// Centralized benchmark: pick next modes minimizing |p_agg - p_ref| subject
/// to dead-band containment and LinDistFlow voltages at worst-case loads.
OpfDecision assign_modes(const OpfInput& input);

}  // namespace tclsafe::opf
