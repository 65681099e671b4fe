#include "tclsafe/opf_benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstdint>

#include "tclsafe/error.hpp"

namespace tclsafe::opf {

int forced_mode(const tcl::TclParams& p, double decay, double next_temperature) {
  if (next_temperature >= p.upper()) return 1;
  if (next_temperature <= p.lower()) return 0;
  const double off = decay * next_temperature + (1.0 - decay) * p.ambient_temp;
  const double on = decay * next_temperature + (1.0 - decay) * (p.ambient_temp + p.thermal_resistance * p.transfer_rate);
  const bool off_ok = off <= p.upper();
  const bool on_ok = on >= p.lower();
  if (off_ok && on_ok) return -1;
  if (off_ok) return 0;
  if (on_ok) return 1;
  return next_temperature > p.setpoint ? 1 : 0;
}

namespace {

// Squared LinDistFlow voltages with an incremental per-device update.
class VoltageTracker {
 public:
  VoltageTracker(const OpfInput& in) : in_(in), n_(in.feeder->node_count()) {
    const double v0 = in.feeder->substation_voltage();
    v2_.assign(static_cast<std::size_t>(n_), v0 * v0);
    for (int l = 0; l < n_; ++l) apply(l, in.load_real_max[static_cast<std::size_t>(l)],
                                       in.load_reactive_max[static_cast<std::size_t>(l)], 1.0);
    floor2_ = in.v_floor * in.v_floor;
  }

  void apply(int node, double p, double q, double sign) {
    for (int j = 0; j < n_; ++j)
      v2_[static_cast<std::size_t>(j)] -=
          sign * (in_.sensitivity->real(j, node) * p + in_.sensitivity->reactive(j, node) * q);
  }

  bool feasible() const {
    return std::all_of(v2_.begin(), v2_.end(), [&](double v) { return v >= floor2_; });
  }

 private:
  const OpfInput& in_;
  int n_;
  std::vector<double> v2_;
  double floor2_ = 0.0;
};

}  // namespace

OpfDecision assign_modes(const OpfInput& in) {
  if (!in.population || !in.feeder || !in.sensitivity) throw ConfigError("OPF benchmark input is incomplete");
  const auto& pop = *in.population;
  const auto& feeder = *in.feeder;
  const double kw = feeder.base().kw_per_pu();
  if (in.load_real_max.size() != static_cast<std::size_t>(feeder.node_count()) ||
      in.load_reactive_max.size() != static_cast<std::size_t>(feeder.node_count()))
    throw ConfigError("worst-case load vectors must have one entry per node");

  const auto params = pop.params();
  const auto decay = pop.decay();
  const auto next = pop.next_temperatures();
  const std::size_t count = pop.size();

  OpfDecision out;
  out.modes.assign(count, 0);
  VoltageTracker tracker(in);
  double p_agg = 0.0;
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < count; ++i) {
    const int forced = forced_mode(params[i], decay[i], next[i]);
    if (forced == 1) {
      out.modes[i] = 1;
      p_agg += params[i].rated_real();
      tracker.apply(params[i].node - 1, params[i].rated_real() / kw, params[i].rated_reactive() / kw, 1.0);
    } else if (forced == -1) {
      free.push_back(i);
    }
  }
  if (!tracker.feasible()) {
    // Forced devices stay ON to keep their temperatures contained; free
    // devices stay OFF.
    out.infeasible = true;
    out.p_agg_kw = p_agg;
    return out;
  }

  auto add = [&](std::size_t i, double sign) {
    const auto& p = params[i];
    tracker.apply(p.node - 1, p.rated_real() / kw, p.rated_reactive() / kw, sign);
    p_agg += sign * p.rated_real();
  };

  if (static_cast<int>(free.size()) <= in.exact_limit) {
    // Gray-code enumeration: one device flips per step.
    out.exact = true;
    const std::uint64_t total = std::uint64_t{1} << free.size();
    std::uint64_t best_code = 0;
    double best_err = std::abs(p_agg - in.p_ref_kw);
    std::uint64_t code = 0;
    for (std::uint64_t k = 1; k < total; ++k) {
      const int bit = std::countr_zero(k);
      const std::uint64_t flip = std::uint64_t{1} << bit;
      add(free[static_cast<std::size_t>(bit)], (code & flip) ? -1.0 : 1.0);
      code ^= flip;
      const double err = std::abs(p_agg - in.p_ref_kw);
      if (err < best_err && tracker.feasible()) {
        best_err = err;
        best_code = code;
      }
    }
    p_agg = 0.0;
    for (std::size_t i = 0; i < count; ++i)
      if (out.modes[i]) p_agg += params[i].rated_real();
    for (std::size_t b = 0; b < free.size(); ++b) {
      if (best_code & (std::uint64_t{1} << b)) {
        out.modes[free[b]] = 1;
        p_agg += params[free[b]].rated_real();
      }
    }
    out.p_agg_kw = p_agg;
    return out;
  }

  // Greedy: warmest devices (relative to their band) first.
  std::stable_sort(free.begin(), free.end(), [&](std::size_t a, std::size_t b) {
    const double ma = (next[a] - params[a].lower()) / params[a].deadband_width;
    const double mb = (next[b] - params[b].lower()) / params[b].deadband_width;
    return ma > mb;
  });
  for (std::size_t i : free) {
    const double before = std::abs(p_agg - in.p_ref_kw);
    if (std::abs(p_agg + params[i].rated_real() - in.p_ref_kw) >= before) continue;
    add(i, 1.0);
    if (tracker.feasible()) {
      out.modes[i] = 1;
    } else {
      add(i, -1.0);
    }
  }
  out.p_agg_kw = p_agg;
  return out;
}

}  // namespace tclsafe::opf
