#pragma once

#include <complex>
#include <vector>

#include "tclsafe/grid.hpp"
#include "tclsafe/rng.hpp"

namespace testing {

using tclsafe::grid::Branch;
using tclsafe::grid::FeederModel;
using tclsafe::grid::NodalInjection;

inline FeederModel line(double r, double x, double v0 = 1.0) { return FeederModel(1, {{0, 1, r, x}}, v0); }

inline FeederModel chain(int n, double r, double x) {
  std::vector<Branch> b;
  for (int j = 1; j <= n; ++j) b.push_back({j - 1, j, r, x});
  return FeederModel(n, std::move(b), 1.0);
}

/// Random tree: node j hangs off a uniformly chosen earlier node.
inline FeederModel random_feeder(tclsafe::Stream& rng, int n, double zmax = 0.01) {
  std::vector<Branch> b;
  for (int j = 1; j <= n; ++j) {
    const int parent = static_cast<int>(rng.uniform() * j);
    b.push_back({parent, j, 1e-4 + zmax * rng.uniform(), 1e-4 + zmax * rng.uniform()});
  }
  return FeederModel(n, std::move(b), 1.0);
}

inline NodalInjection random_injection(tclsafe::Stream& rng, int n, double pmax, double qmax) {
  NodalInjection inj;
  for (int j = 0; j < n; ++j) {
    inj.real_power.push_back(pmax * rng.uniform());
    inj.reactive_power.push_back(qmax * rng.uniform());
  }
  return inj;
}

/// Phasor power flow by current summation; returns |V_j| for j = 1..n.
inline std::vector<double> phasor_voltages(const FeederModel& f, const NodalInjection& inj) {
  using C = std::complex<double>;
  const int n = f.node_count();
  std::vector<C> v(n + 1, C(f.substation_voltage(), 0.0));
  std::vector<C> i(n + 1);
  for (int it = 0; it < 500; ++it) {
    for (int j = 1; j <= n; ++j) i[j] = std::conj(C(inj.real_power[j - 1], inj.reactive_power[j - 1]) / v[j]);
    auto order = f.topological_order();
    for (auto k = order.rbegin(); k != order.rend(); ++k)
      if (f.parent(*k) != 0) i[f.parent(*k)] += i[*k];
    double change = 0.0;
    for (int j : order) {
      const C next = v[f.parent(j)] - C(f.resistance(j), f.reactance(j)) * i[j];
      change = std::max(change, std::abs(next - v[j]));
      v[j] = next;
    }
    if (change < 1e-15) break;
  }
  std::vector<double> out;
  for (int j = 1; j <= n; ++j) out.push_back(std::abs(v[j]));
  return out;
}

}  // namespace testing
