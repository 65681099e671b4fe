#include "tclsafe/grid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "tclsafe/error.hpp"

namespace tclsafe::grid {

FeederModel::FeederModel(int node_count, std::vector<Branch> branches, double substation_voltage,
                         PerUnitBase base)
    : node_count_(node_count), v0_(substation_voltage), base_(base) {
  if (node_count < 1) throw StructureError("feeder needs at least one node besides the substation");
  if (!(substation_voltage > 0.0) || !std::isfinite(substation_voltage))
    throw ConfigError("substation voltage must be positive");
  if (!(base.power_mva > 0.0) || !(base.voltage_kv > 0.0))
    throw ConfigError("per-unit bases must be positive");
  if (static_cast<int>(branches.size()) != node_count)
    throw StructureError("a radial feeder with " + std::to_string(node_count) + " nodes needs exactly " +
                         std::to_string(node_count) + " branches, got " +
                         std::to_string(branches.size()));

  const auto n = static_cast<std::size_t>(node_count);
  parent_.assign(n + 1, -1);
  r_.assign(n + 1, 0.0);
  x_.assign(n + 1, 0.0);
  children_.assign(n + 1, {});

  for (const Branch& b : branches) {
    if (b.to < 1 || b.to > node_count)
      throw StructureError("branch receiving node " + std::to_string(b.to) + " out of range");
    if (b.from < 0 || b.from > node_count || b.from == b.to)
      throw StructureError("branch into node " + std::to_string(b.to) + " has invalid sending node " +
                           std::to_string(b.from));
    if (parent_[b.to] != -1)
      throw StructureError("node " + std::to_string(b.to) + " has more than one parent");
    if (!(b.r > 0.0) || !(b.x > 0.0) || !std::isfinite(b.r) || !std::isfinite(b.x))
      throw ConfigError("branch into node " + std::to_string(b.to) + " needs r > 0 and x > 0");
    parent_[b.to] = b.from;
    r_[b.to] = b.r;
    x_[b.to] = b.x;
    children_[b.from].push_back(b.to);
  }
  for (auto& c : children_) std::sort(c.begin(), c.end());

  order_.reserve(n);
  std::deque<int> queue{0};
  while (!queue.empty()) {
    const int node = queue.front();
    queue.pop_front();
    for (int child : children_[node]) {
      order_.push_back(child);
      queue.push_back(child);
    }
  }
  if (order_.size() != n)
    throw StructureError("feeder graph is not a tree rooted at the substation (cycle or disconnected node)");

  ancestors_.assign(n + 1, {});
  descendants_.assign(n + 1, {});
  for (int node : order_) {
    auto& path = ancestors_[node];
    path.push_back(node);
    const int up = parent_[node];
    if (up != 0) path.insert(path.end(), ancestors_[up].begin(), ancestors_[up].end());
    for (int a : path) descendants_[a].push_back(node);
  }
}

std::vector<Branch> FeederModel::branches() const {
  std::vector<Branch> out;
  out.reserve(static_cast<std::size_t>(node_count_));
  for (int j = 1; j <= node_count_; ++j) out.push_back({parent_[j], j, r_[j], x_[j]});
  return out;
}

FeederModel FeederModel::scaled_impedance(double factor) const {
  if (!(factor > 0.0)) throw ConfigError("impedance scale must be positive");
  auto list = branches();
  for (auto& b : list) {
    b.r *= factor;
    b.x *= factor;
  }
  return FeederModel(node_count_, std::move(list), v0_, base_);
}

NodalInjection NodalInjection::zeros(int node_count) {
  const auto n = static_cast<std::size_t>(node_count);
  return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
}

void NodalInjection::validate(int node_count) const {
  const auto n = static_cast<std::size_t>(node_count);
  if (real_power.size() != n || reactive_power.size() != n)
    throw ConfigError("nodal injection length does not match node count " + std::to_string(node_count));
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(real_power[i]) || !std::isfinite(reactive_power[i]))
      throw ConfigError("non-finite injection at node " + std::to_string(i + 1));
}

double VoltageSolution::min_voltage() const {
  return voltage.empty() ? std::numeric_limits<double>::quiet_NaN()
                         : *std::min_element(voltage.begin(), voltage.end());
}

double VoltageSolution::max_voltage() const {
  return voltage.empty() ? std::numeric_limits<double>::quiet_NaN()
                         : *std::max_element(voltage.begin(), voltage.end());
}

namespace {

[[noreturn]] void collapse(int node, double v2) {
  throw DivergenceError("voltage collapse at node " + std::to_string(node) +
                            " (squared voltage " + std::to_string(v2) + ")",
                        node);
}

}  // namespace

void solve_distflow(const FeederModel& feeder, const NodalInjection& injection, const SweepOptions& options,
                    SweepWorkspace& ws, VoltageSolution& out) {
  const int n = feeder.node_count();
  injection.validate(n);
  if (!(options.tolerance > 0.0)) throw ConfigError("sweep tolerance must be positive");
  if (options.max_iterations < 1) throw ConfigError("sweep needs at least one iteration");

  const auto order = feeder.topological_order();
  const auto size = static_cast<std::size_t>(n) + 1;
  const double v0sq = feeder.substation_voltage() * feeder.substation_voltage();

  auto& v2 = ws.v2;
  auto& pb = ws.pb;
  auto& qb = ws.qb;
  // Squared branch current, evaluated with sending-end flow and voltage.
  auto& loss = ws.loss;
  v2.assign(size, v0sq);
  pb.assign(size, 0.0);
  qb.assign(size, 0.0);
  loss.assign(size, 0.0);

  out.converged = false;
  out.iterations = 0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    for (int j : order) {
      pb[j] = injection.real_power[j - 1] + feeder.resistance(j) * loss[j];
      qb[j] = injection.reactive_power[j - 1] + feeder.reactance(j) * loss[j];
    }
    for (auto k = order.rbegin(); k != order.rend(); ++k) {
      const int up = feeder.parent(*k);
      if (up != 0) {
        pb[up] += pb[*k];
        qb[up] += qb[*k];
      }
    }

    // |v' - v| < tol follows from (v'^2 - v^2)^2 < tol^2 (v'^2 + v^2), which
    // needs no square roots.
    bool settled = true;
    const double tol2 = options.tolerance * options.tolerance;
    for (int j : order) {
      const double r = feeder.resistance(j);
      const double x = feeder.reactance(j);
      const double next = v2[feeder.parent(j)] - 2.0 * (r * pb[j] + x * qb[j]) + (r * r + x * x) * loss[j];
      if (!(next > 0.0)) collapse(j, next);
      const double d = next - v2[j];
      settled = settled && d * d < tol2 * (next + v2[j]);
      v2[j] = next;
    }

    for (int j : order) loss[j] = (pb[j] * pb[j] + qb[j] * qb[j]) / v2[feeder.parent(j)];

    out.iterations = it;
    if (settled) {
      out.converged = true;
      break;
    }
  }

  out.voltage.resize(size - 1);
  out.branch_real.resize(size - 1);
  out.branch_reactive.resize(size - 1);
  for (int j = 1; j <= n; ++j) {
    out.voltage[j - 1] = std::sqrt(v2[j]);
    out.branch_real[j - 1] = pb[j];
    out.branch_reactive[j - 1] = qb[j];
  }
}

VoltageSolution solve_distflow(const FeederModel& feeder, const NodalInjection& injection,
                               const SweepOptions& options) {
  SweepWorkspace ws;
  VoltageSolution out;
  solve_distflow(feeder, injection, options, ws, out);
  return out;
}

void solve_lindistflow(const FeederModel& feeder, const NodalInjection& injection, SweepWorkspace& ws,
                       VoltageSolution& out) {
  const int n = feeder.node_count();
  injection.validate(n);
  const auto order = feeder.topological_order();
  const auto size = static_cast<std::size_t>(n) + 1;

  auto& pb = ws.pb;
  auto& qb = ws.qb;
  pb.assign(size, 0.0);
  qb.assign(size, 0.0);
  for (int j : order) {
    pb[j] = injection.real_power[j - 1];
    qb[j] = injection.reactive_power[j - 1];
  }
  for (auto k = order.rbegin(); k != order.rend(); ++k) {
    const int up = feeder.parent(*k);
    if (up != 0) {
      pb[up] += pb[*k];
      qb[up] += qb[*k];
    }
  }

  auto& v2 = ws.v2;
  v2.assign(size, feeder.substation_voltage() * feeder.substation_voltage());
  for (int j : order) {
    const double next =
        v2[feeder.parent(j)] - 2.0 * (feeder.resistance(j) * pb[j] + feeder.reactance(j) * qb[j]);
    if (!(next > 0.0)) collapse(j, next);
    v2[j] = next;
  }

  out.converged = true;
  out.iterations = 1;
  out.voltage.resize(size - 1);
  out.branch_real.assign(pb.begin() + 1, pb.end());
  out.branch_reactive.assign(qb.begin() + 1, qb.end());
  for (int j = 1; j <= n; ++j) out.voltage[j - 1] = std::sqrt(v2[j]);
}

VoltageSolution solve_lindistflow(const FeederModel& feeder, const NodalInjection& injection) {
  SweepWorkspace ws;
  VoltageSolution out;
  solve_lindistflow(feeder, injection, ws, out);
  return out;
}

bool min_voltage_safe(const VoltageSolution& solution, double v_floor) {
  if (!solution.converged)
    throw Error("safety indicator requested for an unconverged power-flow solution");
  return solution.min_voltage() >= v_floor;
}

LinearSensitivity lindistflow_sensitivity(const FeederModel& feeder) {
  const int n = feeder.node_count();
  LinearSensitivity s{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  std::vector<char> on_path(static_cast<std::size_t>(n) + 1, 0);
  for (int j = 1; j <= n; ++j) {
    for (int a : feeder.ancestors(j)) on_path[a] = 1;
    for (int l = 1; l <= n; ++l) {
      double rp = 0.0;
      double xq = 0.0;
      for (int k : feeder.ancestors(l)) {
        if (on_path[k]) {
          rp += feeder.resistance(k);
          xq += feeder.reactance(k);
        }
      }
      s.real(j - 1, l - 1) = 2.0 * rp;
      s.reactive(j - 1, l - 1) = 2.0 * xq;
    }
    for (int a : feeder.ancestors(j)) on_path[a] = 0;
  }
  return s;
}

}  // namespace tclsafe::grid
