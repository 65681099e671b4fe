#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace tclsafe::grid {

/// A line section; `to` is the receiving node and carries the branch index.
struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;  ///< resistance, pu
  double x = 0.0;  ///< reactance, pu
};

/// Per-unit bases. Only conversion helpers read these; the equations are
/// written entirely in per-unit.
struct PerUnitBase {
  double power_mva = 1.0;
  double voltage_kv = 12.35;

  double kw_per_pu() const { return power_mva * 1000.0; }
};

/// Radial feeder rooted at the substation (node 0). Nodes 1..n each receive
/// exactly one branch. Immutable after construction; ancestor and descendant
/// sets are cached at load time.
class FeederModel {
 public:
  FeederModel(int node_count, std::vector<Branch> branches, double substation_voltage,
              PerUnitBase base = {});

  int node_count() const { return node_count_; }
  double substation_voltage() const { return v0_; }
  const PerUnitBase& base() const { return base_; }

  /// e(j) for j in 1..n.
  int parent(int node) const { return parent_[node]; }
  /// c(j) for j in 0..n.
  std::span<const int> children(int node) const { return children_[node]; }
  double resistance(int node) const { return r_[node]; }
  double reactance(int node) const { return x_[node]; }

  /// Nodes 1..n with every parent listed before its children.
  std::span<const int> topological_order() const { return order_; }
  /// a(j): path from j up to (excluding) the substation, j included.
  std::span<const int> ancestors(int node) const { return ancestors_[node]; }
  /// d(j): subtree of j, j included.
  std::span<const int> descendants(int node) const { return descendants_[node]; }

  /// Branch list in receiving-node order 1..n.
  std::vector<Branch> branches() const;

  /// Copy with every branch impedance multiplied by `factor`.
  FeederModel scaled_impedance(double factor) const;

 private:
  int node_count_;
  double v0_;
  PerUnitBase base_;
  std::vector<int> parent_;
  std::vector<double> r_;
  std::vector<double> x_;
  std::vector<std::vector<int>> children_;
  std::vector<int> order_;
  std::vector<std::vector<int>> ancestors_;
  std::vector<std::vector<int>> descendants_;
};

/// Nodal consumption in pu; element i belongs to node i+1.
struct NodalInjection {
  std::vector<double> real_power;
  std::vector<double> reactive_power;

  static NodalInjection zeros(int node_count);
  void validate(int node_count) const;
};

/// Solver output; element i belongs to node i+1.
struct VoltageSolution {
  std::vector<double> voltage;
  std::vector<double> branch_real;
  std::vector<double> branch_reactive;
  bool converged = false;
  int iterations = 0;

  double min_voltage() const;
  double max_voltage() const;
};

struct SweepOptions {
  double tolerance = 1e-10;
  int max_iterations = 50;
};

/// Exact branch-flow (DistFlow) solution by backward-forward sweep.
/// Throws DivergenceError when a squared voltage becomes non-positive.
VoltageSolution solve_distflow(const FeederModel& feeder, const NodalInjection& injection,
                               const SweepOptions& options = {});

/// Scratch storage for repeated solves.
struct SweepWorkspace {
  std::vector<double> v2, pb, qb, loss;
};

/// Same as above but reuses the storage of `workspace` and `out`.
void solve_distflow(const FeederModel& feeder, const NodalInjection& injection, const SweepOptions& options,
                    SweepWorkspace& workspace, VoltageSolution& out);
void solve_lindistflow(const FeederModel& feeder, const NodalInjection& injection, SweepWorkspace& workspace,
                       VoltageSolution& out);

/// Lossless LinDistFlow closed form. Always converged; throws DivergenceError
/// if the linearized squared voltage is non-positive.
VoltageSolution solve_lindistflow(const FeederModel& feeder, const NodalInjection& injection);

/// True iff min_j v_j >= v_floor. Throws if the solution did not converge.
bool min_voltage_safe(const VoltageSolution& solution, double v_floor);

/// Squared-voltage sensitivities of LinDistFlow: v^2 = v0^2 - Phi_p p - Phi_q q
/// with Phi_p(j,l) = 2 * sum of r_k over branches shared by paths a(j), a(l).
struct LinearSensitivity {
  Eigen::MatrixXd real;
  Eigen::MatrixXd reactive;
};
LinearSensitivity lindistflow_sensitivity(const FeederModel& feeder);

}  // namespace tclsafe::grid
