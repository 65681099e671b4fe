#include "tclsafe/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tclsafe/error.hpp"

namespace tclsafe::aggregator {

FleetStatistics FleetStatistics::from_population(const tcl::TclPopulation& population) {
  FleetStatistics s;
  s.dt_seconds = population.dt_seconds();
  s.rated_power_total = population.rated_total_kw();
  const auto params = population.params();
  if (params.empty()) return s;
  s.ambient_temp = s.thermal_resistance = s.thermal_capacitance = s.transfer_rate = 0.0;
  s.setpoint = s.deadband_width = 0.0;
  for (const auto& p : params) {
    s.ambient_temp += p.ambient_temp;
    s.thermal_resistance += p.thermal_resistance;
    s.thermal_capacitance += p.thermal_capacitance;
    s.transfer_rate += p.transfer_rate;
    s.setpoint += p.setpoint;
    s.deadband_width += p.deadband_width;
  }
  const double n = static_cast<double>(params.size());
  for (double* v : {&s.ambient_temp, &s.thermal_resistance, &s.thermal_capacitance, &s.transfer_rate,
                    &s.setpoint, &s.deadband_width})
    *v /= n;
  return s;
}

void ConstraintSet::validate() const {
  if (!(lower >= -1.0) || !(upper <= 1.0) || !(lower <= upper))
    throw ConfigError("constraint set must satisfy -1 <= lower <= upper <= 1");
}

namespace {

struct Spread {
  std::vector<double> in_band;  // share landing in each bin
  double below = 0.0;           // share leaving through the lower edge
  double above = 0.0;           // share leaving through the upper edge
};

// Image of a uniform bin under x -> a x + (1 - a) g, split by overlap.
Spread spread_bin(int k, int bins, double a, double g) {
  Spread s;
  s.in_band.assign(static_cast<std::size_t>(bins), 0.0);
  const double h = 1.0 / bins;
  const double lo = a * k * h + (1.0 - a) * g;
  const double hi = a * (k + 1) * h + (1.0 - a) * g;
  const double width = hi - lo;
  s.below = std::clamp((0.0 - lo) / width, 0.0, 1.0);
  s.above = std::clamp((hi - 1.0) / width, 0.0, 1.0);
  for (int b = 0; b < bins; ++b) {
    const double overlap = std::min(hi, (b + 1) * h) - std::max(lo, b * h);
    if (overlap > 0.0) s.in_band[static_cast<std::size_t>(b)] = overlap / width;
  }
  return s;
}

}  // namespace

BinModel::BinModel(const FleetStatistics& stats, int bins_per_mode)
    : bins_(bins_per_mode), rated_power_total_(stats.rated_power_total) {
  if (bins_per_mode < 4 || bins_per_mode % 2 != 0)
    throw ConfigError("bin model needs an even bin count of at least 4, got " +
                      std::to_string(bins_per_mode));
  if (!(stats.deadband_width > 0.0) || !(stats.thermal_resistance > 0.0) ||
      !(stats.thermal_capacitance > 0.0) || !(stats.dt_seconds > 0.0) || !(stats.transfer_rate < 0.0))
    throw ConfigError("fleet statistics do not describe a cooling population");
  if (!(stats.rated_power_total >= 0.0)) throw ConfigError("rated fleet power must be nonnegative");

  const int n = bins_;
  const double a = std::exp(-(stats.dt_seconds / 3600.0) / (stats.thermal_resistance * stats.thermal_capacitance));
  const double lower_edge = stats.setpoint - 0.5 * stats.deadband_width;
  const double g_off = (stats.ambient_temp - lower_edge) / stats.deadband_width;
  const double g_on =
      (stats.ambient_temp + stats.thermal_resistance * stats.transfer_rate - lower_edge) / stats.deadband_width;

  base_ = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  on_push_ = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  off_push_ = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  cross_.assign(static_cast<std::size_t>(2 * n), 0.0);

  for (int k = 0; k < n; ++k) {
    // OFF column: warming; mass past the upper edge turns ON at the top bin.
    const Spread off = spread_bin(k, n, a, g_off);
    base_(k, 0) += off.below;
    base_(k, n + n - 1) += off.above;
    cross_[static_cast<std::size_t>(k)] = off.above;
    for (int b = 0; b < n; ++b) {
      const double w = off.in_band[static_cast<std::size_t>(b)];
      base_(k, b) += w;
      on_push_(k, b) -= w;
      on_push_(k, n + b) += w;
    }
    // ON column: cooling; mass past the lower edge turns OFF at the bottom bin.
    const Spread on = spread_bin(k, n, a, g_on);
    base_(n + k, 0) += on.below;
    base_(n + k, n + n - 1) += on.above;
    cross_[static_cast<std::size_t>(n + k)] = on.below;
    for (int b = 0; b < n; ++b) {
      const double w = on.in_band[static_cast<std::size_t>(b)];
      base_(n + k, n + b) += w;
      off_push_(n + k, n + b) -= w;
      off_push_(n + k, b) += w;
    }
  }
  for (int row = 0; row < 2 * n; ++row) {
    const double total = base_.row(row).sum();
    base_.row(row) /= total;
    on_push_.row(row) /= total;
    off_push_.row(row) /= total;
    cross_[static_cast<std::size_t>(row)] /= total;
  }
  reset_stationary();
}

void BinModel::set_state(std::vector<double> state) {
  if (state.size() != static_cast<std::size_t>(2 * bins_)) throw ConfigError("bin state has the wrong length");
  double total = 0.0;
  for (double v : state) {
    if (!(v >= 0.0)) throw ConfigError("bin state entries must be nonnegative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("bin state must sum to one");
  state_ = std::move(state);
}

Eigen::MatrixXd BinModel::transition(double u) const {
  if (!(std::abs(u) <= 1.0)) throw ConfigError("command must lie in [-1, 1]");
  return base_ + std::max(u, 0.0) * on_push_ + std::max(-u, 0.0) * off_push_;
}

std::vector<double> BinModel::predict(double u) const {
  const Eigen::Map<const Eigen::RowVectorXd> x(state_.data(), static_cast<Eigen::Index>(state_.size()));
  const Eigen::RowVectorXd next = x * transition(u);
  return {next.data(), next.data() + next.size()};
}

double BinModel::on_mass() const {
  double total = 0.0;
  for (int k = bins_; k < 2 * bins_; ++k) total += state_[static_cast<std::size_t>(k)];
  return total;
}

double BinModel::expected_aggregate_power(double u) const {
  const auto next = predict(u);
  double on = 0.0;
  for (int k = bins_; k < 2 * bins_; ++k) on += next[static_cast<std::size_t>(k)];
  return rated_power_total_ * on;
}

WFractions BinModel::estimate_w_fractions() const {
  double off_mass = 0.0, off_cross = 0.0, on_mass = 0.0, on_cross = 0.0;
  for (int k = 0; k < bins_; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const auto j = static_cast<std::size_t>(bins_ + k);
    off_mass += state_[i];
    off_cross += state_[i] * cross_[i];
    on_mass += state_[j];
    on_cross += state_[j] * cross_[j];
  }
  WFractions w;
  if (off_mass >= 1e-12) w.on = std::clamp(off_cross / off_mass, 0.0, 1.0);
  if (on_mass >= 1e-12) w.off = std::clamp(on_cross / on_mass, 0.0, 1.0);
  return w;
}

void BinModel::advance(double u) {
  auto next = predict(u);
  double total = 0.0;
  for (double& v : next) {
    v = std::max(v, 0.0);
    total += v;
  }
  for (double& v : next) v /= total;
  state_ = std::move(next);
}

void BinModel::correct_on_fraction(double fraction) {
  fraction = std::clamp(fraction, 0.0, 1.0);
  const double on = on_mass();
  const double off = 1.0 - on;
  const auto n = static_cast<std::size_t>(bins_);
  const std::vector<double> fallback = stationary();
  double fallback_off = 0.0;
  for (std::size_t k = 0; k < n; ++k) fallback_off += fallback[k];
  for (std::size_t k = 0; k < n; ++k) {
    // An empty column borrows the stationary temperature profile.
    state_[k] = off > 1e-12 ? state_[k] * (1.0 - fraction) / off
                            : fallback[k] / fallback_off * (1.0 - fraction);
    state_[n + k] = on > 1e-12 ? state_[n + k] * fraction / on
                               : fallback[n + k] / (1.0 - fallback_off) * fraction;
  }
}

std::vector<double> BinModel::stationary() const {
  const Eigen::Index m = base_.rows();
  // Solve pi (A0 - I) = 0 with the last equation replaced by sum(pi) = 1.
  Eigen::MatrixXd system = base_.transpose() - Eigen::MatrixXd::Identity(m, m);
  system.row(m - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs(m - 1) = 1.0;
  const Eigen::VectorXd pi = system.fullPivLu().solve(rhs);
  std::vector<double> out(static_cast<std::size_t>(m));
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    out[static_cast<std::size_t>(i)] = std::max(pi(i), 0.0);
    total += out[static_cast<std::size_t>(i)];
  }
  for (double& v : out) v /= total;
  return out;
}

void BinModel::reset_stationary() { state_ = stationary(); }

double choose_command(const BinModel& model, double p_ref_kw, const ConstraintSet& bounds, double grid_step) {
  bounds.validate();
  if (!(grid_step > 0.0)) throw ConfigError("command grid step must be positive");

  double best_u = bounds.lower;
  double best_err = std::abs(model.expected_aggregate_power(bounds.lower) - p_ref_kw);
  auto consider = [&](double u) {
    const double err = std::abs(model.expected_aggregate_power(u) - p_ref_kw);
    if (err < best_err || (err == best_err && std::abs(u) < std::abs(best_u))) {
      best_err = err;
      best_u = u;
    }
  };
  for (long k = 1;; ++k) {
    const double u = bounds.lower + static_cast<double>(k) * grid_step;
    if (u >= bounds.upper) break;
    consider(u);
  }
  consider(bounds.upper);
  if (bounds.contains(0.0)) consider(0.0);
  return best_u;
}

}  // namespace tclsafe::aggregator
