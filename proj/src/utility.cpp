#include "tclsafe/utility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "tclsafe/error.hpp"
#include "tclsafe/log.hpp"
#include "tclsafe/parallel.hpp"

namespace tclsafe::utility {

void SafetyConfig::validate() const {
  test_options().validate();
  if (!(v_floor > 0.0)) throw ConfigError("voltage floor must be positive");
  if (!(bisection_tol > 0.0)) throw ConfigError("bisection tolerance must be positive");
  if (check_over_voltage && !(v_ceiling > v_floor)) throw ConfigError("voltage ceiling must exceed the floor");
  if (workers < 0) throw ConfigError("worker count must be >= 0");
}

certification::TestOptions SafetyConfig::test_options() const {
  return {epsilon, beta, max_samples, batch_size, futility_stop};
}

void UtilityObservation::validate(int node_count) const {
  measured.validate(node_count);
  const auto n = static_cast<std::size_t>(node_count);
  if (w_on.size() != n || w_off.size() != n || tcl_counts.size() != n || avg_real.size() != n ||
      avg_reactive.size() != n)
    throw ConfigError("utility observation vectors must have one entry per node");
  for (std::size_t j = 0; j < n; ++j) {
    if (!(w_on[j] >= 0.0 && w_on[j] <= 1.0) || !(w_off[j] >= 0.0 && w_off[j] <= 1.0))
      throw ConfigError("thermostat switch fractions must lie in [0, 1]");
    if (tcl_counts[j] < 0) throw ConfigError("TCL counts must be nonnegative");
    if (!std::isfinite(avg_real[j]) || !std::isfinite(avg_reactive[j]))
      throw ConfigError("average TCL powers must be finite");
  }
}

namespace {

double mahalanobis2(const load::NodeLaw& law, double p, double q) {
  const double sp = std::max(law.sd_real, 1e-12);
  const double sq = std::max(law.sd_reactive, 1e-12);
  const double zp = (p - law.mean_real) / sp;
  const double zq = (q - law.mean_reactive) / sq;
  const double rho = std::clamp(law.correlation, -0.999999, 0.999999);
  return (zp * zp - 2.0 * rho * zp * zq + zq * zq) / (1.0 - rho * rho);
}

}  // namespace

OnCountPosterior posterior_on_counts(const UtilityObservation& obs, const load::LoadModel& loads,
                                     double time_seconds) {
  const int n = loads.node_count();
  obs.validate(n);
  OnCountPosterior out;
  out.pmf.resize(static_cast<std::size_t>(n));
  out.degenerate.assign(static_cast<std::size_t>(n), 0);
  for (int j = 0; j < n; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    const int count = obs.tcl_counts[jj];
    auto& pmf = out.pmf[jj];
    pmf.assign(static_cast<std::size_t>(count) + 1, 0.0);
    if (count == 0) {
      pmf[0] = 1.0;
      continue;
    }
    const load::NodeLaw law = loads.law(j, time_seconds);
    const double p = obs.measured.real_power[jj];
    const double q = obs.measured.reactive_power[jj];
    std::vector<double> logk(pmf.size());
    double top = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= count; ++k) {
      logk[static_cast<std::size_t>(k)] =
          load::LoadModel::log_kernel(law, p - obs.avg_real[jj] * k, q - obs.avg_reactive[jj] * k);
      top = std::max(top, logk[static_cast<std::size_t>(k)]);
    }
    if (top == -std::numeric_limits<double>::infinity()) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k <= count; ++k) {
        const double d = mahalanobis2(law, p - obs.avg_real[jj] * k, q - obs.avg_reactive[jj] * k);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      pmf[static_cast<std::size_t>(best)] = 1.0;
      out.degenerate[jj] = 1;
      log::debug("posterior: node " + std::to_string(j + 1) +
                 ": measurement outside the load support, using point mass at " + std::to_string(best));
      continue;
    }
    double total = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
      pmf[k] = std::exp(logk[k] - top);
      total += pmf[k];
    }
    for (double& v : pmf) v /= total;
  }
  return out;
}

namespace {

// Small counts are summed Bernoulli trials, which beats setting up the
// general sampler on every call.
int binomial(int trials, double p, Stream& rng) {
  if (trials > 64) return std::binomial_distribution<int>(trials, p)(rng);
  int hits = 0;
  for (int i = 0; i < trials; ++i) hits += rng.uniform() < p;
  return hits;
}

}  // namespace

SafetyProblem::SafetyProblem(const grid::FeederModel& feeder, const load::LoadModel& loads,
                             const UtilityObservation& obs, double time_now_seconds, double time_next_seconds,
                             const SafetyConfig& config)
    : feeder_(feeder), config_(config), n_(feeder.node_count()) {
  config_.validate();
  if (loads.node_count() != n_) throw ConfigError("load model and feeder disagree on the node count");
  posterior_ = posterior_on_counts(obs, loads, time_now_seconds);
  const auto n = static_cast<std::size_t>(n_);
  cdf_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& pmf = posterior_.pmf[j];
    cdf_[j].resize(pmf.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) cdf_[j][k] = acc += pmf[k];
    cdf_[j].back() = 1.0;
    next_laws_.push_back(loads.law(static_cast<int>(j), time_next_seconds));
  }
  counts_ = obs.tcl_counts;
  p_bar_ = obs.avg_real;
  q_bar_ = obs.avg_reactive;
  w_on_ = obs.w_on;
  w_off_ = obs.w_off;
}

void SafetyProblem::realize(double u, Stream& rng, Realization& out) const {
  const auto n = static_cast<std::size_t>(n_);
  for (auto* v : {&out.on_now, &out.s_on, &out.s_off, &out.c_on, &out.c_off, &out.on_next})
    v->resize(n);
  out.injection.real_power.resize(n);
  out.injection.reactive_power.resize(n);
  const double up = std::max(u, 0.0);
  const double down = std::max(-u, 0.0);

  for (std::size_t j = 0; j < n; ++j) {
    // Step 1: ON count now, loads next step.
    const double z = rng.uniform();
    const int on = static_cast<int>(std::upper_bound(cdf_[j].begin(), cdf_[j].end() - 1, z) - cdf_[j].begin());
    const int off = counts_[j] - on;
    const auto [pl, ql] = load::LoadModel::draw(next_laws_[j], rng);
    // Step 2: thermostat switches, rounded to whole devices.
    const int s_on = std::clamp(static_cast<int>(std::lround(w_on_[j] * off)), 0, off);
    const int s_off = std::clamp(static_cast<int>(std::lround(w_off_[j] * on)), 0, on);
    // Step 3: command switches.
    int c_on = 0;
    int c_off = 0;
    if (up > 0.0 && off - s_on > 0) c_on = binomial(off - s_on, up, rng);
    if (down > 0.0 && on - s_off > 0) c_off = binomial(on - s_off, down, rng);
    // Step 4: next ON count and nodal consumption.
    int next = on + s_on - s_off + c_on - c_off;
    if (next < 0 || next > counts_[j]) {
      log::warn("utility: node " + std::to_string(j + 1) + ": sampled ON count " + std::to_string(next) +
                " outside [0, " + std::to_string(counts_[j]) + "], clamped");
      next = std::clamp(next, 0, counts_[j]);
    }
    out.on_now[j] = on;
    out.s_on[j] = s_on;
    out.s_off[j] = s_off;
    out.c_on[j] = c_on;
    out.c_off[j] = c_off;
    out.on_next[j] = next;
    out.injection.real_power[j] = pl + p_bar_[j] * next;
    out.injection.reactive_power[j] = ql + q_bar_[j] * next;
  }

  out.diverged = false;
  try {
    if (config_.use_lindistflow_in_mc)
      grid::solve_lindistflow(feeder_, out.injection, out.workspace, out.solution);
    else
      grid::solve_distflow(feeder_, out.injection, {}, out.workspace, out.solution);
    const grid::VoltageSolution& sol = out.solution;
    if (!sol.converged) {
      out.diverged = true;
    } else {
      out.min_voltage = sol.min_voltage();
      out.max_voltage = sol.max_voltage();
    }
  } catch (const DivergenceError&) {
    out.diverged = true;
  }
  if (out.diverged) {
    out.min_voltage = 0.0;
    out.max_voltage = std::numeric_limits<double>::infinity();
  }
}

bool SafetyProblem::sample(double u, Stream& rng, bool under_voltage) const {
  thread_local Realization scratch;
  realize(u, rng, scratch);
  if (scratch.diverged) return false;
  return under_voltage ? scratch.min_voltage >= config_.v_floor : scratch.max_voltage <= config_.v_ceiling;
}

certification::TestResult test_command(const SafetyProblem& problem, double u, std::uint64_t seed,
                                       std::uint64_t probe_id, bool under_voltage) {
  if (!(std::abs(u) <= 1.0)) throw ConfigError("command must lie in [-1, 1]");
  const int workers = resolve_workers(problem.config().workers);
  std::vector<char> hits;
  return certification::run_test(problem.config().test_options(), [&](std::int64_t begin, std::int64_t end) {
    hits.assign(static_cast<std::size_t>(end - begin), 0);
    parallel_for(0, hits.size(), workers, [&](std::size_t i) {
      Stream rng = make_stream(seed, StreamDomain::utility_probe, probe_id, static_cast<std::uint64_t>(begin) + i);
      hits[i] = problem.sample(u, rng, under_voltage) ? 1 : 0;
    });
    std::int64_t total = 0;
    for (char h : hits) total += h;
    return total;
  });
}

ConstraintResult construct_constraint_set(const SafetyProblem& problem, std::uint64_t seed) {
  const SafetyConfig& cfg = problem.config();
  ConstraintResult out;
  std::uint64_t next_probe = 0;
  auto probe = [&](double u, bool under) {
    const auto r = test_command(problem, u, seed, next_probe++, under);
    out.probes.push_back({u, under, r});
    out.samples_used += r.samples_used;
    return r;
  };

  // Upper bound against under-voltage.
  double upper = 1.0;
  auto r = probe(1.0, true);
  if (r.accepted) {
    out.accepted_m = r.m;
  } else {
    auto bottom = probe(-1.0, true);
    if (!bottom.accepted) {
      out.set = {-1.0, -1.0};
      out.infeasible = true;
      return out;
    }
    double lo = -1.0;
    double hi = 1.0;
    out.accepted_m = bottom.m;
    while (hi - lo > cfg.bisection_tol) {
      const double mid = 0.5 * (lo + hi);
      const auto t = probe(mid, true);
      if (t.accepted) {
        lo = mid;
        out.accepted_m = t.m;
      } else {
        hi = mid;
      }
    }
    upper = lo;
  }

  // Lower bound against over-voltage; safety from it grows with u.
  double lower = -1.0;
  if (cfg.check_over_voltage && !probe(-1.0, false).accepted) {
    if (!probe(upper, false).accepted) {
      out.set = {upper, upper};
      out.infeasible = true;
      return out;
    }
    double lo = -1.0;
    double hi = upper;
    while (hi - lo > cfg.bisection_tol) {
      const double mid = 0.5 * (lo + hi);
      if (probe(mid, false).accepted)
        hi = mid;
      else
        lo = mid;
    }
    lower = hi;
  }
  out.set = {lower, upper};
  return out;
}

std::vector<CurvePoint> estimate_safety_curve(const SafetyProblem& problem, const std::vector<double>& u_grid,
                                              std::int64_t samples, std::uint64_t seed) {
  if (samples < 1) throw ConfigError("safety curve needs at least one sample per point");
  for (std::size_t i = 0; i < u_grid.size(); ++i) {
    if (!(std::abs(u_grid[i]) <= 1.0)) throw ConfigError("curve grid must lie in [-1, 1]");
    if (i > 0 && u_grid[i] < u_grid[i - 1]) throw ConfigError("curve grid must be sorted");
  }
  const int workers = resolve_workers(problem.config().workers);
  std::vector<CurvePoint> out;
  out.reserve(u_grid.size());
  std::vector<char> hits(static_cast<std::size_t>(samples));
  for (std::size_t i = 0; i < u_grid.size(); ++i) {
    parallel_for(0, hits.size(), workers, [&](std::size_t k) {
      Stream rng = make_stream(seed, StreamDomain::safety_curve, i, k);
      hits[k] = problem.sample(u_grid[i], rng) ? 1 : 0;
    });
    std::int64_t total = 0;
    for (char h : hits) total += h;
    const double nu = static_cast<double>(total) / static_cast<double>(samples);
    out.push_back({u_grid[i], nu, std::sqrt(nu * (1.0 - nu) / static_cast<double>(samples)), samples});
  }
  return out;
}

}  // namespace tclsafe::utility
