#include "tclsafe/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "tclsafe/aggregator.hpp"
#include "tclsafe/error.hpp"
#include "tclsafe/log.hpp"
#include "tclsafe/opf_benchmark.hpp"
#include "tclsafe/parallel.hpp"
#include "tclsafe/reference.hpp"
#include "tclsafe/rng.hpp"

namespace tclsafe::harness {

Controller parse_controller(const std::string& name) {
  if (name == "proposed") return Controller::proposed;
  if (name == "tracking" || name == "tracking-benchmark") return Controller::tracking;
  if (name == "opf" || name == "opf-benchmark") return Controller::opf;
  throw ConfigError("unknown controller '" + name + "' (expected proposed, tracking or opf)");
}

std::string to_string(Controller controller) {
  switch (controller) {
    case Controller::proposed: return "proposed";
    case Controller::tracking: return "tracking";
    case Controller::opf: return "opf";
  }
  return "unknown";
}

void ScenarioConfig::validate() const {
  if (!(dt_seconds > 0.0)) throw ConfigError("dt_seconds must be positive");
  if (horizon < 1) throw ConfigError("horizon must be at least one step");
  if (!std::isfinite(start_seconds)) throw ConfigError("start time must be finite");
  if (bins_per_mode < 4 || bins_per_mode % 2 != 0) throw ConfigError("bins_per_mode must be even and >= 4");
  if (!(command_grid_step > 0.0)) throw ConfigError("command grid step must be positive");
  if (!(population.penetration >= 0.0)) throw ConfigError("TCL penetration must be nonnegative");
  if (population.count && *population.count < 0) throw ConfigError("TCL count must be nonnegative");
  population.ranges.validate();
  if (!(loads.power_factor > 0.0 && loads.power_factor <= 1.0)) throw ConfigError("load power factor must lie in (0, 1]");
  if (!(loads.nominal_real_range_kw.lo >= 0.0) || loads.nominal_real_range_kw.hi < loads.nominal_real_range_kw.lo)
    throw ConfigError("nominal load range must satisfy 0 <= lo <= hi");
  if (feeder.calibration_margin && !std::isfinite(*feeder.calibration_margin))
    throw ConfigError("calibration margin must be finite");
  if (curve.points < 2) throw ConfigError("safety curve needs at least two points");
  if (curve.samples < 1) throw ConfigError("safety curve needs at least one sample per point");
  safety.validate();
}

double calibrate_impedance(const grid::FeederModel& feeder, const load::LoadModel& loads, double peak_time,
                           double target) {
  grid::NodalInjection inj{loads.mean_real(peak_time), loads.mean_reactive(peak_time)};
  auto min_v = [&](double scale) {
    try {
      const auto sol = grid::solve_distflow(feeder.scaled_impedance(scale), inj, {1e-12, 200});
      return sol.converged ? sol.min_voltage() : 0.0;
    } catch (const DivergenceError&) {
      return 0.0;
    }
  };
  if (!(target < feeder.substation_voltage()))
    throw ConfigError("calibration target must lie below the substation voltage");
  double hi = 1.0;
  int guard = 0;
  while (min_v(hi) > target) {
    hi *= 2.0;
    if (++guard > 200) throw ConfigError("feeder loads are too light to reach the calibration target");
  }
  double lo = hi / 2.0;
  guard = 0;
  while (min_v(lo) <= target) {
    lo /= 2.0;
    if (++guard > 200) throw ConfigError("feeder cannot be calibrated to the target voltage");
  }
  const auto [a, b] = boost::math::tools::bisect([&](double s) { return min_v(s) - target; }, lo, hi,
                                                 boost::math::tools::eps_tolerance<double>(50));
  return 0.5 * (a + b);
}

namespace {

double peak_time(const load::MultiplierProfile& profile, double fallback) {
  if (profile.knots.empty()) return fallback;
  auto best = profile.knots.front();
  for (const auto& k : profile.knots)
    if (k.second > best.second) best = k;
  return best.first;
}

tcl::TclPopulation build_population(const ScenarioConfig& cfg, const std::vector<double>& nominal_kw) {
  const int n = static_cast<int>(nominal_kw.size());
  int count = 0;
  if (cfg.population.count) {
    count = *cfg.population.count;
  } else {
    double per_device = cfg.population.ranges.mean_rated_real();
    if (cfg.population.basis == PenetrationBasis::expected) per_device *= cfg.population.ranges.mean_duty_cycle();
    double total = 0.0;
    for (double p : nominal_kw) total += p;
    count = per_device > 0.0 ? static_cast<int>(std::lround(cfg.population.penetration * total / per_device)) : 0;
  }
  if (count == 0) return tcl::TclPopulation({}, {}, n, cfg.dt_seconds);
  return tcl::sample_population(count, nominal_kw, cfg.population.ranges, cfg.dt_seconds, cfg.seed);
}

}  // namespace

ScenarioSetup build_setup(const ScenarioConfig& cfg) {
  cfg.validate();
  grid::FeederModel feeder =
      cfg.feeder.file ? grid::load_feeder(*cfg.feeder.file) : grid::generate_feeder(cfg.feeder.generator);
  const int n = feeder.node_count();
  const double kw = feeder.base().kw_per_pu();

  // Nominal loads belong to the network data, so they follow the generator seed.
  std::vector<double> p_kw = cfg.loads.nominal_real_kw;
  std::vector<double> q_kvar = cfg.loads.nominal_reactive_kvar;
  if (p_kw.empty()) {
    for (int j = 0; j < n; ++j) {
      Stream rng = make_stream(cfg.feeder.generator.seed, StreamDomain::nominal_loads, static_cast<std::uint64_t>(j));
      const Range r = cfg.loads.nominal_real_range_kw;
      p_kw.push_back(r.lo + (r.hi - r.lo) * rng.uniform());
    }
  }
  if (static_cast<int>(p_kw.size()) != n)
    throw ConfigError("nominal_real_kw has " + std::to_string(p_kw.size()) + " entries for " + std::to_string(n) +
                      " nodes");
  if (q_kvar.empty()) {
    const double ratio = std::tan(std::acos(cfg.loads.power_factor));
    for (double p : p_kw) q_kvar.push_back(p * ratio);
  }
  if (static_cast<int>(q_kvar.size()) != n)
    throw ConfigError("nominal_reactive_kvar has " + std::to_string(q_kvar.size()) + " entries for " +
                      std::to_string(n) + " nodes");

  load::LoadModelSpec spec;
  for (double p : p_kw) spec.nominal_real.push_back(p / kw);
  for (double q : q_kvar) spec.nominal_reactive.push_back(q / kw);
  spec.real_profile = cfg.loads.profile;
  spec.reactive_profile = cfg.loads.profile;
  spec.sd_fraction_real = cfg.loads.sd_fraction;
  spec.sd_fraction_reactive = cfg.loads.sd_fraction;
  spec.truncation_fraction = cfg.loads.truncation_fraction;
  spec.correlation = cfg.loads.correlation;
  load::LoadModel loads(std::move(spec));

  double scale = 1.0;
  if (cfg.feeder.calibration_margin) {
    scale = calibrate_impedance(feeder, loads, peak_time(cfg.loads.profile, cfg.start_seconds),
                                cfg.safety.v_floor + *cfg.feeder.calibration_margin);
    feeder = feeder.scaled_impedance(scale);
  }

  tcl::TclPopulation population = build_population(cfg, p_kw);

  const int samples = cfg.horizon + 1;
  reference::Signal raw = cfg.reference.file
                              ? reference::load_csv(*cfg.reference.file, cfg.dt_seconds, samples,
                                                    cfg.reference.file_start_seconds)
                              : reference::synthetic_regd(samples, cfg.dt_seconds, cfg.seed);
  const double rated = population.rated_total_kw();
  const double offset = cfg.reference.offset_kw.value_or(rated * cfg.reference.offset_fraction);
  const double amplitude = cfg.reference.scale_kw.value_or(rated * cfg.reference.scale_fraction);
  std::vector<double> ref;
  ref.reserve(raw.values.size());
  for (double v : raw.values) ref.push_back(offset + amplitude * v);

  return {std::move(feeder), scale, std::move(loads), std::move(population), std::move(ref)};
}

utility::UtilityObservation observe(const tcl::TclPopulation& population, const grid::NodalInjection& loads_pu,
                                    double kw_per_pu, const aggregator::WFractions& w) {
  const int n = population.node_count();
  utility::UtilityObservation obs;
  obs.measured = tcl::nodal_tcl_power(population, kw_per_pu);
  for (int j = 0; j < n; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    obs.measured.real_power[jj] += loads_pu.real_power[jj];
    obs.measured.reactive_power[jj] += loads_pu.reactive_power[jj];
    obs.avg_real.push_back(population.avg_real()[jj] / kw_per_pu);
    obs.avg_reactive.push_back(population.avg_reactive()[jj] / kw_per_pu);
  }
  obs.tcl_counts = population.node_counts();
  obs.w_on.assign(static_cast<std::size_t>(n), w.on);
  obs.w_off.assign(static_cast<std::size_t>(n), w.off);
  return obs;
}

Summary compute_metrics(const std::vector<StepRecord>& records) {
  if (records.empty()) throw Error("metrics need at least one step record");
  Summary s;
  double sq = 0.0;
  for (const auto& r : records) {
    const double e = r.p_agg - r.p_ref;
    sq += e * e;
    if (!r.safe) ++s.violation_count;
  }
  s.steps = static_cast<int>(records.size());
  s.rmse_kw = std::sqrt(sq / static_cast<double>(records.size()));
  s.safety_probability = static_cast<double>(s.steps - s.violation_count) / static_cast<double>(s.steps);
  return s;
}

namespace {

grid::NodalInjection realized_loads(const ScenarioConfig& cfg, const load::LoadModel& loads, int k) {
  Stream rng = make_stream(cfg.seed, StreamDomain::realized_loads, static_cast<std::uint64_t>(k));
  grid::NodalInjection out;
  loads.sample(cfg.start_seconds + k * cfg.dt_seconds, rng, out.real_power, out.reactive_power);
  return out;
}

}  // namespace

Snapshot snapshot_at(const ScenarioConfig& cfg, double time_seconds) {
  ScenarioSetup setup = build_setup(cfg);
  const auto& pop = setup.population;
  aggregator::BinModel model(aggregator::FleetStatistics::from_population(pop), cfg.bins_per_mode);
  const double rated = pop.rated_total_kw();
  model.correct_on_fraction(rated > 0.0 ? pop.aggregate_real_kw() / rated : 0.0);

  Stream rng = make_stream(cfg.seed, StreamDomain::realized_loads, std::uint64_t{1} << 40);
  grid::NodalInjection loads;
  setup.loads.sample(time_seconds, rng, loads.real_power, loads.reactive_power);
  auto obs = observe(pop, loads, setup.feeder.base().kw_per_pu(), model.estimate_w_fractions());
  return {std::move(setup), std::move(obs), time_seconds, time_seconds + cfg.dt_seconds};
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  ScenarioSetup setup = build_setup(cfg);
  const grid::FeederModel& feeder = setup.feeder;
  tcl::TclPopulation& pop = setup.population;
  const double kw = feeder.base().kw_per_pu();
  const int n = feeder.node_count();

  aggregator::BinModel model(aggregator::FleetStatistics::from_population(pop), cfg.bins_per_mode);
  const double rated = pop.rated_total_kw();
  auto measured_on_fraction = [&] { return rated > 0.0 ? pop.aggregate_real_kw() / rated : 0.0; };
  model.correct_on_fraction(measured_on_fraction());

  std::optional<grid::LinearSensitivity> sensitivity;
  if (cfg.controller == Controller::opf) sensitivity = grid::lindistflow_sensitivity(feeder);

  ScenarioResult result;
  result.name = cfg.name;
  result.controller = cfg.controller;
  result.seed = cfg.seed;
  result.epsilon = cfg.controller == Controller::proposed ? cfg.safety.epsilon : 0.0;
  result.records.reserve(static_cast<std::size_t>(cfg.horizon));

  grid::NodalInjection loads_now = realized_loads(cfg, setup.loads, 0);
  for (int k = 0; k < cfg.horizon; ++k) {
    const double now = cfg.start_seconds + k * cfg.dt_seconds;
    const double next = now + cfg.dt_seconds;
    StepRecord rec;
    rec.t = k + 1;
    rec.time_seconds = next;
    rec.p_ref = setup.reference_kw[static_cast<std::size_t>(k + 1)];
    const aggregator::WFractions w = model.estimate_w_fractions();
    rec.w_on_hat = w.on;
    rec.w_off_hat = w.off;

    aggregator::ConstraintSet bounds;
    if (cfg.controller == Controller::proposed) {
      const auto obs = observe(pop, loads_now, kw, w);
      const utility::SafetyProblem problem(feeder, setup.loads, obs, now, next, cfg.safety);
      const auto cr = utility::construct_constraint_set(problem, derive_key(cfg.seed, 0x5afe, k));
      bounds = cr.set;
      rec.samples_used = cr.samples_used;
      rec.infeasible = cr.infeasible;
      rec.accepted_m = cr.accepted_m;
    }
    rec.lower = bounds.lower;
    rec.upper = bounds.upper;

    tcl::StepReport report;
    if (cfg.controller == Controller::opf) {
      opf::OpfInput in;
      in.population = &pop;
      in.feeder = &feeder;
      in.sensitivity = &*sensitivity;
      in.load_real_max = setup.loads.max_real();
      in.load_reactive_max = setup.loads.max_reactive();
      in.v_floor = cfg.safety.v_floor;
      in.p_ref_kw = rec.p_ref;
      const auto decision = opf::assign_modes(in);
      rec.infeasible = decision.infeasible;
      report = pop.step_with_modes(decision.modes);
    } else {
      const double u = aggregator::choose_command(model, rec.p_ref, bounds, cfg.command_grid_step);
      rec.u = u;
      report = pop.step(u, cfg.seed, static_cast<std::uint64_t>(k + 1));
      model.advance(u);
    }
    rec.p_agg = report.aggregate_real_kw;
    const int off_before = report.counts.total_off_before();
    const int on_before = report.counts.total_on_before();
    if (off_before > 0)
      rec.w_on_actual = static_cast<double>(report.counts.total_thermostat_on()) / off_before;
    if (on_before > 0)
      rec.w_off_actual = static_cast<double>(report.counts.total_thermostat_off()) / on_before;
    model.correct_on_fraction(measured_on_fraction());

    // Ground truth: full DistFlow on exact device powers and realized loads.
    loads_now = realized_loads(cfg, setup.loads, k + 1);
    grid::NodalInjection truth = tcl::nodal_tcl_power(pop, kw);
    for (int j = 0; j < n; ++j) {
      truth.real_power[static_cast<std::size_t>(j)] += loads_now.real_power[static_cast<std::size_t>(j)];
      truth.reactive_power[static_cast<std::size_t>(j)] += loads_now.reactive_power[static_cast<std::size_t>(j)];
    }
    try {
      const auto sol = grid::solve_distflow(feeder, truth);
      if (sol.converged) {
        rec.min_voltage = sol.min_voltage();
        rec.safe = grid::min_voltage_safe(sol, cfg.safety.v_floor);
      } else {
        rec.solver_error = "power flow did not converge";
      }
    } catch (const DivergenceError& e) {
      rec.solver_error = e.what();
    }
    result.records.push_back(std::move(rec));
  }

  result.summary = compute_metrics(result.records);
  result.summary.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::ostringstream msg;
  msg << cfg.name << " [" << to_string(cfg.controller) << ", seed " << cfg.seed << "] rmse "
      << result.summary.rmse_kw << " kW, safety " << result.summary.safety_probability << ", "
      << result.summary.wall_time_seconds << " s";
  log::info(msg.str());
  return result;
}

ScenarioResult run_tracking_benchmark(ScenarioConfig config) {
  config.controller = Controller::tracking;
  return run_scenario(config);
}

ScenarioResult run_opf_benchmark(ScenarioConfig config) {
  config.controller = Controller::opf;
  return run_scenario(config);
}

Comparison compare(const ScenarioConfig& base, const std::vector<std::uint64_t>& seeds,
                   const std::vector<double>& epsilons, int workers) {
  if (seeds.empty()) throw ConfigError("comparison needs at least one seed");
  if (epsilons.empty()) throw ConfigError("comparison needs at least one epsilon");

  struct Job {
    ScenarioConfig config;
    std::size_t row;
  };
  std::vector<ComparisonRow> rows;
  std::vector<Job> jobs;
  auto add_row = [&](const std::string& label, double eps, Controller controller) {
    rows.push_back({label, eps, 0.0, 0.0, 0, 0, 0});
    for (std::uint64_t seed : seeds) {
      ScenarioConfig c = base;
      c.controller = controller;
      c.seed = seed;
      if (controller == Controller::proposed) c.safety.epsilon = eps;
      jobs.push_back({std::move(c), rows.size() - 1});
    }
  };
  add_row("tracking", 0.0, Controller::tracking);
  add_row("opf", 0.0, Controller::opf);
  for (double eps : epsilons) {
    std::ostringstream label;
    label << "proposed_eps" << eps;
    add_row(label.str(), eps, Controller::proposed);
  }

  const int outer = std::max(1, std::min(resolve_workers(workers), static_cast<int>(jobs.size())));
  if (outer > 1)
    for (auto& j : jobs) j.config.safety.workers = 1;
  Comparison out;
  out.runs.resize(jobs.size());
  parallel_for(0, jobs.size(), outer, [&](std::size_t i) { out.runs[i] = run_scenario(jobs[i].config); });

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto& row = rows[jobs[i].row];
    const Summary& s = out.runs[i].summary;
    row.mean_rmse_kw += s.rmse_kw;
    row.mean_safety += s.safety_probability;
    row.total_violations += s.violation_count;
    row.total_steps += s.steps;
    ++row.seeds;
  }
  for (auto& row : rows) {
    row.mean_rmse_kw /= row.seeds;
    row.mean_safety /= row.seeds;
  }
  out.rows = std::move(rows);
  return out;
}

}  // namespace tclsafe::harness
