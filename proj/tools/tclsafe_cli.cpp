#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tclsafe/certification.hpp"
#include "tclsafe/error.hpp"
#include "tclsafe/feeder_io.hpp"
#include "tclsafe/harness.hpp"
#include "tclsafe/log.hpp"
#include "tclsafe/reference.hpp"
#include "tclsafe/results_io.hpp"
#include "tclsafe/scenario_config.hpp"
#include "tclsafe/utility.hpp"

namespace fs = std::filesystem;
using namespace tclsafe;

namespace {

enum Exit { ok = 0, runtime_failure = 1, config_failure = 2 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> controller;
  std::string out;
};

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("TCLSAFE_OUTPUT_DIR"); env && *env) return env;
  return "out";
}

harness::ScenarioConfig load(const Common& c) {
  auto cfg = harness::load_scenario(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.workers) cfg.safety.workers = *c.workers;
  if (c.controller) cfg.controller = harness::parse_controller(*c.controller);
  cfg.validate();
  return cfg;
}

void report_error(const char* kind, const std::string& message) {
  nlohmann::json doc = {{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << doc.dump() << '\n';
}

int simulate(const Common& c) {
  const auto cfg = load(c);
  const fs::path out = output_dir(c.out);
  const auto result = harness::run_scenario(cfg);
  io::write_results_jsonl(result, out / "results.jsonl");
  io::write_constraints_jsonl(result, out / "constraints.jsonl");
  io::write_trace_csv(result, out / "trace.csv");
  io::write_summary_csv({result}, out / "summary.csv");
  io::write_file(out / "config.resolved.json", harness::scenario_to_json(cfg).dump(2) + "\n");
  return ok;
}

bool check_orderings(const harness::Comparison& cmp) {
  const harness::ComparisonRow* tracking = nullptr;
  const harness::ComparisonRow* opf = nullptr;
  std::vector<const harness::ComparisonRow*> proposed;
  for (const auto& r : cmp.rows) {
    if (r.controller == "tracking") tracking = &r;
    else if (r.controller == "opf") opf = &r;
    else proposed.push_back(&r);
  }
  // Proposed rows run from the loosest epsilon to the tightest.
  std::stable_sort(proposed.begin(), proposed.end(),
                   [](const auto* a, const auto* b) { return a->epsilon > b->epsilon; });
  bool good = true;
  auto expect = [&](bool cond, const std::string& what) {
    if (!cond) {
      log::warn("ordering violated: " + what);
      good = false;
    }
  };
  double prev_rmse = tracking->mean_rmse_kw;
  for (const auto* p : proposed) {
    expect(prev_rmse <= p->mean_rmse_kw, "RMSE does not increase into " + p->controller);
    prev_rmse = p->mean_rmse_kw;
    expect(tracking->mean_safety < p->mean_safety, "tracking safety not below " + p->controller);
    expect(p->mean_safety <= opf->mean_safety, p->controller + " safety above opf");
  }
  expect(prev_rmse <= opf->mean_rmse_kw, "opf RMSE below the proposed controller");
  return good;
}

int compare(const Common& c, const std::vector<std::uint64_t>& seeds, const std::vector<double>& epsilons,
            bool check) {
  if (seeds.empty()) throw ConfigError("compare needs at least one seed");
  const auto cfg = load(c);
  const fs::path out = output_dir(c.out);
  const auto cmp = harness::compare(cfg, seeds, epsilons, cfg.safety.workers);
  io::write_comparison_csv(cmp, out / "comparison.csv");
  io::write_summary_csv(cmp.runs, out / "summary.csv");
  if (check && !check_orderings(cmp)) {
    report_error("check", "controller orderings do not hold; see comparison.csv");
    return runtime_failure;
  }
  return ok;
}

int safety_curve(const Common& c, std::optional<int> points, std::optional<std::int64_t> samples) {
  auto cfg = load(c);
  if (points) cfg.curve.points = *points;
  if (samples) cfg.curve.samples = *samples;
  cfg.validate();
  const fs::path out = output_dir(c.out);
  const auto snap = harness::snapshot_at(cfg, cfg.curve.time_seconds);
  const utility::SafetyProblem problem(snap.setup.feeder, snap.setup.loads, snap.observation, snap.now, snap.next,
                                       cfg.safety);
  std::vector<double> grid;
  for (int i = 0; i < cfg.curve.points; ++i) grid.push_back(-1.0 + 2.0 * i / (cfg.curve.points - 1));
  const auto curve = utility::estimate_safety_curve(problem, grid, cfg.curve.samples, cfg.seed);
  io::write_curve_csv(curve, out / "curve.csv");
  return ok;
}

struct StudyArgs {
  double epsilon = 0.05;
  double beta = 0.001;
  std::vector<double> nu{0.90, 0.99};
  std::int64_t trials = 10000;
  std::int64_t max_samples = 100000;
  std::uint64_t seed = 1;
  int workers = 0;
  std::string out;
};

int validate_theorem1(const StudyArgs& a) {
  if (a.trials <= 0) throw ConfigError("trials must be positive");
  if (a.nu.empty()) throw ConfigError("at least one nu is required");
  certification::TestOptions options;
  options.epsilon = a.epsilon;
  options.beta = a.beta;
  options.max_samples = a.max_samples;
  options.validate();
  for (double nu : a.nu)
    if (!(nu >= 0.0 && nu <= 1.0)) throw ConfigError("nu must lie in [0, 1]");
  std::vector<io::StudyRow> rows;
  for (std::size_t i = 0; i < a.nu.size(); ++i)
    rows.push_back({a.nu[i], certification::bernoulli_study(options, a.nu[i], a.trials,
                                                            derive_key(a.seed, i, 0, 0), a.workers)});
  io::write_study_csv(options, rows, output_dir(a.out) / "theorem1.csv");
  return ok;
}

struct FeederArgs {
  std::string shape = "branched";
  int nodes = 8;
  std::vector<double> r{0.001, 0.003};
  std::vector<double> x{0.001, 0.003};
  std::uint64_t seed = 1;
  std::string out;
};

int gen_feeder(const FeederArgs& a) {
  grid::FeederGeneratorSpec spec;
  spec.shape = grid::parse_feeder_shape(a.shape);
  spec.nodes = a.nodes;
  spec.resistance = {a.r.at(0), a.r.at(1)};
  spec.reactance = {a.x.at(0), a.x.at(1)};
  spec.seed = a.seed;
  const auto feeder = grid::generate_feeder(spec);
  const fs::path path = a.out.empty() ? output_dir("") / "feeder.json" : fs::path(a.out);
  io::write_file(path, grid::feeder_to_json(feeder).dump(2) + "\n");
  return ok;
}

struct ReferenceArgs {
  double duration = 7200.0;
  double dt = 2.0;
  std::uint64_t seed = 1;
  std::string out;
};

int gen_reference(const ReferenceArgs& a) {
  if (!(a.duration > 0.0) || !(a.dt > 0.0)) throw ConfigError("duration and dt must be positive");
  const int steps = static_cast<int>(std::floor(a.duration / a.dt)) + 1;
  const auto signal = reference::synthetic_regd(steps, a.dt, a.seed);
  const fs::path path = a.out.empty() ? output_dir("") / "reference.csv" : fs::path(a.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  reference::save_csv(signal, path);
  return ok;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "scenario config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the config seed");
  cmd->add_option("--workers", c.workers, "Monte-Carlo worker threads (0 = all cores)");
  cmd->add_option("-o,--out", c.out, "output directory (default $TCLSAFE_OUTPUT_DIR or ./out)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TCL fleet coordination with chance-constrained network safety"};
  app.require_subcommand(1);
  int verbosity = 0;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbosity, "more logging (repeatable)");
  app.add_flag("-q,--quiet", quiet, "errors only");

  Common sim, cmp, curve;
  auto* sim_cmd = app.add_subcommand("simulate", "run one closed-loop scenario");
  add_common(sim_cmd, sim);
  sim_cmd->add_option("--controller", sim.controller, "override the config controller (proposed, tracking, opf)");

  std::vector<std::uint64_t> seeds;
  std::vector<double> epsilons{0.05, 0.02};
  bool check = false;
  auto* cmp_cmd = app.add_subcommand("compare", "tracking, OPF and proposed controllers over a seed list");
  add_common(cmp_cmd, cmp);
  const CLI::Validator nonempty([](std::string& v) { return v.empty() ? std::string("empty seed") : std::string(); },
                                "SEED");
  cmp_cmd->add_option("--seeds", seeds, "seed list")->required()->delimiter(',')->check(nonempty);
  cmp_cmd->add_option("--epsilons", epsilons, "epsilon values for the proposed controller")->delimiter(',');
  cmp_cmd->add_flag("--check", check, "exit 1 unless the controller orderings hold");

  std::optional<int> points;
  std::optional<std::int64_t> samples;
  auto* curve_cmd = app.add_subcommand("safety-curve", "Monte-Carlo safety probability over a command grid");
  add_common(curve_cmd, curve);
  curve_cmd->add_option("--points", points, "grid points on [-1, 1]");
  curve_cmd->add_option("--samples", samples, "realizations per point");

  StudyArgs study;
  auto* thm_cmd = app.add_subcommand("validate-theorem1", "acceptance study against synthetic Bernoulli streams");
  thm_cmd->add_option("--epsilon", study.epsilon, "violation budget")->capture_default_str();
  thm_cmd->add_option("--beta", study.beta, "confidence budget")->capture_default_str();
  thm_cmd->add_option("--nu", study.nu, "true success probabilities")->delimiter(',')->capture_default_str();
  thm_cmd->add_option("--trials", study.trials, "tests per nu")->capture_default_str();
  thm_cmd->add_option("--max-samples", study.max_samples, "sample cap per test")->capture_default_str();
  thm_cmd->add_option("--seed", study.seed, "study seed")->capture_default_str();
  thm_cmd->add_option("--workers", study.workers, "worker threads (0 = all cores)");
  thm_cmd->add_option("-o,--out", study.out, "output directory");

  FeederArgs feeder;
  auto* feeder_cmd = app.add_subcommand("gen-feeder", "write a synthetic radial feeder");
  feeder_cmd->add_option("--shape", feeder.shape, "chain, star, binary_tree or branched")->capture_default_str();
  feeder_cmd->add_option("--nodes", feeder.nodes, "node count")->capture_default_str();
  feeder_cmd->add_option("--r", feeder.r, "resistance range lo,hi (pu)")->delimiter(',')->expected(2);
  feeder_cmd->add_option("--x", feeder.x, "reactance range lo,hi (pu)")->delimiter(',')->expected(2);
  feeder_cmd->add_option("--seed", feeder.seed, "generator seed")->capture_default_str();
  feeder_cmd->add_option("-o,--out", feeder.out, "output file (default <outdir>/feeder.json)");

  ReferenceArgs ref;
  auto* ref_cmd = app.add_subcommand("gen-reference", "write a synthetic RegD-like reference signal");
  ref_cmd->add_option("--duration", ref.duration, "seconds")->capture_default_str();
  ref_cmd->add_option("--dt", ref.dt, "sample spacing, seconds")->capture_default_str();
  ref_cmd->add_option("--seed", ref.seed, "signal seed")->capture_default_str();
  ref_cmd->add_option("-o,--out", ref.out, "output file (default <outdir>/reference.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return config_failure;
  }

  if (quiet) log::set_level(log::Level::error);
  else if (verbosity >= 2) log::set_level(log::Level::debug);
  else if (verbosity == 1) log::set_level(log::Level::info);

  try {
    if (*sim_cmd) return simulate(sim);
    if (*cmp_cmd) return compare(cmp, seeds, epsilons, check);
    if (*curve_cmd) return safety_curve(curve, points, samples);
    if (*thm_cmd) return validate_theorem1(study);
    if (*feeder_cmd) return gen_feeder(feeder);
    if (*ref_cmd) return gen_reference(ref);
  } catch (const ConfigError& e) {
    report_error("config", e.what());
    return config_failure;
  } catch (const std::exception& e) {
    report_error("runtime", e.what());
    return runtime_failure;
  }
  return runtime_failure;
}
