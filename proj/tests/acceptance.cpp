// Acceptance checks; prints one PASS/FAIL line per criterion.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <gmpxx.h>

#include <CLI11.hpp>

#include "support.hpp"
#include "tclsafe/certification.hpp"
#include "tclsafe/grid.hpp"
#include "tclsafe/harness.hpp"
#include "tclsafe/log.hpp"
#include "tclsafe/scenario_config.hpp"
#include "tclsafe/utility.hpp"

namespace fs = std::filesystem;
using namespace tclsafe;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1: soundness of the sequential test on synthetic Bernoulli streams.
Outcome sequential_test_study() {
  certification::TestOptions o;
  o.epsilon = 0.05;
  o.beta = 0.001;
  o.max_samples = 100000;
  const auto low = certification::bernoulli_study(o, 0.90, 10000, 101, 0);
  const auto high = certification::bernoulli_study(o, 0.99, 10000, 102, 0);
  return {low.acceptance_rate <= 0.005 && high.acceptance_rate >= 0.99,
          fmt("nu=0.90 rate %.4f (<= 0.005), nu=0.99 rate %.4f (>= 0.99)", low.acceptance_rate,
              high.acceptance_rate)};
}

// 2: the all-success bound against a 50-digit evaluation.
Outcome minimal_bound() {
  using Dec = boost::multiprecision::cpp_dec_float_50;
  const Dec x = Dec(102) / 100;
  const Dec ref = boost::multiprecision::log(Dec(1000)) / (x * boost::multiprecision::log(x) - (x - 1));
  const double got = certification::required_samples(1.0, 0.02, 0.001);
  const double rel = std::abs(got - ref.convert_to<double>()) / ref.convert_to<double>();
  return {rel < 5e-7, fmt("implemented %.9g, reference %s, rel. diff %.2e", got, ref.str(12).c_str(), rel)};
}

// 3: exact safety probability under LinDistFlow by full enumeration in
// rational arithmetic on a 3-node chain with 3 TCLs per node.
Outcome exact_monotonicity() {
  constexpr int nodes = 3;
  constexpr int tcls = 3;
  const auto feeder = testing::chain(nodes, 0.004, 0.003);
  const auto sens = grid::lindistflow_sensitivity(feeder);
  const std::array<mpq_class, 4> prior{mpq_class(1, 10), mpq_class(2, 10), mpq_class(3, 10), mpq_class(4, 10)};
  const std::array<mpq_class, 5> load_p{mpq_class(4, 100), mpq_class(5, 100), mpq_class(6, 100), mpq_class(7, 100),
                                        mpq_class(8, 100)};
  const mpq_class p_bar(1, 100);
  const mpq_class q_ratio(1, 2);
  const double w_on = 0.2;
  const double w_off = 0.3;

  auto binom = [](int n, int k) {
    mpz_class c;
    mpz_bin_uiui(c.get_mpz_t(), static_cast<unsigned long>(n), static_cast<unsigned long>(k));
    return mpq_class(c);
  };
  auto power = [](const mpq_class& b, int e) {
    mpq_class r(1);
    for (int i = 0; i < e; ++i) r *= b;
    return r;
  };

  // Squared voltage at node i for a joint injection: 1 - sum_k (R_ik p_k + X_ik q_k).
  std::vector<std::vector<mpq_class>> r(nodes, std::vector<mpq_class>(nodes));
  std::vector<std::vector<mpq_class>> x(nodes, std::vector<mpq_class>(nodes));
  for (int i = 0; i < nodes; ++i)
    for (int k = 0; k < nodes; ++k) {
      r[i][k] = mpq_class(sens.real(i, k));
      x[i][k] = mpq_class(sens.reactive(i, k));
    }
  auto min_v2 = [&](const std::array<mpq_class, nodes>& p) {
    mpq_class worst(1);
    for (int i = 0; i < nodes; ++i) {
      mpq_class v2(1);
      for (int k = 0; k < nodes; ++k) v2 -= r[i][k] * p[k] + x[i][k] * p[k] * q_ratio;
      if (v2 < worst) worst = v2;
    }
    return worst;
  };

  // Floor halfway between the extreme outcomes.
  std::array<mpq_class, nodes> lo_p, hi_p;
  for (int k = 0; k < nodes; ++k) {
    lo_p[k] = load_p.front();
    hi_p[k] = load_p.back() + p_bar * tcls;
  }
  const mpq_class floor2 = (min_v2(lo_p) + min_v2(hi_p)) / 2;

  std::vector<mpq_class> nu;
  for (int step = -10; step <= 10; ++step) {
    const mpq_class u(step, 10);
    const mpq_class up = u > 0 ? u : mpq_class(0);
    const mpq_class down = u < 0 ? mpq_class(-u) : mpq_class(0);
    // Per-node law of the next nodal real injection.
    std::map<mpq_class, mpq_class> node_law;
    for (int on = 0; on <= tcls; ++on) {
      const int off = tcls - on;
      const int s_on = std::clamp(static_cast<int>(std::lround(w_on * off)), 0, off);
      const int s_off = std::clamp(static_cast<int>(std::lround(w_off * on)), 0, on);
      const int n_up = off - s_on;
      const int n_down = on - s_off;
      for (int c_on = 0; c_on <= n_up; ++c_on) {
        const mpq_class pc_on = binom(n_up, c_on) * power(up, c_on) * power(1 - up, n_up - c_on);
        if (pc_on == 0) continue;
        for (int c_off = 0; c_off <= n_down; ++c_off) {
          const mpq_class pc_off = binom(n_down, c_off) * power(down, c_off) * power(1 - down, n_down - c_off);
          if (pc_off == 0) continue;
          const int next = on + s_on - s_off + c_on - c_off;
          for (const auto& lp : load_p) node_law[lp + p_bar * next] += prior[on] * pc_on * pc_off / 5;
        }
      }
    }
    mpq_class safe(0);
    std::array<mpq_class, nodes> p;
    for (const auto& [p1, w1] : node_law)
      for (const auto& [p2, w2] : node_law)
        for (const auto& [p3, w3] : node_law) {
          p = {p1, p2, p3};
          if (min_v2(p) >= floor2) safe += w1 * w2 * w3;
        }
    nu.push_back(safe);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < nu.size(); ++i) monotone = monotone && nu[i] <= nu[i - 1];
  const bool interior = nu.front() > nu.back();
  return {monotone && interior,
          fmt("exact nu from %.6f (u=-1) to %.6f (u=1), non-increasing: %s", nu.front().get_d(), nu.back().get_d(),
              monotone ? "yes" : "no")};
}

utility::SafetyProblem problem_for(const harness::Snapshot& s, const utility::SafetyConfig& cfg) {
  return utility::SafetyProblem(s.setup.feeder, s.setup.loads, s.observation, s.now, s.next, cfg);
}

// 4: Monte-Carlo safety curve on the stressed feeder.
Outcome safety_curve(const harness::ScenarioConfig& cfg) {
  const auto snap = harness::snapshot_at(cfg, cfg.curve.time_seconds);
  const auto problem = problem_for(snap, cfg.safety);
  std::vector<double> grid;
  for (int i = 0; i < 101; ++i) grid.push_back(-1.0 + 0.02 * i);
  const auto curve = utility::estimate_safety_curve(problem, grid, 10000, cfg.seed);
  int bad = 0;
  double worst = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double pooled = 0.5 * (curve[i].nu_hat + curve[i - 1].nu_hat);
    const double se = std::sqrt(pooled * (1.0 - pooled) * 2.0 / 10000.0);
    const double rise = curve[i].nu_hat - curve[i - 1].nu_hat;
    worst = std::max(worst, rise);
    if (rise > 3.0 * se) ++bad;
  }
  return {bad == 0, fmt("nu_hat %.4f (u=-1) .. %.4f (u=0) .. %.4f (u=1); largest rise %.4f; %d violations", curve[0].nu_hat,
                        curve[50].nu_hat, curve[100].nu_hat, worst, bad)};
}

// 5: constraint construction against a brute-force boundary.
Outcome constraint_set(const harness::ScenarioConfig& cfg) {
  const auto snap = harness::snapshot_at(cfg, cfg.curve.time_seconds);
  const auto problem = problem_for(snap, cfg.safety);
  const double target = 1.0 - cfg.safety.epsilon;
  const std::int64_t n = 1000000;
  std::uint64_t probe = 0;
  auto nu_at = [&](double u) {
    return utility::estimate_safety_curve(problem, {u}, n, derive_key(cfg.seed, 0x0dac1e, probe++))[0].nu_hat;
  };
  double lo = -1.0;
  double hi = 1.0;
  const double nu_lo = nu_at(lo);
  const double nu_hi = nu_at(hi);
  double u_star = 0.0;
  double slope = 0.0;
  if (nu_hi >= target) {
    u_star = 1.0;
  } else if (nu_lo < target) {
    u_star = -1.0;
  } else {
    double f_lo = nu_lo;
    double f_hi = nu_hi;
    while (hi - lo > 1.0 / 512.0) {
      const double mid = 0.5 * (lo + hi);
      const double f = nu_at(mid);
      (f >= target ? lo : hi) = mid;
      (f >= target ? f_lo : f_hi) = f;
    }
    u_star = 0.5 * (lo + hi);
    // Local slope over a 0.05 window for converting the oracle SE to u.
    const double a = nu_at(std::max(-1.0, u_star - 0.025));
    const double b = nu_at(std::min(1.0, u_star + 0.025));
    slope = (a - b) / (std::min(1.0, u_star + 0.025) - std::max(-1.0, u_star - 0.025));
  }
  const double se_nu = std::sqrt(target * (1.0 - target) / static_cast<double>(n));
  const double se_u = slope > 0.0 ? se_nu / slope : 0.0;
  const double tol = cfg.safety.bisection_tol;

  int inside = 0;
  int above = 0;
  double max_upper = -1.0;
  double min_upper = 1.0;
  for (std::uint64_t run = 1; run <= 100; ++run) {
    const auto r = utility::construct_constraint_set(problem, derive_key(cfg.seed, 0xc0257, run));
    const double up = r.set.upper;
    max_upper = std::max(max_upper, up);
    min_upper = std::min(min_upper, up);
    if (up >= u_star - 0.1 && up <= u_star + tol) ++inside;
    if (up > u_star + tol + 3.0 * se_u) ++above;
  }
  return {inside >= 95 && above == 0,
          fmt("u*=%.4f (oracle SE in u %.4f); %d/100 in [u*-0.1, u*+tol], %d above cap; upper in [%.4f, %.4f]", u_star,
              se_u, inside, above, min_upper, max_upper)};
}

// 6: closed-loop comparison over ten seeds.
Outcome closed_loop(const harness::ScenarioConfig& cfg) {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 10; ++s) seeds.push_back(s);
  const auto cmp = harness::compare(cfg, seeds, {0.05, 0.02}, 1);
  std::map<std::string, harness::ComparisonRow> rows;
  for (const auto& r : cmp.rows) rows[r.controller] = r;
  const auto& tr = rows.at("tracking");
  const auto& opf = rows.at("opf");
  const auto& p05 = rows.at("proposed_eps0.05");
  const auto& p02 = rows.at("proposed_eps0.02");
  const double pooled05 = 1.0 - static_cast<double>(p05.total_violations) / p05.total_steps;
  const bool rmse_order = tr.mean_rmse_kw <= p05.mean_rmse_kw && p05.mean_rmse_kw <= p02.mean_rmse_kw &&
                          p02.mean_rmse_kw <= opf.mean_rmse_kw;
  const bool safety_order = tr.mean_safety < p05.mean_safety && p05.mean_safety <= opf.mean_safety &&
                            tr.mean_safety < p02.mean_safety && p02.mean_safety <= opf.mean_safety;
  const bool chance = p05.total_steps >= 500 && pooled05 >= 0.93;
  const bool tracking_bad = tr.total_violations >= 10 && tr.mean_safety < p05.mean_safety;
  std::string table;
  for (const auto* r : {&tr, &p05, &p02, &opf})
    table += fmt(" %s rmse %.2f safety %.4f;", r->controller.c_str(), r->mean_rmse_kw, r->mean_safety);
  return {rmse_order && safety_order && chance && tracking_bad,
          fmt("steps %d, proposed(0.05) pooled safety %.4f, tracking violations %d; rmse order %s, safety order %s;",
              p05.total_steps, pooled05, tr.total_violations, rmse_order ? "ok" : "broken",
              safety_order ? "ok" : "broken") +
              table};
}

// 7: power-flow properties on random feeders.
Outcome power_flow() {
  Stream rng = make_stream(77, StreamDomain::feeder_generator);
  int failures = 0;
  double worst_residual = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 20;
    const auto f = testing::random_feeder(rng, n);
    const auto inj = testing::random_injection(rng, n, 0.2, 0.1);
    const auto zero = grid::solve_distflow(f, grid::NodalInjection::zeros(n));
    for (double v : zero.voltage) failures += v != f.substation_voltage();
    const auto d = grid::solve_distflow(f, inj, {1e-12, 200});
    const auto l = grid::solve_lindistflow(f, inj);
    failures += !d.converged;
    for (int j = 0; j < n; ++j) failures += l.voltage[j] < d.voltage[j];
    auto more = inj;
    for (int j = 0; j < n; ++j) more.real_power[j] += 0.05 * rng.uniform();
    const auto lm = grid::solve_lindistflow(f, more);
    for (int j = 0; j < n; ++j) failures += lm.voltage[j] > l.voltage[j];
    for (int j = 1; j <= n; ++j) {
      const int up = f.parent(j);
      const double vup = up == 0 ? f.substation_voltage() : d.voltage[up - 1];
      const double pj = d.branch_real[j - 1];
      const double qj = d.branch_reactive[j - 1];
      const double ell = (pj * pj + qj * qj) / (vup * vup);
      double p = inj.real_power[j - 1] + f.resistance(j) * ell;
      double q = inj.reactive_power[j - 1] + f.reactance(j) * ell;
      for (int c : f.children(j)) {
        p += d.branch_real[c - 1];
        q += d.branch_reactive[c - 1];
      }
      const double rr = f.resistance(j);
      const double xx = f.reactance(j);
      const double v2 = vup * vup - 2.0 * (rr * pj + xx * qj) + (rr * rr + xx * xx) * ell;
      worst_residual = std::max({worst_residual, std::abs(p - pj), std::abs(q - qj),
                                 std::abs(v2 - d.voltage[j - 1] * d.voltage[j - 1])});
    }
  }
  return {failures == 0 && worst_residual < 1e-9,
          fmt("100 feeders, %d property failures, worst residual %.2e", failures, worst_residual)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Byte-compare every file under two directories.
bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::set<fs::path> files;
  for (const auto* root : {&a, &b})
    for (const auto& e : fs::recursive_directory_iterator(*root))
      if (e.is_regular_file()) files.insert(fs::relative(e.path(), *root));
  if (files.empty()) {
    why = "no outputs";
    return false;
  }
  for (const auto& f : files) {
    if (!fs::exists(a / f) || !fs::exists(b / f) || slurp(a / f) != slurp(b / f)) {
      why = f.string() + " differs";
      return false;
    }
  }
  return true;
}

// 8: every subcommand twice, with different worker counts.
Outcome determinism(const harness::ScenarioConfig& base, const fs::path& cli, const fs::path& work) {
  fs::remove_all(work);
  fs::create_directories(work);
  auto short_cfg = base;
  short_cfg.horizon = 6;
  {
    std::ofstream out(work / "short.json");
    out << harness::scenario_to_json(short_cfg).dump(2) << "\n";
  }
  const std::string c = (work / "short.json").string();
  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "simulate -c " + c},
      {"simulate-opf", "simulate -c " + c + " --controller opf"},
      {"compare", "compare -c " + c + " --seeds 1,2 --epsilons 0.05"},
      {"safety-curve", "safety-curve -c " + c + " --points 11 --samples 2000"},
      {"validate-theorem1", "validate-theorem1 --trials 200 --max-samples 20000"},
      {"gen-feeder", "gen-feeder --nodes 12 --seed 4 -o {out}/feeder.json"},
      {"gen-reference", "gen-reference --duration 600 -o {out}/reference.csv"},
  };
  std::string failed;
  for (const auto& [name, args] : commands) {
    std::array<fs::path, 2> dirs{work / (name + "_a"), work / (name + "_b")};
    for (int k = 0; k < 2; ++k) {
      std::string a = args;
      if (const auto pos = a.find("{out}"); pos != std::string::npos) a.replace(pos, 5, dirs[k].string());
      fs::create_directories(dirs[k]);
      const bool takes_workers = name != "gen-feeder" && name != "gen-reference";
      const std::string cmd = "\"" + cli.string() + "\" -q " + a + (takes_workers && a.find(" -o ") == std::string::npos
                                                                          ? " -o " + dirs[k].string()
                                                                          : "") +
                              (takes_workers ? (k == 0 ? " --workers 1" : " --workers 3") : "") + " > /dev/null";
      if (std::system(cmd.c_str()) != 0) {
        failed += " " + name + "(exit)";
        break;
      }
    }
    std::string why;
    if (failed.find(name) == std::string::npos && !same_tree(dirs[0], dirs[1], why)) failed += " " + name + "(" + why + ")";
  }
  return {failed.empty(), failed.empty() ? fmt("%zu subcommands byte-identical across worker counts", commands.size())
                                         : "mismatch:" + failed};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> only;
  std::string config;
  std::string cli;
  std::string work = "acceptance_work";
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--config", config, "stressed scenario config")->required()->check(CLI::ExistingFile);
  app.add_option("--cli", cli, "tclsafe executable")->required()->check(CLI::ExistingFile);
  app.add_option("--work", work, "scratch directory");
  CLI11_PARSE(app, argc, argv);
  log::set_level(log::Level::warning);

  const auto cfg = harness::load_scenario(config);
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, sequential_test_study},
      {2, minimal_bound},
      {3, exact_monotonicity},
      {4, [&] { return safety_curve(cfg); }},
      {5, [&] { return constraint_set(cfg); }},
      {6, [&] { return closed_loop(cfg); }},
      {7, power_flow},
      {8, [&] { return determinism(cfg, cli, work); }},
  };
  const std::array<const char*, 9> limits{"", "300", "60", "60", "600", "1200", "1800", "60", "600"};
  bool all = true;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = seconds_since(t0);
    const bool in_time = s <= std::atof(limits[static_cast<std::size_t>(id)]);
    const bool pass = o.pass && in_time;
    all = all && pass;
    std::printf("criterion %d: %s  %s [%.1fs%s]\n", id, pass ? "PASS" : "FAIL", o.detail.c_str(), s,
                in_time ? "" : ", over time budget");
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
