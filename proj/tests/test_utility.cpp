#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "tclsafe/error.hpp"
#include "tclsafe/utility.hpp"

using namespace tclsafe;
using namespace tclsafe::utility;

namespace {

constexpr double kNow = 14.0 * 3600.0;
constexpr double kNext = kNow + 60.0;

struct Case {
  grid::FeederModel feeder = testing::chain(2, 0.02, 0.02);
  load::LoadModel loads;
  UtilityObservation obs;

  Case(double sd_fraction, double correlation, std::vector<int> on, std::vector<int> counts)
      : loads(spec(sd_fraction, correlation)) {
    obs.tcl_counts = std::move(counts);
    obs.avg_real = {0.001, 0.0015};
    obs.avg_reactive = {0.0003, 0.0004};
    obs.w_on = {0.0, 0.0};
    obs.w_off = {0.0, 0.0};
    for (int j = 0; j < 2; ++j) {
      const auto law = loads.law(j, kNow);
      obs.measured.real_power.push_back(law.mean_real + obs.avg_real[j] * on[j]);
      obs.measured.reactive_power.push_back(law.mean_reactive + obs.avg_reactive[j] * on[j]);
    }
  }

  static load::LoadModelSpec spec(double sd, double rho) {
    load::LoadModelSpec s;
    s.nominal_real = {0.02, 0.03};
    s.nominal_reactive = {0.01, 0.012};
    s.real_profile = load::MultiplierProfile::constant(0.6);
    s.reactive_profile = load::MultiplierProfile::constant(0.6);
    s.sd_fraction_real = sd;
    s.sd_fraction_reactive = sd;
    s.correlation = rho;
    return s;
  }
};

// Bivariate normal kernel restricted to the box, written out directly.
double oracle_kernel(const load::NodeLaw& l, double p, double q) {
  if (p < l.real_box.lo || p > l.real_box.hi || q < l.reactive_box.lo || q > l.reactive_box.hi) return 0.0;
  const double a = (p - l.mean_real) / l.sd_real;
  const double b = (q - l.mean_reactive) / l.sd_reactive;
  const double r = l.correlation;
  return std::exp(-(a * a - 2 * r * a * b + b * b) / (2 * (1 - r * r)));
}

SafetyConfig config(double v_floor = 0.95) {
  SafetyConfig c;
  c.v_floor = v_floor;
  c.workers = 1;
  return c;
}

}  // namespace

TEST_SUITE("utility") {

TEST_CASE("posterior edge cases") {
  Case c(0.15, 0.0, {0, 3}, {0, 10});
  const auto post = posterior_on_counts(c.obs, c.loads, kNow);
  REQUIRE(post.pmf[0].size() == 1);
  CHECK(post.pmf[0][0] == 1.0);

  Case sharp(1e-7, 0.0, {0, 3}, {5, 10});
  const auto s = posterior_on_counts(sharp.obs, sharp.loads, kNow);
  CHECK(s.pmf[1][3] == doctest::Approx(1.0));
  CHECK(s.pmf[0][0] == doctest::Approx(1.0));

  // Outside the support for every n: Mahalanobis point mass.
  Case far = sharp;
  far.obs.measured.real_power[1] = 10.0;
  const auto d = posterior_on_counts(far.obs, far.loads, kNow);
  CHECK(d.degenerate[1] == 1);
  CHECK(d.pmf[1][10] == 1.0);
}

TEST_CASE("posterior matches brute-force Bayes") {
  for (double rho : {0.0, 0.4}) {
    Case c(0.15, rho, {4, 9}, {12, 25});
    const auto post = posterior_on_counts(c.obs, c.loads, kNow);
    for (int j = 0; j < 2; ++j) {
      const auto law = c.loads.law(j, kNow);
      std::vector<double> w;
      double total = 0.0;
      for (int n = 0; n <= c.obs.tcl_counts[j]; ++n) {
        w.push_back(oracle_kernel(law, c.obs.measured.real_power[j] - c.obs.avg_real[j] * n,
                                  c.obs.measured.reactive_power[j] - c.obs.avg_reactive[j] * n));
        total += w.back();
      }
      for (std::size_t n = 0; n < w.size(); ++n) CHECK(std::abs(post.pmf[j][n] - w[n] / total) < 1e-10);
    }
  }
}

TEST_CASE("realizations obey the count identity") {
  Case c(0.15, 0.0, {4, 9}, {12, 25});
  c.obs.w_on = {0.1, 0.2};
  c.obs.w_off = {0.3, 0.05};
  const SafetyProblem problem(c.feeder, c.loads, c.obs, kNow, kNext, config());
  Realization r;
  for (int k = 0; k < 2000; ++k) {
    Stream rng = make_stream(1, StreamDomain::utility_probe, 0, k);
    const double u = -1.0 + 0.001 * k;
    problem.realize(u, rng, r);
    for (int j = 0; j < 2; ++j) {
      REQUIRE(r.on_next[j] == r.on_now[j] + r.s_on[j] - r.s_off[j] + r.c_on[j] - r.c_off[j]);
      REQUIRE(r.on_next[j] >= 0);
      REQUIRE(r.on_next[j] <= c.obs.tcl_counts[j]);
      if (u >= 0) REQUIRE(r.c_off[j] == 0);
      if (u <= 0) REQUIRE(r.c_on[j] == 0);
    }
  }
}

TEST_CASE("command switches are binomial") {
  Case c(1e-7, 0.0, {3, 100}, {20, 180});
  const SafetyProblem problem(c.feeder, c.loads, c.obs, kNow, kNext, config());
  Realization r;
  const int n = 20000;
  const double u = 0.35;
  double m0 = 0.0;
  double m1 = 0.0;
  for (int k = 0; k < n; ++k) {
    Stream rng = make_stream(2, StreamDomain::utility_probe, 0, k);
    problem.realize(u, rng, r);
    m0 += r.c_on[0];
    m1 += r.c_on[1];
  }
  CHECK(std::abs(m0 / n - u * 17) < 4.0 * std::sqrt(17 * u * (1 - u) / n));
  CHECK(std::abs(m1 / n - u * 80) < 4.0 * std::sqrt(80 * u * (1 - u) / n));
}

TEST_CASE("light loading certifies the full range") {
  Case c(0.15, 0.0, {4, 9}, {12, 25});
  auto cfg = config();
  cfg.batch_size = 1;
  const SafetyProblem problem(c.feeder, c.loads, c.obs, kNow, kNext, cfg);
  const auto t = test_command(problem, 1.0, 3, 0);
  CHECK(t.accepted);
  CHECK(t.samples_used == certification::minimal_samples(0.05, 1e-3));

  const auto set = construct_constraint_set(SafetyProblem(c.feeder, c.loads, c.obs, kNow, kNext, config()), 3);
  CHECK(set.set.lower == -1.0);
  CHECK(set.set.upper == 1.0);
  CHECK_FALSE(set.infeasible);
  CHECK(set.probes.size() == 1);
}

TEST_CASE("unreachable floor is infeasible") {
  Case c(0.15, 0.0, {4, 9}, {12, 25});
  const SafetyProblem problem(c.feeder, c.loads, c.obs, kNow, kNext, config(0.99999));
  const auto r = construct_constraint_set(problem, 4);
  CHECK(r.infeasible);
  CHECK(r.set.lower == -1.0);
  CHECK(r.set.upper == -1.0);
}

TEST_CASE("bisection finds an interior bound, independent of workers") {
  // Near-deterministic loads; the floor sits at half of the OFF devices switching on.
  Case c(1e-6, 0.0, {10, 20}, {40, 60});
  grid::NodalInjection half = c.obs.measured;
  for (int j = 0; j < 2; ++j) {
    const auto law = c.loads.law(j, kNext);
    const int on = j == 0 ? 10 : 20;
    const int next = on + (c.obs.tcl_counts[j] - on) / 2;
    half.real_power[j] = law.mean_real + c.obs.avg_real[j] * next;
    half.reactive_power[j] = law.mean_reactive + c.obs.avg_reactive[j] * next;
  }
  const double floor = grid::solve_distflow(c.feeder, half).min_voltage();

  auto one = config(floor);
  auto many = config(floor);
  many.workers = 3;
  const auto a = construct_constraint_set(SafetyProblem(c.feeder, c.loads, c.obs, kNow, kNext, one), 5);
  const auto b = construct_constraint_set(SafetyProblem(c.feeder, c.loads, c.obs, kNow, kNext, many), 5);
  CHECK(a.set.upper > 0.0);
  CHECK(a.set.upper < 0.5);
  CHECK(a.set.upper == b.set.upper);
  CHECK(a.samples_used == b.samples_used);
  CHECK(a.accepted_m == b.accepted_m);
  CHECK(a.probes.size() == 2 + 7);

  const SafetyProblem p(c.feeder, c.loads, c.obs, kNow, kNext, one);
  const auto curve = estimate_safety_curve(p, {-1.0, 0.0, 0.5, 1.0}, 2000, 6);
  CHECK(curve[0].nu_hat == 1.0);
  CHECK(curve[1].nu_hat == 1.0);
  CHECK(curve[3].nu_hat == 0.0);
  CHECK_THROWS_AS(estimate_safety_curve(p, {0.0}, 0, 6), ConfigError);
  CHECK_THROWS_AS(estimate_safety_curve(p, {0.5, 0.0}, 10, 6), ConfigError);
}

TEST_CASE("invalid inputs") {
  Case c(0.15, 0.0, {4, 9}, {12, 25});
  auto bad = c.obs;
  bad.w_on = {1.5, 0.0};
  CHECK_THROWS_AS(posterior_on_counts(bad, c.loads, kNow), ConfigError);
  bad = c.obs;
  bad.tcl_counts = {1};
  CHECK_THROWS_AS(posterior_on_counts(bad, c.loads, kNow), ConfigError);
  auto cfg = config();
  cfg.max_samples = 10;
  CHECK_THROWS_AS(SafetyProblem(c.feeder, c.loads, c.obs, kNow, kNext, cfg), ConfigError);
  const SafetyProblem p(c.feeder, c.loads, c.obs, kNow, kNext, config());
  CHECK_THROWS_AS(test_command(p, 1.5, 1, 0), ConfigError);
}

}
