#include <doctest.h>

#include <cmath>
#include <numbers>

#include "tclsafe/error.hpp"
#include "tclsafe/tcl.hpp"

using namespace tclsafe;
using namespace tclsafe::tcl;

namespace {

TclPopulation homogeneous(int count, int nodes, double temperature, bool on, double dt = 60.0) {
  std::vector<TclParams> p;
  std::vector<TclState> s;
  for (int i = 0; i < count; ++i) {
    TclParams d;
    d.node = 1 + i % nodes;
    p.push_back(d);
    s.push_back({temperature, on});
  }
  return TclPopulation(std::move(p), std::move(s), nodes, dt);
}

}  // namespace

TEST_SUITE("tcl") {

TEST_CASE("affine temperature update") {
  TclParams d;
  d.ambient_temp = 30.0;
  d.thermal_resistance = 2.0;
  d.transfer_rate = -10.0;
  d.thermal_capacitance = (60.0 / 3600.0) / (2.0 * std::numbers::ln2);
  d.setpoint = 20.0;
  d.deadband_width = 2.0;
  CHECK(d.decay(60.0) == doctest::Approx(0.5).epsilon(1e-14));
  TclPopulation pop({d}, {{22.0, true}}, 1, 60.0);
  CHECK(pop.next_temperatures()[0] == doctest::Approx(16.0).epsilon(1e-14));
  pop.step(0.0, 1, 1);
  CHECK(pop.states()[0].temperature == doctest::Approx(16.0).epsilon(1e-14));
  CHECK_FALSE(pop.states()[0].on);
}

TEST_CASE("zero command inside the band changes nothing") {
  auto pop = homogeneous(40, 4, 22.5, false);
  // Nodes 1 and 3 fully ON, all mid-band.
  std::vector<TclState> s(pop.states().begin(), pop.states().end());
  for (std::size_t i = 0; i < s.size(); i += 2) s[i].on = true;
  pop.set_states(s);
  const auto r = pop.step(0.0, 3, 1);
  CHECK(r.counts.total_thermostat_on() == 0);
  CHECK(r.counts.total_thermostat_off() == 0);
  for (int j = 0; j < 4; ++j) {
    CHECK(r.counts.command_on[j] == 0);
    CHECK(r.counts.command_off[j] == 0);
  }
  CHECK(pop.on_counts() == std::vector<int>{10, 0, 10, 0});
}

TEST_CASE("full command switches every in-band OFF device") {
  auto pop = homogeneous(30, 3, 22.5, false);
  const auto r = pop.step(1.0, 4, 1);
  for (int j = 0; j < 3; ++j) CHECK(r.counts.command_on[j] == r.counts.off_before[j]);
  CHECK(r.aggregate_real_kw == doctest::Approx(30 * TclParams{}.rated_real()));
  CHECK_THROWS_AS(pop.step(1.5, 4, 2), Error);
}

TEST_CASE("temperature containment at zero command") {
  ParameterRanges ranges;
  auto pop = sample_population(200, std::vector<double>{1.0, 2.0}, ranges, 60.0, 5);
  std::vector<double> slack;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const auto& p = pop.params()[i];
    const double a = pop.decay()[i];
    const double on_target = p.ambient_temp + p.thermal_resistance * p.transfer_rate;
    slack.push_back((1.0 - a) * std::max(std::abs(p.ambient_temp - p.upper()), std::abs(on_target - p.lower())));
  }
  for (int k = 1; k <= 10000; ++k) {
    pop.step(0.0, 5, static_cast<std::uint64_t>(k));
    if (k % 50 != 0) continue;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      const auto& p = pop.params()[i];
      const double t = pop.states()[i].temperature;
      REQUIRE(t >= p.lower() - slack[i] - 1e-12);
      REQUIRE(t <= p.upper() + slack[i] + 1e-12);
    }
  }
}

TEST_CASE("command switching fraction tends to u") {
  // Very slow thermal dynamics keep everyone in-band.
  std::vector<TclParams> p(5000);
  for (auto& d : p) d.thermal_capacitance = 1e6;
  std::vector<TclState> s(5000, {22.5, false});
  TclPopulation pop(p, s, 1, 60.0);
  const double u = 0.3;
  long switched = 0;
  long eligible = 0;
  for (int k = 1; k <= 20; ++k) {
    pop.set_states(s);
    const auto r = pop.step(u, 6, static_cast<std::uint64_t>(k));
    switched += r.counts.command_on[0];
    eligible += r.counts.off_before[0];
  }
  const double frac = static_cast<double>(switched) / eligible;
  CHECK(std::abs(frac - u) < 4.0 * std::sqrt(u * (1 - u) / eligible));
}

TEST_CASE("count identity and power factor") {
  auto pop = sample_population(300, std::vector<double>{1, 1, 2, 0, 3}, ParameterRanges{}, 60.0, 7);
  for (const auto& p : pop.params())
    CHECK(p.rated_reactive() / p.rated_real() == doctest::Approx(p.reactive_ratio).epsilon(1e-15));
  CHECK(pop.node_counts()[3] == 0);
  for (int k = 1; k <= 300; ++k) {
    const auto before = pop.on_counts();
    const double u = std::sin(0.1 * k);
    const auto r = pop.step(u, 7, static_cast<std::uint64_t>(k));
    const auto after = pop.on_counts();
    for (int j = 0; j < 5; ++j) {
      REQUIRE(after[j] == before[j] + r.counts.thermostat_on[j] - r.counts.thermostat_off[j] +
                              r.counts.command_on[j] - r.counts.command_off[j]);
      REQUIRE(after[j] == r.counts.on_after[j]);
    }
  }
}

TEST_CASE("population sampling") {
  CHECK_THROWS_AS(sample_population(0, std::vector<double>{1.0}, ParameterRanges{}, 60.0, 1), ConfigError);
  ParameterRanges r;
  const auto pop = sample_population(1000, std::vector<double>{1.0, 3.0}, r, 60.0, 8);
  CHECK(pop.node_counts() == std::vector<int>{250, 750});
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const auto& p = pop.params()[i];
    CHECK(r.ambient_temp.contains(p.ambient_temp));
    CHECK(r.thermal_capacitance.contains(p.thermal_capacitance));
    CHECK(r.thermal_resistance.contains(p.thermal_resistance));
    CHECK(r.transfer_rate.contains(p.transfer_rate));
    CHECK(r.cop.contains(p.cop));
    CHECK(r.setpoint.contains(p.setpoint));
    CHECK(r.deadband_width.contains(p.deadband_width));
    CHECK(pop.decay()[i] > 0.0);
    CHECK(pop.decay()[i] < 1.0);
    CHECK(pop.states()[i].temperature >= p.lower());
    CHECK(pop.states()[i].temperature <= p.upper());
  }

  ParameterRanges point;
  point.ambient_temp = {30, 30};
  point.thermal_capacitance = {2, 2};
  point.thermal_resistance = {2, 2};
  point.transfer_rate = {-16, -16};
  point.cop = {2.5, 2.5};
  point.setpoint = {22, 22};
  point.deadband_width = {2, 2};
  point.power_factor = {0.97, 0.97};
  const auto same = sample_population(50, std::vector<double>{1.0}, point, 60.0, 9);
  const auto on = same.on_counts()[0];
  CHECK(same.aggregate_real_kw() == doctest::Approx(on * 16.0 / 2.5));
}

TEST_CASE("nodal power") {
  auto pop = homogeneous(10, 3, 22.5, false);
  auto zero = nodal_tcl_power(pop);
  for (double v : zero.real_power) CHECK(v == 0.0);

  std::vector<TclParams> p(10);
  for (auto& d : p) {
    d.node = 3;
    d.transfer_rate = -12.5;
  }
  TclPopulation all_on(p, std::vector<TclState>(10, {22.5, true}), 4, 60.0);
  const auto inj = nodal_tcl_power(all_on);
  CHECK(inj.real_power == std::vector<double>{0.0, 0.0, 50.0, 0.0});

  auto mixed = sample_population(120, std::vector<double>{1, 2, 3}, ParameterRanges{}, 60.0, 10);
  const auto exact = nodal_tcl_power(mixed);
  const auto on = mixed.on_counts();
  for (int j = 0; j < 3; ++j) {
    double spread = 0.0;
    for (const auto& d : mixed.params())
      if (d.node == j + 1) spread = std::max(spread, std::abs(d.rated_real() - mixed.avg_real()[j]));
    CHECK(std::abs(exact.real_power[j] - mixed.avg_real()[j] * on[j]) <= spread * on[j] + 1e-9);
  }
}

TEST_CASE("snapshot round trip") {
  auto pop = sample_population(25, std::vector<double>{1, 1}, ParameterRanges{}, 30.0, 11);
  pop.step(0.4, 11, 1);
  const auto back = population_from_json(population_to_json(pop));
  REQUIRE(back.size() == pop.size());
  CHECK(back.dt_seconds() == pop.dt_seconds());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    CHECK(back.states()[i].temperature == pop.states()[i].temperature);
    CHECK(back.states()[i].on == pop.states()[i].on);
    CHECK(back.params()[i].cop == pop.params()[i].cop);
  }
}

}
