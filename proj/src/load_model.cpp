#include "tclsafe/load_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/random/normal_distribution.hpp>

#include "tclsafe/error.hpp"

namespace tclsafe::load {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double std_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double std_quantile(double p) {
  static const boost::math::normal unit(0.0, 1.0);
  return boost::math::quantile(unit, std::clamp(p, 1e-300, 1.0 - 1e-16));
}

// Univariate normal restricted to [lo, hi]; rejection first, inversion if the
// box is improbable.
// Integral of f(z) over the standardized box clipped to [-12, 12]; the
// integrand works in z so the quadrature does not see the scale.
template <class F>
double integrate_standard(F f, double mean, double sd, const Range& box, double tol) {
  using boost::math::quadrature::gauss_kronrod;
  const double lo = std::max((box.lo - mean) / sd, -12.0);
  const double hi = std::min((box.hi - mean) / sd, 12.0);
  if (!(lo < hi)) return 0.0;
  return gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, tol);
}

double truncated_normal(double mean, double sd, double lo, double hi, Stream& rng) {
  if (sd == 0.0) return mean;
  boost::random::normal_distribution<double> normal(mean, sd);
  for (int attempt = 0; attempt < 32; ++attempt) {
    const double x = normal(rng);
    if (x >= lo && x <= hi) return x;
  }
  const double a = std_cdf((lo - mean) / sd);
  const double b = std_cdf((hi - mean) / sd);
  return std::clamp(mean + sd * std_quantile(a + (b - a) * rng.uniform()), lo, hi);
}

}  // namespace

double MultiplierProfile::at(double t) const {
  if (knots.empty()) return 1.0;
  if (t <= knots.front().first) return knots.front().second;
  if (t >= knots.back().first) return knots.back().second;
  const auto hi = std::upper_bound(knots.begin(), knots.end(), t,
                                   [](double value, const auto& knot) { return value < knot.first; });
  const auto lo = hi - 1;
  const double w = (t - lo->first) / (hi->first - lo->first);
  return lo->second + w * (hi->second - lo->second);
}

double MultiplierProfile::min_value() const {
  double m = knots.empty() ? 1.0 : knots.front().second;
  for (const auto& k : knots) m = std::min(m, k.second);
  return m;
}

double MultiplierProfile::max_value() const {
  double m = knots.empty() ? 1.0 : knots.front().second;
  for (const auto& k : knots) m = std::max(m, k.second);
  return m;
}

void MultiplierProfile::validate() const {
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (!std::isfinite(knots[i].first) || !std::isfinite(knots[i].second))
      throw ConfigError("load profile knots must be finite");
    if (i > 0 && !(knots[i].first > knots[i - 1].first))
      throw ConfigError("load profile knot times must increase");
  }
}

MultiplierProfile MultiplierProfile::afternoon_peak() {
  return {{{13.0 * 3600.0, 0.5}, {13.9 * 3600.0, 0.65}, {14.1 * 3600.0, 0.65}, {15.0 * 3600.0, 0.5}}};
}

MultiplierProfile MultiplierProfile::constant(double value) { return {{{0.0, value}}}; }

LoadModel::LoadModel(LoadModelSpec spec) : spec_(std::move(spec)) {
  const std::size_t n = spec_.nominal_real.size();
  if (n == 0) throw ConfigError("load model needs at least one node");
  if (spec_.nominal_reactive.size() != n)
    throw ConfigError("nominal real and reactive load vectors differ in length");
  for (std::size_t j = 0; j < n; ++j)
    if (!(spec_.nominal_real[j] >= 0.0) || !(spec_.nominal_reactive[j] >= 0.0) ||
        !std::isfinite(spec_.nominal_real[j]) || !std::isfinite(spec_.nominal_reactive[j]))
      throw ConfigError("nominal loads must be finite and nonnegative (node " + std::to_string(j + 1) + ")");
  if (!(spec_.sd_fraction_real >= 0.0) || !(spec_.sd_fraction_reactive >= 0.0))
    throw ConfigError("load standard deviations must be nonnegative");
  if (!(std::abs(spec_.correlation) <= 1.0)) throw ConfigError("load correlation must lie in [-1, 1]");
  spec_.real_profile.validate();
  spec_.reactive_profile.validate();
  const Range box = spec_.truncation_fraction;
  for (const auto* profile : {&spec_.real_profile, &spec_.reactive_profile})
    if (profile->min_value() < box.lo || profile->max_value() > box.hi)
      throw ConfigError("load truncation interval must contain the mean at every profile knot");

  // The truncated density must integrate to one over its box.
  for (std::size_t j = 0; j < n; ++j) {
    for (const auto& knot : spec_.real_profile.knots) {
      const double err = std::abs(integrate_density(law(static_cast<int>(j), knot.first)) - 1.0);
      if (err > 1e-6)
        throw ConfigError("load density of node " + std::to_string(j + 1) + " fails normalization by " +
                          std::to_string(err));
    }
  }
}

NodeLaw LoadModel::law(int node, double t) const {
  const auto j = static_cast<std::size_t>(node);
  const double pn = spec_.nominal_real[j];
  const double qn = spec_.nominal_reactive[j];
  NodeLaw law;
  law.mean_real = spec_.real_profile.at(t) * pn;
  law.mean_reactive = spec_.reactive_profile.at(t) * qn;
  law.sd_real = spec_.sd_fraction_real * pn;
  law.sd_reactive = spec_.sd_fraction_reactive * qn;
  law.real_box = {spec_.truncation_fraction.lo * pn, spec_.truncation_fraction.hi * pn};
  law.reactive_box = {spec_.truncation_fraction.lo * qn, spec_.truncation_fraction.hi * qn};
  law.correlation = spec_.correlation;
  return law;
}

double LoadModel::log_kernel(const NodeLaw& law, double p, double q) {
  if (!law.real_box.contains(p) || !law.reactive_box.contains(q)) return kNegInf;
  const bool fixed_p = law.sd_real == 0.0;
  const bool fixed_q = law.sd_reactive == 0.0;
  if (fixed_p && p != law.mean_real) return kNegInf;
  if (fixed_q && q != law.mean_reactive) return kNegInf;
  const double zp = fixed_p ? 0.0 : (p - law.mean_real) / law.sd_real;
  const double zq = fixed_q ? 0.0 : (q - law.mean_reactive) / law.sd_reactive;
  double out = 0.0;
  if (!fixed_p) out -= std::log(law.sd_real) + 0.5 * std::log(2.0 * std::numbers::pi);
  if (!fixed_q) out -= std::log(law.sd_reactive) + 0.5 * std::log(2.0 * std::numbers::pi);
  const double rho = (fixed_p || fixed_q) ? 0.0 : law.correlation;
  if (rho == 0.0) return out - 0.5 * (zp * zp + zq * zq);
  const double det = 1.0 - rho * rho;
  if (det <= 0.0) {
    // Perfect correlation: mass only on the line zq = rho * zp.
    return std::abs(zq - rho * zp) < 1e-12 ? out : kNegInf;
  }
  return out - 0.5 * std::log(det) - 0.5 * (zp * zp - 2.0 * rho * zp * zq + zq * zq) / det;
}

double LoadModel::box_mass(const NodeLaw& law) {
  auto marginal = [](double mean, double sd, const Range& box) {
    if (sd == 0.0) return box.contains(mean) ? 1.0 : 0.0;
    return std_cdf((box.hi - mean) / sd) - std_cdf((box.lo - mean) / sd);
  };
  const double rho = law.correlation;
  if (rho == 0.0 || law.sd_real == 0.0 || law.sd_reactive == 0.0)
    return marginal(law.mean_real, law.sd_real, law.real_box) *
           marginal(law.mean_reactive, law.sd_reactive, law.reactive_box);
  const double cond_sd = law.sd_reactive * std::sqrt(std::max(0.0, 1.0 - rho * rho));
  auto inner = [&](double zx) {
    const double cond_mean = law.mean_reactive + rho * law.sd_reactive * zx;
    const double phi = std::exp(-0.5 * zx * zx) / std::sqrt(2.0 * std::numbers::pi);
    if (cond_sd == 0.0) return law.reactive_box.contains(cond_mean) ? phi : 0.0;
    return phi * (std_cdf((law.reactive_box.hi - cond_mean) / cond_sd) -
                  std_cdf((law.reactive_box.lo - cond_mean) / cond_sd));
  };
  return integrate_standard(inner, law.mean_real, law.sd_real, law.real_box, 1e-13);
}

double LoadModel::density(const NodeLaw& law, double p, double q) {
  const double k = log_kernel(law, p, q);
  if (k == kNegInf) return 0.0;
  return std::exp(k) / box_mass(law);
}

double LoadModel::integrate_density(const NodeLaw& law) {
  const bool fixed_p = law.sd_real == 0.0;
  const bool fixed_q = law.sd_reactive == 0.0;
  if (fixed_p && fixed_q) return 1.0;
  const double mass = box_mass(law);
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  if (fixed_p || fixed_q) {
    if (fixed_p ? !law.real_box.contains(law.mean_real) : !law.reactive_box.contains(law.mean_reactive))
      return 0.0;
    auto line = [&](double z) { return norm * std::exp(-0.5 * z * z); };
    return (fixed_p ? integrate_standard(line, law.mean_reactive, law.sd_reactive, law.reactive_box, 1e-12)
                    : integrate_standard(line, law.mean_real, law.sd_real, law.real_box, 1e-12)) /
           mass;
  }
  const double rho = law.correlation;
  const double det = 1.0 - rho * rho;
  if (det <= 0.0) return 1.0;
  auto outer = [&](double zp) {
    auto inner = [&](double zq) {
      return norm * norm / std::sqrt(det) * std::exp(-0.5 * (zp * zp - 2.0 * rho * zp * zq + zq * zq) / det);
    };
    return integrate_standard(inner, law.mean_reactive, law.sd_reactive, law.reactive_box, 1e-12);
  };
  return integrate_standard(outer, law.mean_real, law.sd_real, law.real_box, 1e-12) / mass;
}

std::pair<double, double> LoadModel::draw(const NodeLaw& law, Stream& rng) {
  const double rho = law.correlation;
  if (rho == 0.0 || law.sd_real == 0.0 || law.sd_reactive == 0.0) {
    const double p = truncated_normal(law.mean_real, law.sd_real, law.real_box.lo, law.real_box.hi, rng);
    const double q =
        truncated_normal(law.mean_reactive, law.sd_reactive, law.reactive_box.lo, law.reactive_box.hi, rng);
    return {p, q};
  }
  // Truncated marginal proposal for p, then the untruncated conditional for q;
  // rejecting on q leaves exactly the truncated joint law.
  const double cond_sd = law.sd_reactive * std::sqrt(std::max(0.0, 1.0 - rho * rho));
  boost::random::normal_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const double p = truncated_normal(law.mean_real, law.sd_real, law.real_box.lo, law.real_box.hi, rng);
    const double cond_mean = law.mean_reactive + rho * law.sd_reactive * (p - law.mean_real) / law.sd_real;
    const double q = cond_mean + cond_sd * unit(rng);
    if (law.reactive_box.contains(q)) return {p, q};
  }
  throw ConfigError("load law has negligible mass inside its truncation box");
}

void LoadModel::sample(double t, Stream& rng, std::vector<double>& p, std::vector<double>& q) const {
  const int n = node_count();
  p.resize(static_cast<std::size_t>(n));
  q.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const auto [pj, qj] = draw(law(j, t), rng);
    p[static_cast<std::size_t>(j)] = pj;
    q[static_cast<std::size_t>(j)] = qj;
  }
}

std::vector<double> LoadModel::max_real() const {
  std::vector<double> out;
  for (double pn : spec_.nominal_real) out.push_back(spec_.truncation_fraction.hi * pn);
  return out;
}

std::vector<double> LoadModel::max_reactive() const {
  std::vector<double> out;
  for (double qn : spec_.nominal_reactive) out.push_back(spec_.truncation_fraction.hi * qn);
  return out;
}

std::vector<double> LoadModel::mean_real(double t) const {
  std::vector<double> out;
  for (double pn : spec_.nominal_real) out.push_back(spec_.real_profile.at(t) * pn);
  return out;
}

std::vector<double> LoadModel::mean_reactive(double t) const {
  std::vector<double> out;
  for (double qn : spec_.nominal_reactive) out.push_back(spec_.reactive_profile.at(t) * qn);
  return out;
}

}  // namespace tclsafe::load
