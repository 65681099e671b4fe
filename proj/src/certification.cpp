#include "tclsafe/certification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

#include "tclsafe/error.hpp"
#include "tclsafe/parallel.hpp"
#include "tclsafe/rng.hpp"

namespace tclsafe::certification {

double required_samples(double m, double epsilon, double beta) {
  const double x = m + epsilon;
  if (!(x > 1.0)) return std::numeric_limits<double>::infinity();
  // x ln x - (x - 1) with a series near x = 1 to avoid cancellation.
  const double y = x - 1.0;
  const double denom = y < 1e-4 ? y * y / 2.0 - y * y * y / 6.0 + y * y * y * y / 12.0
                                 : x * std::log(x) - y;
  return std::log(1.0 / beta) / denom;
}

bool accepts(std::int64_t successes, std::int64_t samples, double epsilon, double beta) {
  if (samples <= 0) return false;
  const double m = static_cast<double>(successes) / static_cast<double>(samples);
  return m > 1.0 - epsilon && static_cast<double>(samples) > required_samples(m, epsilon, beta);
}

void TestOptions::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must lie in (0, 1)");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (static_cast<double>(max_samples) <= required_samples(1.0, epsilon, beta))
    throw ConfigError("max_samples cannot reach the minimal sample bound " +
                      std::to_string(minimal_samples(epsilon, beta)));
}

TestResult run_test(const TestOptions& options, const BatchSampler& sampler) {
  TestResult result;
  while (result.samples_used < options.max_samples) {
    const std::int64_t end = std::min(result.samples_used + options.batch_size, options.max_samples);
    result.successes += sampler(result.samples_used, end);
    result.samples_used = end;
    result.m = static_cast<double>(result.successes) / static_cast<double>(result.samples_used);
    if (accepts(result.successes, result.samples_used, options.epsilon, options.beta)) {
      result.accepted = true;
      return result;
    }
    if (options.futility_stop && result.samples_used < options.max_samples) {
      // Best case: every remaining sample succeeds. Both conditions only get
      // easier with more successes, so checking the last checkpoint suffices.
      const std::int64_t best = result.successes + (options.max_samples - result.samples_used);
      if (!accepts(best, options.max_samples, options.epsilon, options.beta)) {
        result.stopped_early = true;
        return result;
      }
    }
  }
  return result;
}

std::int64_t minimal_samples(double epsilon, double beta) {
  const double bound = required_samples(1.0, epsilon, beta);
  return static_cast<std::int64_t>(std::floor(bound)) + 1;
}

double binomial_cdf(std::int64_t k, std::int64_t n, double p) {
  if (n < 0 || !(p >= 0.0 && p <= 1.0)) throw ConfigError("binomial cdf needs n >= 0 and p in [0, 1]");
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  const boost::math::binomial_distribution<double> law(static_cast<double>(n), p);
  return boost::math::cdf(law, static_cast<double>(k));
}

StudyResult bernoulli_study(const TestOptions& options, double nu, std::int64_t trials, std::uint64_t seed,
                            int workers) {
  options.validate();
  if (trials < 1) throw ConfigError("study needs at least one trial");
  if (!(nu >= 0.0 && nu <= 1.0)) throw ConfigError("true success probability must lie in [0, 1]");
  std::vector<char> accepted(static_cast<std::size_t>(trials), 0);
  std::vector<std::int64_t> used(static_cast<std::size_t>(trials), 0);
  parallel_for(0, static_cast<std::size_t>(trials), resolve_workers(workers), [&](std::size_t i) {
    Stream rng = make_stream(seed, StreamDomain::synthetic_bernoulli, i);
    const auto r = run_test(options, [&](std::int64_t begin, std::int64_t end) {
      std::int64_t hits = 0;
      for (std::int64_t s = begin; s < end; ++s) hits += rng.uniform() < nu ? 1 : 0;
      return hits;
    });
    accepted[i] = r.accepted ? 1 : 0;
    used[i] = r.samples_used;
  });
  StudyResult out;
  out.trials = trials;
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    out.accepted += accepted[i];
    out.mean_samples += static_cast<double>(used[i]);
  }
  out.acceptance_rate = static_cast<double>(out.accepted) / static_cast<double>(trials);
  out.mean_samples /= static_cast<double>(trials);
  return out;
}

}  // namespace tclsafe::certification
