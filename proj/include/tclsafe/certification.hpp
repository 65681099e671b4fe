#pragma once

#include <cstdint>
#include <functional>

namespace tclsafe::certification {

/// Right-hand side of the sample-size condition:
///   ln(1/beta) / ((m + eps) ln(m + eps) - (m + eps - 1)).
/// +inf when m + eps <= 1 (the denominator vanishes or the first condition fails).
double required_samples(double m, double epsilon, double beta);

/// Both acceptance conditions: m > 1 - eps and n > required_samples(m).
bool accepts(std::int64_t successes, std::int64_t samples, double epsilon, double beta);

struct TestOptions {
  double epsilon = 0.05;
  double beta = 0.001;
  std::int64_t max_samples = 100000;
  std::int64_t batch_size = 2000;
  /// Stop once acceptance is out of reach even if every remaining sample
  /// succeeds. Never changes the decision, only the work spent rejecting.
  bool futility_stop = true;

  void validate() const;
};

struct TestResult {
  bool accepted = false;
  std::int64_t samples_used = 0;
  std::int64_t successes = 0;
  double m = 0.0;
  bool stopped_early = false;
};

/// Counts successes among realizations [begin, end).
using BatchSampler = std::function<std::int64_t(std::int64_t begin, std::int64_t end)>;

/// Sequential test: draw batches, check both conditions after each batch,
/// accept as soon as they hold, reject at max_samples.
TestResult run_test(const TestOptions& options, const BatchSampler& sampler);

/// Smallest n with n > required_samples(1) (all-success acceptance point).
std::int64_t minimal_samples(double epsilon, double beta);

/// Pr(Binomial(n, p) <= k).
double binomial_cdf(std::int64_t k, std::int64_t n, double p);

struct StudyResult {
  std::int64_t trials = 0;
  std::int64_t accepted = 0;
  double acceptance_rate = 0.0;
  double mean_samples = 0.0;
};

/// Repeated tests against a synthetic Bernoulli(nu) stream; trial i draws
/// from its own stream, so results do not depend on `workers`.
StudyResult bernoulli_study(const TestOptions& options, double nu, std::int64_t trials, std::uint64_t seed,
                            int workers = 1);

}  // namespace tclsafe::certification
