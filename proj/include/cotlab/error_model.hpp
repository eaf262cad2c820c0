#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "cotlab/errors.hpp"

namespace cotlab {

// Discrete distribution over chain lengths L >= 1.
class LengthDistribution {
 public:
  // Validates: lengths >= 1, probabilities >= 0, sum within 1e-12 of 1.
  static LengthDistribution from_support(
      std::vector<std::pair<int, double>> support);
  static LengthDistribution point_mass(int length);
  static LengthDistribution from_counts(const std::map<int, long long>& counts);

  const std::vector<std::pair<int, double>>& support() const { return support_; }

 private:
  explicit LengthDistribution(std::vector<std::pair<int, double>> support)
      : support_(std::move(support)) {}
  std::vector<std::pair<int, double>> support_;
};

// Accuracy observed for chains of one length: successes out of trials.
struct ChainObservation {
  int length = 0;
  long long successes = 0;
  long long trials = 0;
};

struct ErrorModelFit {
  double epsilon_hat = 0.0;
  double log_likelihood = 0.0;
  long long n_observations = 0;  // total trials across bins
  double confidence_low = 0.0;   // 95% profile-likelihood interval
  double confidence_high = 0.0;
  bool degenerate = false;       // all-success or all-failure boundary fit
  double deviance = 0.0;         // vs the saturated per-bin model
  int deviance_dof = 0;
};

class EmptyObservations : public Error {
 public:
  using Error::Error;
};

// Probability that a chain of `length` steps contains at least one failure
// when each step independently fails with probability epsilon.
double cumulative_error(double epsilon, int length);

// Expected fraction of fully correct chains under a length distribution.
double predict_accuracy(double epsilon, const LengthDistribution& dist);

// Maximum-likelihood per-step error rate from binned Bernoulli observations,
// found by deterministic bounded search on [0, 1-1e-9] to 1e-8.
ErrorModelFit fit_epsilon(const std::vector<ChainObservation>& observations);

// Secondary mode for plotting: trial-weighted least squares on the per-bin
// accuracies. Confidence bounds are not computed (set to the estimate).
ErrorModelFit fit_epsilon_least_squares(
    const std::vector<ChainObservation>& observations);

// True iff all `length` independent Bernoulli(1-epsilon) steps survive.
// Deterministic per seed.
bool simulate_chain(double epsilon, int length, std::uint64_t seed);

}  // namespace cotlab
