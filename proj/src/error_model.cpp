#include "cotlab/error_model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "cotlab/rng.hpp"

namespace cotlab {

namespace {

constexpr double kEpsilonUpperBound = 1.0 - 1e-9;
// chi2(1 dof, 0.95) / 2: profile-likelihood drop for a 95% interval.
constexpr double kProfileDrop = 1.920729410347062;

void check_probability(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw DomainError("epsilon must lie in [0, 1]");
}

void check_length(int length) {
  if (length < 1) throw DomainError("length must be >= 1");
}

// log((1 - epsilon)^length) without forming the power.
double log_survival(double epsilon, int length) {
  return static_cast<double>(length) * std::log1p(-epsilon);
}

}  // namespace

double cumulative_error(double epsilon, int length) {
  check_probability(epsilon);
  check_length(length);
  if (epsilon == 1.0) return 1.0;
  return -std::expm1(log_survival(epsilon, length));
}

LengthDistribution LengthDistribution::from_support(
    std::vector<std::pair<int, double>> support) {
  if (support.empty()) throw DomainError("length distribution needs support");
  double total = 0.0;
  for (const auto& [length, prob] : support) {
    if (length < 1) throw DomainError("lengths must be >= 1");
    if (!(prob >= 0.0)) throw DomainError("probabilities must be >= 0");
    total += prob;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw DomainError("probabilities must sum to 1");
  return LengthDistribution(std::move(support));
}

LengthDistribution LengthDistribution::point_mass(int length) {
  return from_support({{length, 1.0}});
}

LengthDistribution LengthDistribution::from_counts(
    const std::map<int, long long>& counts) {
  long long total = 0;
  for (const auto& [length, count] : counts) {
    if (count < 0) throw DomainError("counts must be >= 0");
    total += count;
  }
  if (total == 0) throw DomainError("length distribution needs counts");
  std::vector<std::pair<int, double>> support;
  support.reserve(counts.size());
  double acc = 0.0;
  for (const auto& [length, count] : counts) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / static_cast<double>(total);
    support.emplace_back(length, p);
    acc += p;
  }
  // Absorb float residue into the largest cell so the support sums to 1.
  auto largest = std::max_element(
      support.begin(), support.end(),
      [](const auto& a, const auto& b) { return a.second < b.second; });
  largest->second += 1.0 - acc;
  return from_support(std::move(support));
}

double predict_accuracy(double epsilon, const LengthDistribution& dist) {
  check_probability(epsilon);
  double acc = 0.0;
  for (const auto& [length, prob] : dist.support())
    acc += prob * (epsilon == 1.0 ? 0.0 : std::exp(log_survival(epsilon, length)));
  return acc;
}

namespace {

void check_observations(const std::vector<ChainObservation>& observations) {
  if (observations.empty())
    throw EmptyObservations("fit requires at least one observation bin");
  for (const ChainObservation& obs : observations) {
    if (obs.length < 1) throw DomainError("observation length must be >= 1");
    if (obs.trials < 1) throw DomainError("observation trials must be >= 1");
    if (obs.successes < 0 || obs.successes > obs.trials)
      throw DomainError("successes must lie in [0, trials]");
  }
}

// Binomial log-likelihood of epsilon (binomial coefficients omitted; they
// are constant in epsilon).
double log_likelihood(const std::vector<ChainObservation>& observations,
                      double epsilon) {
  double ll = 0.0;
  for (const ChainObservation& obs : observations) {
    const long long failures = obs.trials - obs.successes;
    if (obs.successes > 0) {
      if (epsilon >= 1.0) return -std::numeric_limits<double>::infinity();
      ll += static_cast<double>(obs.successes) * log_survival(epsilon, obs.length);
    }
    if (failures > 0) {
      if (epsilon <= 0.0) return -std::numeric_limits<double>::infinity();
      const double log_fail = std::log(-std::expm1(log_survival(epsilon, obs.length)));
      ll += static_cast<double>(failures) * log_fail;
    }
  }
  return ll;
}

double saturated_log_likelihood(const std::vector<ChainObservation>& observations) {
  double ll = 0.0;
  for (const ChainObservation& obs : observations) {
    const long long failures = obs.trials - obs.successes;
    const double t = static_cast<double>(obs.trials);
    if (obs.successes > 0)
      ll += static_cast<double>(obs.successes) *
            std::log(static_cast<double>(obs.successes) / t);
    if (failures > 0)
      ll += static_cast<double>(failures) *
            std::log(static_cast<double>(failures) / t);
  }
  return ll;
}

// Golden-section maximization on [lo, hi]; deterministic, derivative-free.
double golden_section_max(const std::function<double(double)>& f, double lo,
                          double hi, double tolerance) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tolerance) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    }
  }
  return (a + b) / 2.0;
}

// Root of f on [lo, hi] by bisection, assuming f(lo) and f(hi) straddle 0.
double bisect(const std::function<double(double)>& f, double lo, double hi,
              bool increasing) {
  for (int i = 0; i < 200 && hi - lo > 1e-12; ++i) {
    const double mid = (lo + hi) / 2.0;
    const double v = f(mid);
    if ((v < 0.0) == increasing)
      lo = mid;
    else
      hi = mid;
  }
  return (lo + hi) / 2.0;
}

}  // namespace

ErrorModelFit fit_epsilon(const std::vector<ChainObservation>& observations) {
  check_observations(observations);

  long long total_successes = 0, total_trials = 0;
  for (const ChainObservation& obs : observations) {
    total_successes += obs.successes;
    total_trials += obs.trials;
  }

  const auto ll = [&](double epsilon) {
    return log_likelihood(observations, epsilon);
  };

  ErrorModelFit fit;
  fit.n_observations = total_trials;

  if (total_successes == total_trials) {
    fit.epsilon_hat = 0.0;  // boundary MLE: every chain survived
    fit.degenerate = true;
  } else if (total_successes == 0) {
    fit.epsilon_hat = kEpsilonUpperBound;  // boundary MLE, clamped
    fit.degenerate = true;
  } else {
    fit.epsilon_hat = golden_section_max(ll, 0.0, kEpsilonUpperBound, 1e-9);
  }
  fit.log_likelihood = ll(fit.epsilon_hat);

  // 95% profile-likelihood interval: epsilon with ll >= ll_hat - drop.
  const double threshold = fit.log_likelihood - kProfileDrop;
  const auto above = [&](double epsilon) { return ll(epsilon) - threshold; };
  if (fit.epsilon_hat <= 0.0 || above(0.0) >= 0.0)
    fit.confidence_low = 0.0;
  else
    fit.confidence_low = bisect(above, 0.0, fit.epsilon_hat, true);
  if (fit.epsilon_hat >= kEpsilonUpperBound || above(kEpsilonUpperBound) >= 0.0)
    fit.confidence_high = kEpsilonUpperBound;
  else
    fit.confidence_high = bisect(above, fit.epsilon_hat, kEpsilonUpperBound, false);

  fit.deviance = 2.0 * (saturated_log_likelihood(observations) - fit.log_likelihood);
  fit.deviance_dof = std::max(0, static_cast<int>(observations.size()) - 1);
  return fit;
}

ErrorModelFit fit_epsilon_least_squares(
    const std::vector<ChainObservation>& observations) {
  check_observations(observations);

  const auto negative_sse = [&](double epsilon) {
    double sse = 0.0;
    for (const ChainObservation& obs : observations) {
      const double observed =
          static_cast<double>(obs.successes) / static_cast<double>(obs.trials);
      const double predicted =
          epsilon >= 1.0 ? 0.0 : std::exp(log_survival(epsilon, obs.length));
      const double r = observed - predicted;
      sse += static_cast<double>(obs.trials) * r * r;
    }
    return -sse;
  };

  ErrorModelFit fit;
  fit.epsilon_hat = golden_section_max(negative_sse, 0.0, kEpsilonUpperBound, 1e-9);
  fit.log_likelihood = log_likelihood(observations, fit.epsilon_hat);
  for (const ChainObservation& obs : observations) fit.n_observations += obs.trials;
  fit.confidence_low = fit.confidence_high = fit.epsilon_hat;
  fit.deviance =
      2.0 * (saturated_log_likelihood(observations) - fit.log_likelihood);
  fit.deviance_dof = std::max(0, static_cast<int>(observations.size()) - 1);
  return fit;
}

bool simulate_chain(double epsilon, int length, std::uint64_t seed) {
  check_probability(epsilon);
  check_length(length);
  SplitMix64 rng(seed);
  for (int i = 0; i < length; ++i)
    if (rng.bernoulli(epsilon)) return false;
  return true;
}

}  // namespace cotlab
