#include "nestrisk/subsampling.hpp"

#include <algorithm>
#include <cmath>

#include "nestrisk/errors.hpp"

namespace nestrisk {

IndexSampler optimal_probabilities(std::span<const double> importance,
                                   std::span<const double> work) {
  if (importance.empty() || importance.size() != work.size())
    throw InvalidImportance("importance/work vectors empty or mismatched");

  IndexSampler s;
  s.probabilities.resize(importance.size());
  s.work_model.assign(work.begin(), work.end());

  double norm = 0.0;
  for (std::size_t i = 0; i < importance.size(); ++i) {
    if (!(importance[i] > 0.0) || !(work[i] > 0.0))
      throw InvalidImportance("importance and work must be strictly positive");
    s.probabilities[i] = importance[i] / std::sqrt(work[i]);
    norm += s.probabilities[i];
  }

  s.cumulative.resize(importance.size());
  double c = 0.0;
  for (std::size_t i = 0; i < importance.size(); ++i) {
    s.probabilities[i] /= norm;
    c += s.probabilities[i];
    s.cumulative[i] = c;
  }
  s.cumulative.back() = 1.0;  // guard against rounding in the last slot
  return s;
}

std::size_t draw(const IndexSampler& sampler, NoiseHandle& noise) {
  const double u = noise.uniform();
  const auto it =
      std::lower_bound(sampler.cumulative.begin(), sampler.cumulative.end(), u);
  return static_cast<std::size_t>(it - sampler.cumulative.begin());
}

Allocation stratified_allocation(std::span<const double> sigma_estimates,
                                 std::span<const double> work, double budget) {
  if (sigma_estimates.empty() || sigma_estimates.size() != work.size() ||
      !(budget > 0.0))
    throw DegenerateAllocation("bad allocation inputs");

  double denom = 0.0;
  for (std::size_t i = 0; i < sigma_estimates.size(); ++i)
    denom += sigma_estimates[i] * std::sqrt(work[i]);
  if (!(denom > 0.0))
    throw DegenerateAllocation("all sigma estimates are zero");

  Allocation a;
  a.samples_per_term.resize(sigma_estimates.size());
  for (std::size_t i = 0; i < sigma_estimates.size(); ++i)
    a.samples_per_term[i] = budget * (sigma_estimates[i] / std::sqrt(work[i])) / denom;
  return a;
}

}  // namespace nestrisk
