#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nestrisk/rng.hpp"

namespace nestrisk {

/// Discrete index sampler over portfolio entries with p_i proportional to
/// g~_i / sqrt(W_i).  Draws invert the cumulative table by binary search.
struct IndexSampler {
  std::vector<double> probabilities;  // p_i, sums to 1
  std::vector<double> cumulative;     // nondecreasing, ends at 1
  std::vector<double> work_model;     // W_i used to build the probabilities

  std::size_t size() const { return probabilities.size(); }
};

/// p_i = (g~_i / sqrt(W_i)) / sum_j (g~_j / sqrt(W_j)).
/// Throws InvalidImportance unless all inputs are strictly positive.
IndexSampler optimal_probabilities(std::span<const double> importance,
                                   std::span<const double> work);

std::size_t draw(const IndexSampler& sampler, NoiseHandle& noise);

struct Allocation {
  std::vector<double> samples_per_term;  // real-valued N_i
};

/// N_i = B * (sigma~_i / sqrt(W_i)) / sum_j sigma~_j sqrt(W_j); satisfies
/// sum N_i W_i = B exactly.  Throws DegenerateAllocation when every sigma~
/// is zero.
Allocation stratified_allocation(std::span<const double> sigma_estimates,
                                 std::span<const double> work, double budget);

}  // namespace nestrisk
