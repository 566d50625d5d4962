#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "nestrisk/errors.hpp"
#include "nestrisk/subsampling.hpp"

using namespace nestrisk;

namespace {

// Chi-square critical values at p = 0.001 for small degrees of freedom.
constexpr double kChi2Crit[] = {0.0,    10.828, 13.816, 16.266, 18.467,
                                20.515, 22.458, 24.322, 26.124, 27.877};

double chi2_statistic(const std::vector<std::uint64_t>& counts,
                      const std::vector<double>& probs, std::uint64_t n) {
  double stat = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double expd = probs[i] * static_cast<double>(n);
    stat += (counts[i] - expd) * (counts[i] - expd) / expd;
  }
  return stat;
}

}  // namespace

TEST_CASE("optimal probabilities: closed form to 1e-12") {
  {
    const std::array<double, 4> g{1, 1, 1, 1}, w{2, 2, 2, 2};
    const auto s = optimal_probabilities(g, w);
    for (double p : s.probabilities) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
  }
  {
    const std::array<double, 2> g{1, 2}, w{1, 4};
    const auto s = optimal_probabilities(g, w);
    CHECK(s.probabilities[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.probabilities[1] == doctest::Approx(0.5).epsilon(1e-12));
  }
  {
    const std::array<double, 2> g{1, 3}, w{1, 1};
    const auto s = optimal_probabilities(g, w);
    CHECK(s.probabilities[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(s.probabilities[1] == doctest::Approx(0.75).epsilon(1e-12));
  }
}

TEST_CASE("probability vector sums to one with a closed cumulative table") {
  NoiseHandle noise(5);
  std::vector<double> g(37), w(37);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = 0.01 + noise.uniform() * 10.0;
    w[i] = 1.0 + noise.uniform() * 30.0;
  }
  const auto s = optimal_probabilities(g, w);
  double sum = 0.0;
  for (double p : s.probabilities) {
    CHECK(p > 0.0);
    sum += p;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 1; i < s.cumulative.size(); ++i)
    CHECK(s.cumulative[i] >= s.cumulative[i - 1]);
  CHECK(s.cumulative.back() == 1.0);
}

TEST_CASE("invalid importance inputs are rejected") {
  const std::array<double, 2> good{1, 1};
  const std::array<double, 2> zero{1, 0};
  CHECK_THROWS_AS(optimal_probabilities(zero, good), InvalidImportance);
  CHECK_THROWS_AS(optimal_probabilities(good, zero), InvalidImportance);
  CHECK_THROWS_AS(optimal_probabilities(std::array<double, 0>{}, std::array<double, 0>{}),
                  InvalidImportance);
}

TEST_CASE("single-entry sampler always draws index 0") {
  const std::array<double, 1> g{3.0}, w{2.0};
  const auto s = optimal_probabilities(g, w);
  NoiseHandle noise(9);
  for (int i = 0; i < 100; ++i) CHECK(draw(s, noise) == 0);
}

TEST_CASE("draw frequencies: uniform case within 3 standard errors") {
  const std::array<double, 4> g{1, 1, 1, 1}, w{1, 1, 1, 1};
  const auto s = optimal_probabilities(g, w);
  NoiseHandle noise(13);
  const std::uint64_t n = 1'000'000;
  std::vector<std::uint64_t> counts(4, 0);
  for (std::uint64_t i = 0; i < n; ++i) counts[draw(s, noise)]++;
  const double se = std::sqrt(0.25 * 0.75 / static_cast<double>(n));
  for (auto c : counts)
    CHECK(std::abs(static_cast<double>(c) / n - 0.25) <= 3.0 * se);
}

TEST_CASE("draw frequencies: chi-square goodness of fit at p > 0.001") {
  const std::array<double, 2> g{1, 3}, w{1, 1};
  const auto s = optimal_probabilities(g, w);  // p = (0.25, 0.75)
  NoiseHandle noise(17);
  const std::uint64_t n = 1'000'000;
  std::vector<std::uint64_t> counts(2, 0);
  for (std::uint64_t i = 0; i < n; ++i) counts[draw(s, noise)]++;
  CHECK(chi2_statistic(counts, s.probabilities, n) < kChi2Crit[1]);
}

TEST_CASE("stratified allocation: symmetry and budget identity") {
  {
    const std::array<double, 5> sig{2, 2, 2, 2, 2}, w{3, 3, 3, 3, 3};
    const auto a = stratified_allocation(sig, w, 30.0);
    for (double n : a.samples_per_term) CHECK(n == doctest::Approx(2.0).epsilon(1e-12));
  }
  {
    const std::array<double, 2> sig{1, 1}, w{1, 4};
    const auto a = stratified_allocation(sig, w, 6.0);
    CHECK(a.samples_per_term[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(a.samples_per_term[1] == doctest::Approx(1.0).epsilon(1e-12));
    const double cost = a.samples_per_term[0] * 1.0 + a.samples_per_term[1] * 4.0;
    CHECK(cost == doctest::Approx(6.0).epsilon(1e-9));
  }
  NoiseHandle noise(21);
  std::vector<double> sig(11), w(11);
  for (std::size_t i = 0; i < sig.size(); ++i) {
    sig[i] = noise.uniform() * 4.0;
    w[i] = 0.5 + noise.uniform() * 9.5;
  }
  const double budget = 123.456;
  const auto a = stratified_allocation(sig, w, budget);
  double cost = 0.0;
  for (std::size_t i = 0; i < sig.size(); ++i) cost += a.samples_per_term[i] * w[i];
  CHECK(cost == doctest::Approx(budget).epsilon(1e-9));
}

TEST_CASE("stratified allocation matches the plug-in MSE formula") {
  const std::array<double, 5> sigma{0.5, 1.5, 3.0, 0.2, 2.2};
  const std::array<double, 5> w{1, 2, 9, 4, 1};
  const double budget = 50.0;
  const auto a = stratified_allocation(sigma, w, budget);
  const double p = 5.0;
  double mse = 0.0;
  for (std::size_t i = 0; i < 5; ++i)
    mse += sigma[i] * sigma[i] / a.samples_per_term[i] / (p * p);
  double t1 = 0.0, t2 = 0.0;  // with sigma~ = sigma the two averages coincide
  for (std::size_t i = 0; i < 5; ++i) {
    t1 += sigma[i] * std::sqrt(w[i]) / p;
    t2 += sigma[i] * std::sqrt(w[i]) / p;
  }
  CHECK(mse == doctest::Approx(t1 * t2 / budget).epsilon(1e-12));
}

TEST_CASE("degenerate allocations are rejected") {
  const std::array<double, 2> zeros{0, 0}, w{1, 1};
  CHECK_THROWS_AS(stratified_allocation(zeros, w, 10.0), DegenerateAllocation);
  const std::array<double, 2> sig{1, 1};
  CHECK_THROWS_AS(stratified_allocation(sig, w, 0.0), DegenerateAllocation);
}

namespace {

// Deterministic 5-term instance: f_i == mu_i, so g_i = |mu_i| exactly and the
// weighted estimator's noise comes from the index draw alone.
struct SyntheticSum {
  std::array<double, 5> mu{10.0, -5.0, 1.0, 0.5, 0.2};
  double truth() const {
    double s = 0.0;
    for (double m : mu) s += m;
    return s / mu.size();
  }
  double estimate(const IndexSampler& s, int draws, NoiseHandle& noise) const {
    double sum = 0.0;
    for (int n = 0; n < draws; ++n) {
      const std::size_t j = draw(s, noise);
      sum += mu[j] / s.probabilities[j];
    }
    return sum / (static_cast<double>(draws) * mu.size());
  }
};

IndexSampler sampler_from_p(const std::vector<double>& p) {
  IndexSampler s;
  s.probabilities = p;
  s.cumulative.resize(p.size());
  double c = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    c += p[i];
    s.cumulative[i] = c;
  }
  s.cumulative.back() = 1.0;
  s.work_model.assign(p.size(), 1.0);
  return s;
}

}  // namespace

TEST_CASE("weighted estimator is unbiased for every probability vector") {
  const SyntheticSum instance;
  std::vector<double> gt(5), w1(5, 1.0);
  for (int i = 0; i < 5; ++i) gt[i] = std::abs(instance.mu[i]);
  const auto uniform = sampler_from_p({0.2, 0.2, 0.2, 0.2, 0.2});
  const auto optimal = optimal_probabilities(gt, w1);
  const auto adversarial = sampler_from_p({0.05, 0.05, 0.05, 0.05, 0.8});

  NoiseHandle root(31);
  int which = 0;
  for (const auto* s : {&uniform, &optimal, &adversarial}) {
    const int reps = 100'000, draws = 8;
    double sum = 0.0, sum2 = 0.0;
    NoiseHandle noise = root.derive(which++);
    for (int rep = 0; rep < reps; ++rep) {
      const double est = instance.estimate(*s, draws, noise);
      sum += est;
      sum2 += est * est;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum2 / reps - mean * mean) / reps);
    CHECK(std::abs(mean - instance.truth()) <= 3.0 * se);
  }
}

TEST_CASE("optimal probabilities give the smallest empirical MSE (unit work)") {
  const SyntheticSum instance;  // g spread of 50x
  std::vector<double> gt(5), w1(5, 1.0);
  for (int i = 0; i < 5; ++i) gt[i] = std::abs(instance.mu[i]);
  const auto optimal = optimal_probabilities(gt, w1);
  const auto uniform = sampler_from_p({0.2, 0.2, 0.2, 0.2, 0.2});
  const auto pert_a = sampler_from_p({0.4, 0.1, 0.3, 0.1, 0.1});
  const auto pert_b = sampler_from_p({0.25, 0.45, 0.1, 0.1, 0.1});

  NoiseHandle root(37);
  auto mse_of = [&](const IndexSampler& s, std::uint64_t salt) {
    const int reps = 100'000, draws = 4;
    NoiseHandle noise = root.derive(salt);
    double acc = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
      const double err = instance.estimate(s, draws, noise) - instance.truth();
      acc += err * err;
    }
    return acc / reps;
  };
  const double mse_opt = mse_of(optimal, 0);
  CHECK(mse_opt < mse_of(uniform, 1));
  CHECK(mse_opt < mse_of(pert_a, 2));
  CHECK(mse_opt < mse_of(pert_b, 3));
}

TEST_CASE("with heterogeneous work the MSE-work product is minimized") {
  const SyntheticSum instance;
  const std::array<double, 5> work{1.0, 4.0, 9.0, 1.0, 16.0};
  std::vector<double> gt(5), w(work.begin(), work.end());
  for (int i = 0; i < 5; ++i) gt[i] = std::abs(instance.mu[i]);
  const auto optimal = optimal_probabilities(gt, w);
  const auto uniform = sampler_from_p({0.2, 0.2, 0.2, 0.2, 0.2});
  const auto pert = sampler_from_p({0.1, 0.2, 0.3, 0.2, 0.2});

  // Deterministic terms: MSE and expected work per draw are both closed-form.
  auto mse_work = [&](const IndexSampler& s) {
    double mse = 0.0, ew = 0.0;
    for (int i = 0; i < 5; ++i) {
      mse += instance.mu[i] * instance.mu[i] / s.probabilities[i];
      ew += s.probabilities[i] * work[i];
    }
    const double total = instance.truth() * 5.0;
    return (mse - total * total) / 25.0 * ew;
  };
  CHECK(mse_work(optimal) < mse_work(uniform));
  CHECK(mse_work(optimal) < mse_work(pert));
}
