#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nestrisk/market_model.hpp"
#include "nestrisk/pricing.hpp"

namespace nestrisk {

enum class ComputationModel { ExactEval, ExactSim, ApproxSim };

const char* to_string(ComputationModel model);
ComputationModel computation_model_from_string(const std::string& s);

struct PortfolioEntry {
  VanillaOption option;
  double weight;           // w_i (signed)
  double importance;       // g~_i > 0
  ComputationModel comp_model;
};

struct Portfolio {
  std::vector<PortfolioEntry> entries;
  std::vector<double> delta0;  // (1/P) sum_i w_i * analytic delta, per asset
  double threshold;            // K_eta

  std::size_t size() const { return entries.size(); }
};

struct GenConfig {
  std::size_t count = 1000;                      // P
  double weight_log_sd = 3.0;                    // sd of log(w~_i)
  std::array<double, 3> model_mix{0.3, 0.7, 0.0};  // ExactEval, ExactSim, ApproxSim
  double maturity_min = 0.1;
  double maturity_max = 5.0;
  double strike_min = 80.0;
  double strike_max = 120.0;
  double threshold = 0.25;
  std::uint64_t seed = 1;

  void validate(const MarketModel& model) const;  // throws ConfigError
};

/// Generates the randomized portfolio: per-asset put/call coverage, log-normal
/// raw weights, per-asset delta-neutral balancing of the call weights,
/// normalization of the weights to average 1, importances g~_i = |w_i|.
/// Throws GenerationFailure on a degenerate balancing denominator (caller
/// retries with a new seed).
Portfolio generate(const GenConfig& config, const MarketModel& model);

/// generate() with up to `attempts` seed bumps on GenerationFailure.
Portfolio generate_with_retry(GenConfig config, const MarketModel& model,
                              int attempts = 8);

/// K^_eta = K_eta + (R_tau - R_0) . delta0.  Delta-neutral portfolios get
/// K_eta back unchanged for every scenario.
double adjusted_threshold(const Portfolio& portfolio, const RiskScenario& scenario,
                          std::span<const double> r0);

/// Level-0 variant: K^^_eta = K_eta + (1/2) (R_tau - R_0) . estimate, with
/// `estimate` the per-asset portfolio average of the level-0 pathwise-delta
/// pair sums E[D_{i,0}].
double level0_adjusted_threshold(const Portfolio& portfolio,
                                 const RiskScenario& scenario,
                                 std::span<const double> r0,
                                 std::span<const double> level0_delta_estimate);

/// Recomputes the per-asset analytic portfolio delta from current weights.
std::vector<double> portfolio_delta0(const Portfolio& portfolio,
                                     const MarketModel& model);

// One option per line: kind asset maturity strike weight importance model.
// Doubles round-trip exactly (%.17g).
void save_manifest(const Portfolio& portfolio, std::ostream& out);
void save_manifest(const Portfolio& portfolio, const std::string& path);
Portfolio load_manifest(std::istream& in, const MarketModel& model, double threshold);
Portfolio load_manifest(const std::string& path, const MarketModel& model,
                        double threshold);

}  // namespace nestrisk
