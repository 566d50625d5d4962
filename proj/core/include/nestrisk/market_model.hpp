#pragma once

#include <cstddef>
#include <vector>

#include "nestrisk/rng.hpp"

namespace nestrisk {

struct AssetParams {
  double initial_price;  // S_k(0)
  double drift;          // mu_k, physical measure, per year
  double volatility;     // sigma_k, per sqrt(year)
};

/// Correlated GBM asset universe.  Each Brownian driver decomposes into a
/// systemic part shared by all assets plus an idiosyncratic part:
///   B_k(t) = rho * B_sys(t) + sqrt(1 - rho^2) * B_k_ind(t).
struct MarketModel {
  std::vector<AssetParams> assets;
  double correlation = 0.2;     // rho in (0,1)
  double risk_free_rate = 0.05; // r, per year
  double risk_horizon = 0.02;   // tau, years

  std::size_t asset_count() const { return assets.size(); }
  void validate() const;  // throws std::invalid_argument
};

/// Asset values S(tau) under the physical measure.
struct RiskScenario {
  std::vector<double> asset_values;
};

enum class Measure { Physical, RiskNeutral };

/// One physical-measure scenario; draws 1 systemic + Q idiosyncratic normals.
RiskScenario sample_risk_scenario(const MarketModel& model, NoiseHandle& noise);

/// Closed-form GBM terminal value over `horizon` starting at `start_value`.
/// Consumes one normal (none when horizon == 0).
double exact_terminal(const MarketModel& model, std::size_t asset_index,
                      double start_value, double horizon, Measure measure,
                      NoiseHandle& noise);

struct BridgePair {
  double s_plus;       // terminal of the +B[0,tau] leg started at S_k(0)
  double s_minus;      // terminal of the -B[0,tau] leg started at S_k(0)
  double s_cond;       // terminal of the leg started at scenario_value at tau
  double delta_plus;   // dS+(T)/dS(0)
  double delta_minus;  // dS-(T)/dS(0)
};

/// Antithetic pair plus scenario-conditioned leg, all risk-neutral and all
/// sharing the same (tau, T] Brownian increments.  The minus leg re-uses the
/// exact negation of the plus leg's [0, tau] increments via the flipped view.
/// Throws InvalidContract when maturity <= tau.
BridgePair antithetic_bridge_pair(const MarketModel& model,
                                  std::size_t asset_index,
                                  double scenario_value,
                                  NoiseHandle& scenario_noise,
                                  NoiseHandle& tail_noise, double maturity);

struct MilsteinPair {
  double fine;
  double coarse;     // meaningful only when has_coarse
  bool has_coarse;   // false at level 0
};

/// Coupled Milstein terminal values: 4^level fine steps, 4^(level-1) coarse
/// steps built from the summed fine increments.  Risk-neutral drift.
/// Consumes exactly 4^level normals, so replaying the same handle couples
/// several legs to identical increments.
MilsteinPair milstein_terminal_pair(const MarketModel& model,
                                    std::size_t asset_index, double start_value,
                                    double maturity, int level,
                                    NoiseHandle& noise);

}  // namespace nestrisk
