#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nestrisk/market_model.hpp"
#include "nestrisk/portfolio.hpp"
#include "nestrisk/subsampling.hpp"

namespace nestrisk {

/// One inner sample of a per-option term, with the evaluations it charged.
struct TermSample {
  double value;
  std::uint64_t work;
};

/// Randomized approximation level l with P(l = j) = 4^(-zeta j) / C_zeta.
struct LevelDistribution {
  double zeta = 1.5;
  double normalizer = 0.0;  // C_zeta = 1 / (1 - 4^-zeta)
  double beta = 2.0;        // variance decay rate, base 4
  double gamma = 1.0;       // cost growth rate, base 4

  static LevelDistribution make(double zeta, double beta = 2.0,
                                double gamma = 1.0);

  double prob(int level) const;
  double level_weight(int level) const;  // C_zeta * 4^(zeta l)
  /// Charged evaluations of a level-l draw: 4^l fine plus 4^(l-1) coarse steps.
  static std::uint64_t level_cost(int level);
  /// Closed form of sum_j P(l=j) * level_cost(j); finite for zeta > gamma.
  double expected_cost() const;
};

int sample_level(const LevelDistribution& dist, NoiseHandle& noise);

enum class DeltaCvMode { AllLevels, Level0Only, Off };

struct CvConfig {
  bool delta_cv = true;
  bool antithetic = true;
  bool shared_tail = true;  // condition all legs on one (tau, T] path
  DeltaCvMode approx_delta_mode = DeltaCvMode::Level0Only;
};

/// f_i for an exact-evaluation option: deterministic given the scenario,
/// V_{i,0} - V_{i,tau} minus (with the delta CV on) (R_0 - R_tau) . grad V_{i,0}.
/// Work = 1.
TermSample exact_eval_term(const PortfolioEntry& entry, const RiskScenario& scenario,
                           const MarketModel& model, const CvConfig& cv = {});

/// f_i for an exact-simulation option: antithetic bridge legs with the delta
/// control variate,
///   1/2 (h(S+) + h(S-)) - h(S_cond) - 1/2 (R_0 - R_tau) (dh(S+) + dh(S-)),
/// degraded per the CvConfig toggles.  Work = 3 payoff evaluations.
TermSample exact_sim_term(const PortfolioEntry& entry, const RiskScenario& scenario,
                          const MarketModel& model, const CvConfig& cv,
                          NoiseHandle& noise);

/// One coupled Milstein correction delta-Lambda_{i,l} at a fixed level
/// (weighted by w_i, without the randomized-level weighting).  Level 0 is the
/// coarsest loss itself.  Work = 4^l + 4^(l-1).
TermSample approx_sim_correction(const PortfolioEntry& entry,
                                 const RiskScenario& scenario,
                                 const MarketModel& model, const CvConfig& cv,
                                 int level, NoiseHandle& noise);

/// f_i for an approximate-simulation option: randomized-level Milstein
/// correction C_zeta 4^(zeta l) * delta-Lambda_{i,l}, with the fine and coarse
/// legs coupled through shared increments.  Work = 4^l + 4^(l-1).
TermSample approx_sim_term(const PortfolioEntry& entry, const RiskScenario& scenario,
                           const MarketModel& model, const LevelDistribution& dist,
                           const CvConfig& cv, NoiseHandle& noise);

/// Scenario-independent estimate of (1/2) E[D_{i,0}] for one ApproxSim option
/// (unweighted), used to build the level-0 threshold adjustment offline.
double estimate_level0_delta(const PortfolioEntry& entry, const MarketModel& model,
                             std::uint64_t samples, NoiseHandle& noise);

/// Scenario-independent wiring of the inner variable X: portfolio, market,
/// optional sub-sampler, CV configuration and the per-asset threshold
/// adjustment vector implied by them.
class LossModel {
 public:
  LossModel(const Portfolio& portfolio, const MarketModel& model, CvConfig cv,
            LevelDistribution dist, bool subsample,
            std::uint64_t pilot_seed = 0x6c657630ULL,
            std::uint64_t level0_pilot_samples = 4096);

  const Portfolio& portfolio() const { return *portfolio_; }
  const MarketModel& market() const { return *model_; }
  const CvConfig& cv() const { return cv_; }
  const LevelDistribution& level_dist() const { return dist_; }
  bool subsampled() const { return sampler_.has_value(); }
  const IndexSampler& sampler() const { return *sampler_; }

  /// K adjusted for this scenario: K + (R_tau - R_0) . adjustment.
  double threshold(const RiskScenario& scenario) const;
  const std::vector<double>& threshold_adjustment() const { return adjustment_; }

  /// One sample of the per-option term f_i (weighted).
  TermSample term(std::size_t index, const RiskScenario& scenario,
                  NoiseHandle& noise) const;

 private:
  const Portfolio* portfolio_;
  const MarketModel* model_;
  CvConfig cv_;
  LevelDistribution dist_;
  std::optional<IndexSampler> sampler_;
  std::vector<double> adjustment_;  // per asset
  std::vector<double> r0_;
};

/// Per-scenario view of X = f_j / (P p_j) - K^_eta.  In the no-subsampling
/// mode every draw evaluates the whole portfolio, with the deterministic
/// exact-evaluation terms computed once at construction (their work is
/// reported via setup_work()).
class InnerVariable {
 public:
  InnerVariable(const LossModel& model, RiskScenario scenario);

  const RiskScenario& scenario() const { return scenario_; }
  double threshold() const { return threshold_; }
  std::uint64_t setup_work() const { return setup_work_; }

  TermSample draw(NoiseHandle& noise) const;

 private:
  const LossModel* model_;
  RiskScenario scenario_;
  double threshold_;
  double cached_exact_sum_ = 0.0;  // sum of deterministic terms, no-subsampling
  std::uint64_t setup_work_ = 0;
};

}  // namespace nestrisk
