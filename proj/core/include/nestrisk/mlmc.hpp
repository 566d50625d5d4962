#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nestrisk/loss_estimators.hpp"

namespace nestrisk {

/// Parameters of the inner-sample-count algorithm.  With adaptive == false
/// the count is the deterministic N_l = n0 * 4^l.
struct AdaptiveConfig {
  std::uint64_t n0 = 32;
  double c = 3.0;
  double r = 1.5;  // in (1, 2)
  bool adaptive = true;

  void validate() const;
};

struct LevelStats {
  int level = 0;
  std::uint64_t m = 0;          // outer scenarios sampled
  double mean_delta = 0.0;      // mean of the level difference
  double var_delta = 0.0;       // V_l
  double mean_fine = 0.0;       // mean of H(E^_l)
  double var_fine = 0.0;        // V_l^f
  double mean_inner_n = 0.0;    // E[N_l] (fine count)
  std::uint64_t work = 0;       // charged evaluations, probes included
};

struct MlmcResult {
  double estimate = 0.0;
  double std_error = 0.0;  // sqrt(sum_l V_l / M_l) of the telescoped estimator
  int start_level = 0;
  int max_level = 0;
  std::vector<LevelStats> per_level;  // rows 0..max_level; rows below
                                      // start_level are pilot-only
  std::uint64_t total_work = 0;
  double wall_time = 0.0;
  bool out_of_range = false;  // raw telescoped sum left [0,1]
};

/// Raised when the level cap is hit before the bias target; carries whatever
/// was computed so sweep drivers can record a flagged row and move on.
struct ToleranceUnreachable : std::runtime_error {
  explicit ToleranceUnreachable(MlmcResult r)
      : std::runtime_error("tolerance unreachable within the level cap"),
        partial(std::move(r)) {}
  MlmcResult partial;
};

struct MlmcOptions {
  double tol_abs = 0.01;
  AdaptiveConfig adaptive;
  std::uint64_t m0 = 1024;  // pilot scenarios per level
  std::uint64_t m_open = 0; // scenarios when opening levels past the pilot
                            // (0 = m0/8; the allocation loop tops them up)
  int pilot_levels = 4;     // levels 0..pilot_levels probed for the start level
  int max_level = 14;
  unsigned jobs = 0;  // 0 = hardware concurrency
  std::uint64_t seed = 0;
};

struct InnerEstimate {
  double mean = 0.0;
  double sq_sum = 0.0;  // sum of squared draws
  std::uint64_t work = 0;
};

/// Monte Carlo estimate of E[X | Y] from n fresh draws (children k = 0..n-1 of
/// `noise`).  When `retained` is non-null the draws are stored for the
/// antithetic coarse regrouping.
InnerEstimate inner_estimate(const InnerVariable& var, std::uint64_t n,
                             NoiseHandle& noise,
                             std::vector<double>* retained = nullptr);

struct AdaptiveCount {
  std::uint64_t n_final = 0;
  std::uint64_t probe_work = 0;
};

/// Doubling algorithm for N_l: starts at n0 * 2^l and doubles until
///   N_l >= n0 4^l (C^-1 n0^(1/2) 2^l delta^)^(-r)
/// or the cap n0 * 4^l, re-estimating delta^ = |mean|/sd from a fresh probe
/// batch on every iteration.  Zero sample variance counts as delta^ = +inf.
/// Probe draws are used only for delta^; the estimator pool is drawn
/// afterwards so the indicator is not conditioned on the acceptance event.
AdaptiveCount adaptive_n(const InnerVariable& var, int level,
                         const AdaptiveConfig& cfg, NoiseHandle& noise);

struct DeltaSample {
  double delta = 0.0;           // antithetic level difference (or H at base)
  double fine_indicator = 0.0;  // H(E^_l) of the fine estimator
  std::uint64_t n_fine = 0;     // N_l
  std::uint64_t work = 0;
};

/// One outer sample of the antithetic difference
///   H(E^_l) - (1/s) sum_i H(E^_(l-1)^(i)),
/// with the s coarse groups partitioning the same retained draws; roles swap
/// when N_(l-1) > N_l.  At level == base_level it degenerates to H(E^_l).
DeltaSample antithetic_delta(const InnerVariable& var, int level, int base_level,
                             const AdaptiveConfig& cfg, NoiseHandle& noise);

/// Smallest l0 whose cost term beats every deeper start by the 1.5-relaxed
/// criterion; throws MissingPilot on empty stats.
int select_start_level(const std::vector<LevelStats>& pilot);

/// Full tolerance-driven estimator of eta = P(E[loss | scenario] > K).
/// Throws ToleranceUnreachable past the level cap.
MlmcResult run_mlmc(const LossModel& model, const MlmcOptions& opts);

struct BruteForceResult {
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t total_work = 0;
};

/// Plain nested Monte Carlo: m outer scenarios, n full-portfolio inner
/// evaluations each, Heaviside applied to the inner means.  No sub-sampling,
/// no control variates, raw threshold; deterministic exact-evaluation options
/// are computed once per scenario.
BruteForceResult nested_brute_force(const Portfolio& portfolio,
                                    const MarketModel& model, std::uint64_t m,
                                    std::uint64_t n, std::uint64_t seed,
                                    unsigned jobs = 0);

/// Fixed-m sweep over levels [first_level, last_level] (first level in base
/// form), for rate studies and level tables.
std::vector<LevelStats> level_sweep(const LossModel& model, int first_level,
                                    int last_level, std::uint64_t m,
                                    const AdaptiveConfig& cfg, std::uint64_t seed,
                                    unsigned jobs = 0);

}  // namespace nestrisk
