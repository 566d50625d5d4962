#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nestrisk/mlmc.hpp"

namespace nestrisk {

enum class MethodVariant { Full, NoSubsampling, NoCv, NonAdaptive, FullApprox };

const char* to_string(MethodVariant v);
MethodVariant method_variant_from_string(const std::string& s);

struct ExperimentConfig {
  MarketModel market;
  GenConfig gen;
  std::string manifest;  // when set, the portfolio is loaded instead of generated

  std::vector<MethodVariant> variants;
  std::vector<double> tolerances;  // relative to eta_ref, strictly decreasing
  double eta_ref = 0.0;

  AdaptiveConfig adaptive;  // r == 0 means pick 1.5 / 1.1 per portfolio content
  std::uint64_t m0 = 1024;
  int pilot_levels = 4;
  int max_level = 14;
  double zeta = 1.5;
  std::uint64_t level0_pilot = 4096;

  std::uint64_t seed = 0;
  unsigned jobs = 0;
  std::string out_path;
  bool timing = false;  // write real wall seconds into the CSV

  void validate() const;
};

/// Flat key = value file with [section] headers; unknown keys rejected.
/// All the defaults of the reference experiment setup are baked in, so an
/// empty file is a valid config.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(std::istream& in, const std::string& origin);

struct RunRecord {
  MethodVariant variant;
  double tol_rel = 0.0;
  double eta = 0.0;
  std::uint64_t total_work = 0;
  double wall_seconds = 0.0;
  bool out_of_range = false;
  bool unreachable = false;
  std::vector<LevelStats> levels;
};

/// Builds the per-variant estimator wiring (sub-sampling, control variates,
/// adaptive mode) and runs every (variant, tolerance) pair.  When
/// config.out_path is set, the summary CSV and the per-level appendix CSV
/// (<out>_levels.csv) are written incrementally.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config);

/// Per-level CSV for one result: header
/// level,var_delta,var_fine,mean_inner_n,work,m
void emit_level_table(const MlmcResult& result, const std::string& path);

/// The portfolio a variant runs on (FullApprox reassigns computation models
/// with the 30/50/20 mix, keeping weights).
Portfolio variant_portfolio(const ExperimentConfig& config, MethodVariant variant);

/// The loss-model wiring and adaptive configuration of one variant.
LossModel variant_loss_model(const ExperimentConfig& config, MethodVariant variant,
                             const Portfolio& portfolio);
AdaptiveConfig variant_adaptive(const ExperimentConfig& config, MethodVariant variant,
                                const Portfolio& portfolio);

std::string levels_path_for(const std::string& out_path);

}  // namespace nestrisk
