#pragma once

#include <cstddef>

namespace nestrisk {

enum class OptionKind { Put, Call };

struct VanillaOption {
  OptionKind kind;
  double strike;           // K_i > 0
  double maturity;         // T_i > 0, years
  std::size_t asset_index; // k_i
};

/// Value and spot sensitivity, both discounted to time 0 (value carries a
/// factor exp(-r * time_now) so values at different observation times are
/// directly comparable).
struct PriceAndDelta {
  double value;
  double delta;
};

/// Analytic Black-Scholes value/delta observed at `time_now`, discounted to
/// time 0.  Handles vol == 0 as the deterministic-forward limit.  Throws
/// ExpiredContract when time_now >= maturity.
PriceAndDelta bs_price_delta(const VanillaOption& option, double spot,
                             double time_now, double vol, double rate);

/// Discounted payoff exp(-r T) * max(+-(terminal - K), 0).
double payoff(const VanillaOption& option, double terminal_value, double rate);

/// Pathwise derivative of the discounted payoff w.r.t. the initial state:
/// h'(S(T)) * dS(T)/dS(0).  Ties S(T) == K evaluate to 0.
double pathwise_delta(const VanillaOption& option, double terminal_value,
                      double path_sensitivity, double rate);

}  // namespace nestrisk
