#include "nestrisk/pricing.hpp"

#include <algorithm>
#include <cmath>

#include "nestrisk/errors.hpp"
#include "nestrisk/rng.hpp"

namespace nestrisk {

PriceAndDelta bs_price_delta(const VanillaOption& option, double spot,
                             double time_now, double vol, double rate) {
  if (!(time_now < option.maturity)) throw ExpiredContract("option already expired");

  const double ttm = option.maturity - time_now;
  const double k = option.strike;
  const double disc_now = std::exp(-rate * time_now);
  const double disc_k = k * std::exp(-rate * ttm);

  if (vol <= 0.0) {
    // Deterministic forward: intrinsic value on the discounted strike.
    if (option.kind == OptionKind::Call) {
      const double v = std::max(spot - disc_k, 0.0);
      return {disc_now * v, spot > disc_k ? disc_now : 0.0};
    }
    const double v = std::max(disc_k - spot, 0.0);
    return {disc_now * v, spot < disc_k ? -disc_now : 0.0};
  }

  const double sst = vol * std::sqrt(ttm);
  const double d1 = (std::log(spot / k) + (rate + 0.5 * vol * vol) * ttm) / sst;
  const double d2 = d1 - sst;

  if (option.kind == OptionKind::Call) {
    const double v = spot * norm_cdf(d1) - disc_k * norm_cdf(d2);
    return {disc_now * v, disc_now * norm_cdf(d1)};
  }
  const double v = disc_k * norm_cdf(-d2) - spot * norm_cdf(-d1);
  return {disc_now * v, disc_now * (norm_cdf(d1) - 1.0)};
}

double payoff(const VanillaOption& option, double terminal_value, double rate) {
  const double disc = std::exp(-rate * option.maturity);
  const double intrinsic = option.kind == OptionKind::Call
                               ? terminal_value - option.strike
                               : option.strike - terminal_value;
  return disc * std::max(intrinsic, 0.0);
}

double pathwise_delta(const VanillaOption& option, double terminal_value,
                      double path_sensitivity, double rate) {
  const double disc = std::exp(-rate * option.maturity);
  if (option.kind == OptionKind::Call)
    return terminal_value > option.strike ? disc * path_sensitivity : 0.0;
  return terminal_value < option.strike ? -disc * path_sensitivity : 0.0;
}

}  // namespace nestrisk
