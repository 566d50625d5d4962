#include "nestrisk/market_model.hpp"

#include <cmath>
#include <stdexcept>

#include "nestrisk/errors.hpp"

namespace nestrisk {

void MarketModel::validate() const {
  if (assets.empty()) throw std::invalid_argument("market model needs at least one asset");
  if (!(correlation > 0.0 && correlation < 1.0))
    throw std::invalid_argument("correlation must be in (0,1)");
  if (!(risk_horizon > 0.0)) throw std::invalid_argument("risk horizon must be positive");
  for (const auto& a : assets) {
    if (!(a.initial_price > 0.0))
      throw std::invalid_argument("initial asset price must be positive");
    if (a.volatility < 0.0) throw std::invalid_argument("volatility must be nonnegative");
  }
}

namespace {

double gbm_step(double start, double drift, double sigma, double t, double b_t) {
  return start * std::exp((drift - 0.5 * sigma * sigma) * t + sigma * b_t);
}

}  // namespace

RiskScenario sample_risk_scenario(const MarketModel& model, NoiseHandle& noise) {
  const double tau = model.risk_horizon;
  const double stau = std::sqrt(tau);
  const double rho = model.correlation;
  const double s1_rho2 = std::sqrt(1.0 - rho * rho);

  const double z_sys = noise.normal();
  RiskScenario scenario;
  scenario.asset_values.resize(model.asset_count());
  for (std::size_t k = 0; k < model.asset_count(); ++k) {
    const double b_tau = stau * (rho * z_sys + s1_rho2 * noise.normal());
    const auto& a = model.assets[k];
    scenario.asset_values[k] = gbm_step(a.initial_price, a.drift, a.volatility, tau, b_tau);
  }
  return scenario;
}

double exact_terminal(const MarketModel& model, std::size_t asset_index,
                      double start_value, double horizon, Measure measure,
                      NoiseHandle& noise) {
  if (horizon == 0.0) return start_value;
  const auto& a = model.assets[asset_index];
  const double drift = measure == Measure::Physical ? a.drift : model.risk_free_rate;
  const double b = std::sqrt(horizon) * noise.normal();
  return gbm_step(start_value, drift, a.volatility, horizon, b);
}

BridgePair antithetic_bridge_pair(const MarketModel& model,
                                  std::size_t asset_index, double scenario_value,
                                  NoiseHandle& scenario_noise,
                                  NoiseHandle& tail_noise, double maturity) {
  const double tau = model.risk_horizon;
  if (!(maturity > tau)) throw InvalidContract("option matures before the risk horizon");

  const auto& a = model.assets[asset_index];
  const double r = model.risk_free_rate;
  const double s0 = a.initial_price;

  NoiseHandle minus_view = scenario_noise.flipped();
  const double s_plus_tau =
      exact_terminal(model, asset_index, s0, tau, Measure::RiskNeutral, scenario_noise);
  const double s_minus_tau =
      exact_terminal(model, asset_index, s0, tau, Measure::RiskNeutral, minus_view);

  // One shared (tau, T] increment for all three legs.
  const double b_tail = std::sqrt(maturity - tau) * tail_noise.normal();
  const double tail_horizon = maturity - tau;
  const double s_plus = gbm_step(s_plus_tau, r, a.volatility, tail_horizon, b_tail);
  const double s_minus = gbm_step(s_minus_tau, r, a.volatility, tail_horizon, b_tail);
  const double s_cond = gbm_step(scenario_value, r, a.volatility, tail_horizon, b_tail);

  // GBM terminal values are linear in the initial state.
  return BridgePair{s_plus, s_minus, s_cond, s_plus / s0, s_minus / s0};
}

MilsteinPair milstein_terminal_pair(const MarketModel& model,
                                    std::size_t asset_index, double start_value,
                                    double maturity, int level,
                                    NoiseHandle& noise) {
  const auto& a = model.assets[asset_index];
  const double r = model.risk_free_rate;
  const double sigma = a.volatility;

  std::uint64_t n_fine = 1;
  for (int i = 0; i < level; ++i) n_fine *= 4;
  const double dt = maturity / static_cast<double>(n_fine);
  const double sqrt_dt = std::sqrt(dt);
  const double dt_c = 4.0 * dt;

  double fine = start_value;
  double coarse = start_value;
  double db_c = 0.0;
  for (std::uint64_t n = 0; n < n_fine; ++n) {
    const double db = sqrt_dt * noise.normal();
    fine += fine * (r * dt + sigma * db + 0.5 * sigma * sigma * (db * db - dt));
    if (level > 0) {
      db_c += db;
      if ((n + 1) % 4 == 0) {
        coarse += coarse *
                  (r * dt_c + sigma * db_c + 0.5 * sigma * sigma * (db_c * db_c - dt_c));
        db_c = 0.0;
      }
    }
  }
  return MilsteinPair{fine, coarse, level > 0};
}

}  // namespace nestrisk
