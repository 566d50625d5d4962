#include "nestrisk/loss_estimators.hpp"

#include <cmath>
#include <stdexcept>

#include "nestrisk/errors.hpp"

namespace nestrisk {

namespace {

constexpr std::uint64_t kTailStream = 0x7461696cULL;      // shared (tau,T] path
constexpr std::uint64_t kCondTailStream = 0x74326e64ULL;  // unshared contrast mode

double pow4(double x) { return std::exp2(2.0 * x); }

}  // namespace

LevelDistribution LevelDistribution::make(double zeta, double beta, double gamma) {
  if (!(gamma < zeta && zeta < beta))
    throw std::invalid_argument("level distribution requires gamma < zeta < beta");
  LevelDistribution d;
  d.zeta = zeta;
  d.beta = beta;
  d.gamma = gamma;
  d.normalizer = 1.0 / (1.0 - std::pow(4.0, -zeta));
  return d;
}

double LevelDistribution::prob(int level) const {
  if (level < 0) return 0.0;
  return std::pow(4.0, -zeta * level) / normalizer;
}

double LevelDistribution::level_weight(int level) const {
  return normalizer * pow4(zeta * level);
}

std::uint64_t LevelDistribution::level_cost(int level) {
  std::uint64_t fine = 1;
  for (int i = 0; i < level; ++i) fine *= 4;
  return level > 0 ? fine + fine / 4 : fine;
}

double LevelDistribution::expected_cost() const {
  // sum_j q^j (1-q) (4^j + 4^(j-1) [j>0]) with q = 4^-zeta.
  const double q = std::pow(4.0, -zeta);
  return (1.0 - q * q) / (1.0 - 4.0 * q);
}

int sample_level(const LevelDistribution& dist, NoiseHandle& noise) {
  const double u = noise.uniform();
  return static_cast<int>(std::floor(std::log(u) / (-dist.zeta * std::log(4.0))));
}

TermSample exact_eval_term(const PortfolioEntry& entry, const RiskScenario& scenario,
                           const MarketModel& model, const CvConfig& cv) {
  const auto& asset = model.assets[entry.option.asset_index];
  const double r = model.risk_free_rate;
  const double r_tau = scenario.asset_values[entry.option.asset_index];

  const auto at0 = bs_price_delta(entry.option, asset.initial_price, 0.0,
                                  asset.volatility, r);
  const auto at_tau =
      bs_price_delta(entry.option, r_tau, model.risk_horizon, asset.volatility, r);

  double f = at0.value - at_tau.value;
  if (cv.delta_cv) f += (r_tau - asset.initial_price) * at0.delta;
  return {entry.weight * f, 1};
}

TermSample exact_sim_term(const PortfolioEntry& entry, const RiskScenario& scenario,
                          const MarketModel& model, const CvConfig& cv,
                          NoiseHandle& noise) {
  const std::size_t k = entry.option.asset_index;
  const auto& asset = model.assets[k];
  const double r = model.risk_free_rate;
  const double r0 = asset.initial_price;
  const double r_tau = scenario.asset_values[k];
  const double maturity = entry.option.maturity;
  const double tau = model.risk_horizon;
  if (!(maturity > tau)) throw InvalidContract("option matures before the risk horizon");

  // Fresh risk-neutral [0, tau] noise for this sample.
  const double z0 = noise.normal();
  const double b0 = std::sqrt(tau) * z0;
  auto over_scenario_horizon = [&](double start, double b_tau) {
    return start *
           std::exp((r - 0.5 * asset.volatility * asset.volatility) * tau +
                    asset.volatility * b_tau);
  };
  const double s_plus_tau = over_scenario_horizon(r0, b0);
  const double s_minus_tau = over_scenario_horizon(r0, -b0);

  const double tail_horizon = maturity - tau;
  auto tail_step = [&](double start, double b) {
    return start *
           std::exp((r - 0.5 * asset.volatility * asset.volatility) * tail_horizon +
                    asset.volatility * b);
  };
  const double b_tail = std::sqrt(tail_horizon) * noise.normal();
  const double s_plus = tail_step(s_plus_tau, b_tail);
  const double s_minus = tail_step(s_minus_tau, b_tail);
  const double b_tail_cond =
      cv.shared_tail ? b_tail : std::sqrt(tail_horizon) * noise.normal();
  const double s_cond = tail_step(r_tau, b_tail_cond);

  const double h_plus = payoff(entry.option, s_plus, r);
  const double h_cond = payoff(entry.option, s_cond, r);
  std::uint64_t work = 2;

  double value;
  double cv_term = 0.0;
  if (cv.antithetic) {
    const double h_minus = payoff(entry.option, s_minus, r);
    ++work;
    value = 0.5 * (h_plus + h_minus) - h_cond;
    if (cv.delta_cv) {
      const double d_plus = pathwise_delta(entry.option, s_plus, s_plus / r0, r);
      const double d_minus = pathwise_delta(entry.option, s_minus, s_minus / r0, r);
      cv_term = 0.5 * (r_tau - r0) * (d_plus + d_minus);
    }
  } else {
    value = h_plus - h_cond;
    if (cv.delta_cv)
      cv_term = (r_tau - r0) * pathwise_delta(entry.option, s_plus, s_plus / r0, r);
  }
  return {entry.weight * (value + cv_term), work};
}

namespace {

struct ApproxLeg {
  double fine;
  double coarse;
};

// Payoff difference and (optionally) the delta pair sum, at one resolution.
struct LevelExpr {
  double lambda;
  double delta_pair;
};

LevelExpr approx_level_expr(const PortfolioEntry& entry, double r0, double rate,
                            const ApproxLeg& plus, const ApproxLeg& minus,
                            const ApproxLeg& cond, bool fine, bool antithetic,
                            bool with_delta) {
  const double sp = fine ? plus.fine : plus.coarse;
  const double sc = fine ? cond.fine : cond.coarse;
  LevelExpr e{0.0, 0.0};
  if (antithetic) {
    const double sm = fine ? minus.fine : minus.coarse;
    e.lambda = 0.5 * (payoff(entry.option, sp, rate) + payoff(entry.option, sm, rate)) -
               payoff(entry.option, sc, rate);
    if (with_delta)
      e.delta_pair = 0.5 * (pathwise_delta(entry.option, sp, sp / r0, rate) +
                            pathwise_delta(entry.option, sm, sm / r0, rate));
  } else {
    e.lambda = payoff(entry.option, sp, rate) - payoff(entry.option, sc, rate);
    if (with_delta) e.delta_pair = pathwise_delta(entry.option, sp, sp / r0, rate);
  }
  return e;
}

}  // namespace

TermSample approx_sim_correction(const PortfolioEntry& entry,
                                 const RiskScenario& scenario,
                                 const MarketModel& model, const CvConfig& cv,
                                 int level, NoiseHandle& noise) {
  const std::size_t k = entry.option.asset_index;
  const auto& asset = model.assets[k];
  const double r = model.risk_free_rate;
  const double r0 = asset.initial_price;
  const double r_tau = scenario.asset_values[k];
  const double tau = model.risk_horizon;
  const double maturity = entry.option.maturity;
  if (!(maturity > tau)) throw InvalidContract("option matures before the risk horizon");

  // Exact GBM over [0, tau]; the Milstein scheme only covers (tau, T].
  const double z0 = noise.normal();
  const double drift_tau = (r - 0.5 * asset.volatility * asset.volatility) * tau;
  const double s_plus_tau =
      r0 * std::exp(drift_tau + asset.volatility * std::sqrt(tau) * z0);
  const double s_minus_tau =
      r0 * std::exp(drift_tau - asset.volatility * std::sqrt(tau) * z0);

  const NoiseHandle tail = noise.derive(kTailStream);
  const double tail_horizon = maturity - tau;
  auto run_leg = [&](double start, const NoiseHandle& stream) {
    NoiseHandle h = stream;
    const auto pair = milstein_terminal_pair(model, k, start, tail_horizon, level, h);
    return ApproxLeg{pair.fine, pair.coarse};
  };

  const ApproxLeg plus = run_leg(s_plus_tau, tail);
  const ApproxLeg minus =
      cv.antithetic ? run_leg(s_minus_tau, tail) : ApproxLeg{0.0, 0.0};
  const ApproxLeg cond =
      run_leg(r_tau, cv.shared_tail ? tail : noise.derive(kCondTailStream));

  const bool delta_fine =
      cv.delta_cv && (cv.approx_delta_mode == DeltaCvMode::AllLevels ||
                      (cv.approx_delta_mode == DeltaCvMode::Level0Only && level == 0));
  const bool delta_coarse = cv.delta_cv && cv.approx_delta_mode == DeltaCvMode::AllLevels;

  const auto fine_expr = approx_level_expr(entry, r0, r, plus, minus, cond,
                                           /*fine=*/true, cv.antithetic, delta_fine);
  double correction = fine_expr.lambda + (r_tau - r0) * fine_expr.delta_pair;
  if (level > 0) {
    const auto coarse_expr =
        approx_level_expr(entry, r0, r, plus, minus, cond,
                          /*fine=*/false, cv.antithetic, delta_coarse);
    correction -= coarse_expr.lambda + (r_tau - r0) * coarse_expr.delta_pair;
  }
  return {entry.weight * correction, LevelDistribution::level_cost(level)};
}

TermSample approx_sim_term(const PortfolioEntry& entry, const RiskScenario& scenario,
                           const MarketModel& model, const LevelDistribution& dist,
                           const CvConfig& cv, NoiseHandle& noise) {
  const int level = sample_level(dist, noise);
  TermSample t = approx_sim_correction(entry, scenario, model, cv, level, noise);
  t.value *= dist.level_weight(level);
  return t;
}

double estimate_level0_delta(const PortfolioEntry& entry, const MarketModel& model,
                             std::uint64_t samples, NoiseHandle& noise) {
  const std::size_t k = entry.option.asset_index;
  const auto& asset = model.assets[k];
  const double r = model.risk_free_rate;
  const double r0 = asset.initial_price;
  const double tau = model.risk_horizon;
  const double tail_horizon = entry.option.maturity - tau;
  if (!(tail_horizon > 0.0))
    throw InvalidContract("option matures before the risk horizon");

  double sum = 0.0;
  for (std::uint64_t n = 0; n < samples; ++n) {
    NoiseHandle h = noise.derive(n);
    const double z0 = h.normal();
    const double drift_tau = (r - 0.5 * asset.volatility * asset.volatility) * tau;
    const double sp_tau = r0 * std::exp(drift_tau + asset.volatility * std::sqrt(tau) * z0);
    const double sm_tau = r0 * std::exp(drift_tau - asset.volatility * std::sqrt(tau) * z0);
    NoiseHandle tail = h.derive(kTailStream);
    NoiseHandle tail_copy = tail;
    const double sp = milstein_terminal_pair(model, k, sp_tau, tail_horizon, 0, tail).fine;
    const double sm =
        milstein_terminal_pair(model, k, sm_tau, tail_horizon, 0, tail_copy).fine;
    sum += pathwise_delta(entry.option, sp, sp / r0, r) +
           pathwise_delta(entry.option, sm, sm / r0, r);
  }
  return 0.5 * sum / static_cast<double>(samples);
}

LossModel::LossModel(const Portfolio& portfolio, const MarketModel& model,
                     CvConfig cv, LevelDistribution dist, bool subsample,
                     std::uint64_t pilot_seed, std::uint64_t level0_pilot_samples)
    : portfolio_(&portfolio), model_(&model), cv_(cv), dist_(dist) {
  const std::size_t p = portfolio.size();
  r0_.resize(model.asset_count());
  for (std::size_t k = 0; k < model.asset_count(); ++k)
    r0_[k] = model.assets[k].initial_price;

  if (subsample) {
    std::vector<double> importance(p), work(p);
    for (std::size_t i = 0; i < p; ++i) {
      importance[i] = portfolio.entries[i].importance;
      switch (portfolio.entries[i].comp_model) {
        case ComputationModel::ExactEval: work[i] = 1.0; break;
        case ComputationModel::ExactSim: work[i] = 3.0; break;
        case ComputationModel::ApproxSim: work[i] = dist_.expected_cost(); break;
      }
    }
    sampler_ = optimal_probabilities(importance, work);
  }

  adjustment_.assign(model.asset_count(), 0.0);
  if (cv_.delta_cv) {
    NoiseHandle pilot_root(pilot_seed);
    for (std::size_t i = 0; i < p; ++i) {
      const auto& e = portfolio.entries[i];
      double per_option;
      if (e.comp_model == ComputationModel::ApproxSim &&
          cv_.approx_delta_mode == DeltaCvMode::Off) {
        continue;
      } else if (e.comp_model == ComputationModel::ApproxSim &&
                 cv_.approx_delta_mode == DeltaCvMode::Level0Only) {
        NoiseHandle h = pilot_root.derive(i);
        per_option = estimate_level0_delta(e, model, level0_pilot_samples, h);
      } else {
        const auto& a = model.assets[e.option.asset_index];
        per_option = bs_price_delta(e.option, a.initial_price, 0.0, a.volatility,
                                    model.risk_free_rate)
                         .delta;
      }
      adjustment_[e.option.asset_index] += e.weight * per_option;
    }
    for (auto& a : adjustment_) a /= static_cast<double>(p);
  }
}

double LossModel::threshold(const RiskScenario& scenario) const {
  double shift = 0.0;
  for (std::size_t k = 0; k < r0_.size(); ++k)
    shift += (scenario.asset_values[k] - r0_[k]) * adjustment_[k];
  return portfolio_->threshold + shift;
}

TermSample LossModel::term(std::size_t index, const RiskScenario& scenario,
                           NoiseHandle& noise) const {
  const auto& entry = portfolio_->entries[index];
  switch (entry.comp_model) {
    case ComputationModel::ExactEval:
      return exact_eval_term(entry, scenario, *model_, cv_);
    case ComputationModel::ExactSim:
      return exact_sim_term(entry, scenario, *model_, cv_, noise);
    case ComputationModel::ApproxSim:
      return approx_sim_term(entry, scenario, *model_, dist_, cv_, noise);
  }
  throw std::logic_error("unreachable computation model");
}

InnerVariable::InnerVariable(const LossModel& model, RiskScenario scenario)
    : model_(&model), scenario_(std::move(scenario)) {
  threshold_ = model.threshold(scenario_);
  if (!model.subsampled()) {
    // Deterministic terms contribute a constant; evaluate them once.
    for (std::size_t i = 0; i < model.portfolio().size(); ++i) {
      const auto& e = model.portfolio().entries[i];
      if (e.comp_model != ComputationModel::ExactEval) continue;
      const auto t = exact_eval_term(e, scenario_, model.market(), model.cv());
      cached_exact_sum_ += t.value;
      setup_work_ += t.work;
    }
  }
}

TermSample InnerVariable::draw(NoiseHandle& noise) const {
  const std::size_t p = model_->portfolio().size();
  if (model_->subsampled()) {
    const std::size_t j = nestrisk::draw(model_->sampler(), noise);
    NoiseHandle h = noise.derive(j);
    const auto t = model_->term(j, scenario_, h);
    const double pj = model_->sampler().probabilities[j];
    return {t.value / (static_cast<double>(p) * pj) - threshold_, t.work};
  }

  double sum = cached_exact_sum_;
  std::uint64_t work = 0;
  for (std::size_t i = 0; i < p; ++i) {
    if (model_->portfolio().entries[i].comp_model == ComputationModel::ExactEval)
      continue;
    NoiseHandle h = noise.derive(i);
    const auto t = model_->term(i, scenario_, h);
    sum += t.value;
    work += t.work;
  }
  return {sum / static_cast<double>(p) - threshold_, work};
}

}  // namespace nestrisk
