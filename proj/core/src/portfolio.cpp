#include "nestrisk/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nestrisk/errors.hpp"
#include "nestrisk/rng.hpp"

namespace nestrisk {

const char* to_string(ComputationModel model) {
  switch (model) {
    case ComputationModel::ExactEval: return "exact_eval";
    case ComputationModel::ExactSim: return "exact_sim";
    case ComputationModel::ApproxSim: return "approx_sim";
  }
  return "?";
}

ComputationModel computation_model_from_string(const std::string& s) {
  if (s == "exact_eval") return ComputationModel::ExactEval;
  if (s == "exact_sim") return ComputationModel::ExactSim;
  if (s == "approx_sim") return ComputationModel::ApproxSim;
  throw ConfigError("unknown computation model: " + s);
}

void GenConfig::validate(const MarketModel& model) const {
  model.validate();
  if (count < 2) throw ConfigError("portfolio needs at least two options");
  double mix_sum = 0.0;
  for (double m : model_mix) {
    if (m < 0.0) throw ConfigError("model mix probabilities must be nonnegative");
    mix_sum += m;
  }
  if (std::abs(mix_sum - 1.0) > 1e-9) throw ConfigError("model mix must sum to 1");
  if (!(maturity_min > model.risk_horizon))
    throw ConfigError("maturities must exceed the risk horizon");
  if (!(maturity_max >= maturity_min) || !(strike_max >= strike_min) ||
      !(strike_min > 0.0))
    throw ConfigError("bad parameter ranges");
  if (weight_log_sd < 0.0) throw ConfigError("weight_log_sd must be nonnegative");
}

namespace {

double analytic_delta(const VanillaOption& option, const MarketModel& model) {
  const auto& a = model.assets[option.asset_index];
  return bs_price_delta(option, a.initial_price, 0.0, a.volatility,
                        model.risk_free_rate)
      .delta;
}

ComputationModel pick_model(const std::array<double, 3>& mix, double u) {
  if (u < mix[0]) return ComputationModel::ExactEval;
  if (u < mix[0] + mix[1]) return ComputationModel::ExactSim;
  return ComputationModel::ApproxSim;
}

}  // namespace

std::vector<double> portfolio_delta0(const Portfolio& portfolio,
                                     const MarketModel& model) {
  std::vector<double> delta0(model.asset_count(), 0.0);
  for (const auto& e : portfolio.entries)
    delta0[e.option.asset_index] += e.weight * analytic_delta(e.option, model);
  const double inv_p = 1.0 / static_cast<double>(portfolio.size());
  for (auto& d : delta0) d *= inv_p;
  return delta0;
}

Portfolio generate(const GenConfig& config, const MarketModel& model) {
  config.validate(model);
  NoiseHandle noise(config.seed);

  const std::size_t p = config.count;
  const std::size_t q = model.asset_count();
  // Seed one put and one call per covered asset; small portfolios cover a
  // prefix of the asset universe.
  const std::size_t covered = std::min(q, p / 2);

  Portfolio portfolio;
  portfolio.threshold = config.threshold;
  portfolio.entries.resize(p);

  auto uniform_in = [&](double lo, double hi) {
    return lo + (hi - lo) * noise.uniform();
  };

  for (std::size_t i = 0; i < p; ++i) {
    auto& e = portfolio.entries[i];
    if (i < 2 * covered) {
      e.option.kind = i < covered ? OptionKind::Put : OptionKind::Call;
      e.option.asset_index = i % covered;
    } else {
      e.option.kind = noise.uniform() < 0.5 ? OptionKind::Put : OptionKind::Call;
      auto pick = static_cast<std::size_t>(noise.uniform() * static_cast<double>(covered));
      e.option.asset_index = std::min(pick, covered - 1);
    }
    e.option.maturity = uniform_in(config.maturity_min, config.maturity_max);
    e.option.strike = uniform_in(config.strike_min, config.strike_max);
    e.weight = std::exp(config.weight_log_sd * noise.normal());
    e.comp_model = pick_model(config.model_mix, noise.uniform());
  }

  // Delta-neutral balancing: scale call weights by
  // b_k = -(sum_put w~ dV/dR0k) / (sum_call w~ dV/dR0k) per asset.
  std::vector<double> put_delta(q, 0.0), call_delta(q, 0.0), gross(q, 0.0);
  for (const auto& e : portfolio.entries) {
    const double d = e.weight * analytic_delta(e.option, model);
    gross[e.option.asset_index] += std::abs(d);
    if (e.option.kind == OptionKind::Put)
      put_delta[e.option.asset_index] += d;
    else
      call_delta[e.option.asset_index] += d;
  }
  std::vector<double> b(q, 1.0);
  for (std::size_t k = 0; k < covered; ++k) {
    if (!(std::abs(call_delta[k]) > 1e-12 * gross[k]))
      throw GenerationFailure("degenerate call-delta denominator on an asset");
    b[k] = -put_delta[k] / call_delta[k];
  }

  double total = 0.0;
  for (auto& e : portfolio.entries) {
    if (e.option.kind == OptionKind::Call) e.weight *= b[e.option.asset_index];
    total += e.weight;
  }
  if (!(std::abs(total) > 0.0))
    throw GenerationFailure("balanced weights sum to zero");

  // Normalize so the weights average 1, then freeze importances.
  const double scale = static_cast<double>(p) / total;
  for (auto& e : portfolio.entries) {
    e.weight *= scale;
    e.importance = std::abs(e.weight);
    if (!(e.importance > 0.0)) throw GenerationFailure("zero-weight option");
  }

  portfolio.delta0 = portfolio_delta0(portfolio, model);
  return portfolio;
}

Portfolio generate_with_retry(GenConfig config, const MarketModel& model,
                              int attempts) {
  for (int k = 0;; ++k) {
    try {
      return generate(config, model);
    } catch (const GenerationFailure&) {
      if (k + 1 >= attempts) throw;
      config.seed += 0x9e3779b97f4a7c15ULL;
    }
  }
}

double adjusted_threshold(const Portfolio& portfolio, const RiskScenario& scenario,
                          std::span<const double> r0) {
  double shift = 0.0;
  for (std::size_t k = 0; k < r0.size(); ++k)
    shift += (scenario.asset_values[k] - r0[k]) * portfolio.delta0[k];
  return portfolio.threshold + shift;
}

double level0_adjusted_threshold(const Portfolio& portfolio,
                                 const RiskScenario& scenario,
                                 std::span<const double> r0,
                                 std::span<const double> level0_delta_estimate) {
  double shift = 0.0;
  for (std::size_t k = 0; k < r0.size(); ++k)
    shift += 0.5 * (scenario.asset_values[k] - r0[k]) * level0_delta_estimate[k];
  return portfolio.threshold + shift;
}

void save_manifest(const Portfolio& portfolio, std::ostream& out) {
  out << "# kind asset maturity strike weight importance model\n";
  char line[256];
  for (const auto& e : portfolio.entries) {
    std::snprintf(line, sizeof line, "%s %zu %.17g %.17g %.17g %.17g %s\n",
                  e.option.kind == OptionKind::Put ? "put" : "call",
                  e.option.asset_index, e.option.maturity, e.option.strike,
                  e.weight, e.importance, to_string(e.comp_model));
    out << line;
  }
}

void save_manifest(const Portfolio& portfolio, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open manifest for writing: " + path);
  save_manifest(portfolio, out);
  if (!out) throw IoError("failed writing manifest: " + path);
}

Portfolio load_manifest(std::istream& in, const MarketModel& model,
                        double threshold) {
  Portfolio portfolio;
  portfolio.threshold = threshold;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind, comp;
    PortfolioEntry e;
    if (!(ls >> kind >> e.option.asset_index >> e.option.maturity >>
          e.option.strike >> e.weight >> e.importance >> comp))
      throw IoError("malformed manifest line: " + line);
    if (kind == "put")
      e.option.kind = OptionKind::Put;
    else if (kind == "call")
      e.option.kind = OptionKind::Call;
    else
      throw IoError("unknown option kind: " + kind);
    e.comp_model = computation_model_from_string(comp);
    if (e.option.asset_index >= model.asset_count())
      throw IoError("manifest references an asset outside the model");
    portfolio.entries.push_back(e);
  }
  if (portfolio.entries.empty()) throw IoError("empty portfolio manifest");
  portfolio.delta0 = portfolio_delta0(portfolio, model);
  return portfolio;
}

Portfolio load_manifest(const std::string& path, const MarketModel& model,
                        double threshold) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  return load_manifest(in, model, threshold);
}

}  // namespace nestrisk
