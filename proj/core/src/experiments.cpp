#include "nestrisk/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "nestrisk/errors.hpp"

namespace nestrisk {

const char* to_string(MethodVariant v) {
  switch (v) {
    case MethodVariant::Full: return "full";
    case MethodVariant::NoSubsampling: return "no_subsampling";
    case MethodVariant::NoCv: return "no_cv";
    case MethodVariant::NonAdaptive: return "non_adaptive";
    case MethodVariant::FullApprox: return "full_approx";
  }
  return "?";
}

MethodVariant method_variant_from_string(const std::string& s) {
  if (s == "full") return MethodVariant::Full;
  if (s == "no_subsampling") return MethodVariant::NoSubsampling;
  if (s == "no_cv") return MethodVariant::NoCv;
  if (s == "non_adaptive") return MethodVariant::NonAdaptive;
  if (s == "full_approx") return MethodVariant::FullApprox;
  throw ConfigError("unknown method variant: " + s);
}

void ExperimentConfig::validate() const {
  market.validate();
  if (variants.empty()) throw ConfigError("no method variants configured");
  if (tolerances.empty()) throw ConfigError("no tolerances configured");
  for (std::size_t i = 1; i < tolerances.size(); ++i)
    if (!(tolerances[i] < tolerances[i - 1]))
      throw ConfigError("tolerances must be strictly decreasing");
  for (double t : tolerances)
    if (!(t > 0.0)) throw ConfigError("tolerances must be positive");
  if (!(eta_ref > 0.0)) throw ConfigError("eta_ref must be positive");
  if (m0 < 2) throw ConfigError("m0 must be at least 2");
}

namespace {

struct KvFile {
  std::map<std::string, std::string> values;
  std::string origin;

  bool has(const std::string& key) const { return values.count(key) != 0; }

  std::string str(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }

  double num(const std::string& key, double fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(it->second);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(origin + ": bad number for " + key + ": " + it->second);
    }
  }

  std::uint64_t integer(const std::string& key, std::uint64_t fallback) const {
    const double v = num(key, static_cast<double>(fallback));
    if (v < 0.0 || v != std::floor(v))
      throw ConfigError(origin + ": expected a nonnegative integer for " + key);
    return static_cast<std::uint64_t>(v);
  }

  std::vector<std::string> list(const std::string& key,
                                const std::string& fallback) const {
    std::vector<std::string> out;
    std::istringstream ss(str(key, fallback));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto begin = item.find_first_not_of(" \t");
      const auto end = item.find_last_not_of(" \t");
      if (begin == std::string::npos) continue;
      out.push_back(item.substr(begin, end - begin + 1));
    }
    return out;
  }
};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

const char* const kKnownKeys[] = {
    "market.assets", "market.correlation", "market.rate", "market.tau",
    "market.price_min", "market.price_max", "market.drift_min", "market.drift_max",
    "market.vol_min", "market.vol_max", "market.seed",
    "portfolio.count", "portfolio.weight_log_sd", "portfolio.mix",
    "portfolio.maturity_min", "portfolio.maturity_max", "portfolio.strike_min",
    "portfolio.strike_max", "portfolio.threshold", "portfolio.seed",
    "portfolio.manifest",
    "mlmc.n0", "mlmc.c", "mlmc.r", "mlmc.m0", "mlmc.pilot_levels",
    "mlmc.max_level", "mlmc.zeta", "mlmc.level0_pilot",
    "run.variants", "run.tolerances", "run.eta_ref", "run.seed", "run.jobs",
    "run.out",
};

KvFile read_kv(std::istream& in, const std::string& origin) {
  KvFile kv;
  kv.origin = origin;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected [section] or key = value");
    const std::string key = section + "." + trim(line.substr(0, eq));
    bool known = false;
    for (const char* k : kKnownKeys) known = known || key == k;
    if (!known)
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": unknown key " + key);
    kv.values[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

MarketModel build_market(const KvFile& kv) {
  MarketModel market;
  market.correlation = kv.num("market.correlation", 0.2);
  market.risk_free_rate = kv.num("market.rate", 0.05);
  market.risk_horizon = kv.num("market.tau", 0.02);

  const auto q = kv.integer("market.assets", 16);
  const double p_lo = kv.num("market.price_min", 90.0);
  const double p_hi = kv.num("market.price_max", 110.0);
  const double mu_lo = kv.num("market.drift_min", 0.05);
  const double mu_hi = kv.num("market.drift_max", 0.15);
  const double v_lo = kv.num("market.vol_min", 0.01);
  const double v_hi = kv.num("market.vol_max", 0.4);

  NoiseHandle noise(kv.integer("market.seed", 2024));
  market.assets.resize(q);
  for (auto& a : market.assets) {
    a.initial_price = p_lo + (p_hi - p_lo) * noise.uniform();
    a.drift = mu_lo + (mu_hi - mu_lo) * noise.uniform();
    a.volatility = v_lo + (v_hi - v_lo) * noise.uniform();
  }
  return market;
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, const std::string& origin) {
  const KvFile kv = read_kv(in, origin);

  ExperimentConfig cfg;
  cfg.market = build_market(kv);

  cfg.gen.count = kv.integer("portfolio.count", 1000);
  cfg.gen.weight_log_sd = kv.num("portfolio.weight_log_sd", 3.0);
  const auto mix = kv.list("portfolio.mix", "0.3, 0.7, 0.0");
  if (mix.size() != 3)
    throw ConfigError(origin + ": portfolio.mix needs three probabilities");
  for (std::size_t i = 0; i < 3; ++i) cfg.gen.model_mix[i] = std::stod(mix[i]);
  cfg.gen.maturity_min = kv.num("portfolio.maturity_min", 0.1);
  cfg.gen.maturity_max = kv.num("portfolio.maturity_max", 5.0);
  cfg.gen.strike_min = kv.num("portfolio.strike_min", 80.0);
  cfg.gen.strike_max = kv.num("portfolio.strike_max", 120.0);
  cfg.gen.threshold = kv.num("portfolio.threshold", 0.25);
  cfg.gen.seed = kv.integer("portfolio.seed", 1);
  cfg.manifest = kv.str("portfolio.manifest", "");

  cfg.adaptive.n0 = kv.integer("mlmc.n0", 32);
  cfg.adaptive.c = kv.num("mlmc.c", 3.0);
  cfg.adaptive.r = kv.num("mlmc.r", 0.0);  // 0 = auto
  cfg.m0 = kv.integer("mlmc.m0", 1024);
  cfg.pilot_levels = static_cast<int>(kv.integer("mlmc.pilot_levels", 4));
  cfg.max_level = static_cast<int>(kv.integer("mlmc.max_level", 14));
  cfg.zeta = kv.num("mlmc.zeta", 1.5);
  cfg.level0_pilot = kv.integer("mlmc.level0_pilot", 4096);

  for (const auto& v : kv.list("run.variants", "full"))
    cfg.variants.push_back(method_variant_from_string(v));
  for (const auto& t : kv.list("run.tolerances", "0.1"))
    cfg.tolerances.push_back(std::stod(t));
  cfg.eta_ref = kv.num("run.eta_ref", 0.0);
  cfg.seed = kv.integer("run.seed", 0);
  cfg.jobs = static_cast<unsigned>(kv.integer("run.jobs", 0));
  cfg.out_path = kv.str("run.out", "");

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  return parse_config(in, path);
}

Portfolio variant_portfolio(const ExperimentConfig& config, MethodVariant variant) {
  Portfolio portfolio;
  if (!config.manifest.empty()) {
    portfolio = load_manifest(config.manifest, config.market, config.gen.threshold);
  } else {
    GenConfig gen = config.gen;
    if (variant == MethodVariant::FullApprox) gen.model_mix = {0.3, 0.5, 0.2};
    return generate_with_retry(gen, config.market);
  }
  if (variant == MethodVariant::FullApprox) {
    // Same options and weights, models redrawn with the 30/50/20 mix.
    NoiseHandle noise = NoiseHandle(config.gen.seed).derive(0x6d6978ULL);
    for (std::size_t i = 0; i < portfolio.size(); ++i) {
      NoiseHandle h = noise.derive(i);
      const double u = h.uniform();
      portfolio.entries[i].comp_model = u < 0.3   ? ComputationModel::ExactEval
                                        : u < 0.8 ? ComputationModel::ExactSim
                                                  : ComputationModel::ApproxSim;
    }
  }
  return portfolio;
}

AdaptiveConfig variant_adaptive(const ExperimentConfig& config, MethodVariant variant,
                                const Portfolio& portfolio) {
  AdaptiveConfig cfg = config.adaptive;
  cfg.adaptive = variant != MethodVariant::NonAdaptive;
  if (cfg.r == 0.0) {
    bool has_approx = false;
    for (const auto& e : portfolio.entries)
      has_approx = has_approx || e.comp_model == ComputationModel::ApproxSim;
    // Randomized-level draws only have low finite moments, which caps r.
    cfg.r = has_approx ? 1.1 : 1.5;
  }
  return cfg;
}

LossModel variant_loss_model(const ExperimentConfig& config, MethodVariant variant,
                             const Portfolio& portfolio) {
  CvConfig cv;
  bool subsample = true;
  switch (variant) {
    case MethodVariant::Full:
    case MethodVariant::NonAdaptive:
    case MethodVariant::FullApprox:
      break;
    case MethodVariant::NoSubsampling:
      subsample = false;
      break;
    case MethodVariant::NoCv:
      cv.delta_cv = false;
      cv.antithetic = false;
      cv.approx_delta_mode = DeltaCvMode::Off;
      break;
  }
  const auto dist = LevelDistribution::make(config.zeta);
  const std::uint64_t pilot_seed = config.seed ^ 0x64656c746130ULL;
  return LossModel(portfolio, config.market, cv, dist, subsample, pilot_seed,
                   config.level0_pilot);
}

namespace {

void write_levels(std::FILE* f, MethodVariant variant, double tol,
                  const std::vector<LevelStats>& levels) {
  for (const auto& s : levels)
    std::fprintf(f, "%s,%.6g,%d,%.9e,%.9e,%.9e,%llu,%llu\n", to_string(variant),
                 tol, s.level, s.var_delta, s.var_fine, s.mean_inner_n,
                 static_cast<unsigned long long>(s.work),
                 static_cast<unsigned long long>(s.m));
}

void write_summary(std::FILE* f, const RunRecord& rec, bool timing) {
  const char* status = rec.unreachable   ? "unreachable"
                       : rec.out_of_range ? "out_of_range"
                                          : "ok";
  std::fprintf(f, "%s,%.6g,%.9e,%llu,%.6f,%s\n", to_string(rec.variant),
               rec.tol_rel, rec.eta,
               static_cast<unsigned long long>(rec.total_work),
               timing ? rec.wall_seconds : 0.0, status);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_or_throw(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "w"));
  if (!f) throw IoError("cannot open output file: " + path);
  return f;
}

}  // namespace

std::string levels_path_for(const std::string& out_path) {
  const auto dot = out_path.find_last_of('.');
  const auto slash = out_path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return out_path + "_levels";
  return out_path.substr(0, dot) + "_levels" + out_path.substr(dot);
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config) {
  config.validate();

  FilePtr summary, levels;
  if (!config.out_path.empty()) {
    summary = open_or_throw(config.out_path);
    levels = open_or_throw(levels_path_for(config.out_path));
    std::fprintf(summary.get(), "variant,tol,eta_estimate,total_work,wall_seconds,status\n");
    std::fprintf(levels.get(), "variant,tol,level,var_delta,var_fine,mean_inner_n,work,m\n");
  }

  std::vector<RunRecord> records;
  std::uint64_t run_index = 0;
  for (const MethodVariant variant : config.variants) {
    const Portfolio portfolio = variant_portfolio(config, variant);
    const LossModel loss = variant_loss_model(config, variant, portfolio);
    const AdaptiveConfig adaptive = variant_adaptive(config, variant, portfolio);

    for (std::size_t ti = 0; ti < config.tolerances.size(); ++ti, ++run_index) {
      MlmcOptions opts;
      opts.tol_abs = config.tolerances[ti] * config.eta_ref;
      opts.adaptive = adaptive;
      opts.m0 = config.m0;
      opts.pilot_levels = config.pilot_levels;
      opts.max_level = config.max_level;
      opts.jobs = config.jobs;
      // Fixed (variant, tolerance) -> seed mapping, independent of ordering.
      opts.seed = config.seed + 0x9e3779b97f4a7c15ULL * (run_index + 1);

      RunRecord rec;
      rec.variant = variant;
      rec.tol_rel = config.tolerances[ti];
      try {
        const MlmcResult res = run_mlmc(loss, opts);
        rec.eta = res.estimate;
        rec.total_work = res.total_work;
        rec.wall_seconds = res.wall_time;
        rec.out_of_range = res.out_of_range;
        rec.levels = res.per_level;
      } catch (const ToleranceUnreachable& e) {
        rec.eta = e.partial.estimate;
        rec.total_work = e.partial.total_work;
        rec.wall_seconds = e.partial.wall_time;
        rec.out_of_range = e.partial.out_of_range;
        rec.unreachable = true;
        rec.levels = e.partial.per_level;
      }
      if (summary) {
        write_summary(summary.get(), rec, config.timing);
        write_levels(levels.get(), variant, rec.tol_rel, rec.levels);
        std::fflush(summary.get());
        std::fflush(levels.get());
      }
      records.push_back(std::move(rec));
    }
  }
  if (summary && (std::ferror(summary.get()) || std::ferror(levels.get())))
    throw IoError("failed writing results to " + config.out_path);
  return records;
}

void emit_level_table(const MlmcResult& result, const std::string& path) {
  FilePtr f = open_or_throw(path);
  std::fprintf(f.get(), "level,var_delta,var_fine,mean_inner_n,work,m\n");
  for (const auto& s : result.per_level)
    std::fprintf(f.get(), "%d,%.9e,%.9e,%.9e,%llu,%llu\n", s.level, s.var_delta,
                 s.var_fine, s.mean_inner_n,
                 static_cast<unsigned long long>(s.work),
                 static_cast<unsigned long long>(s.m));
  if (std::ferror(f.get())) throw IoError("failed writing level table: " + path);
}

}  // namespace nestrisk
