#include "nestrisk/mlmc.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>

#include "nestrisk/errors.hpp"
#include "nestrisk/parallel.hpp"

namespace nestrisk {

namespace {

constexpr std::uint64_t kScenarioStream = 0;
constexpr std::uint64_t kFineProbeStream = 1;
constexpr std::uint64_t kCoarseProbeStream = 2;
constexpr std::uint64_t kEstimatorStream = 3;

double heaviside(double x) { return x > 0.0 ? 1.0 : 0.0; }

std::uint64_t pow2_u64(int e) { return std::uint64_t{1} << e; }

}  // namespace

void AdaptiveConfig::validate() const {
  if (n0 < 2) throw std::invalid_argument("n0 must be at least 2");
  if (!(c > 0.0)) throw std::invalid_argument("c must be positive");
  if (!(r > 1.0 && r < 2.0)) throw std::invalid_argument("r must be in (1,2)");
}

InnerEstimate inner_estimate(const InnerVariable& var, std::uint64_t n,
                             NoiseHandle& noise, std::vector<double>* retained) {
  InnerEstimate e;
  if (retained) {
    retained->clear();
    retained->reserve(n);
  }
  double sum = 0.0;
  for (std::uint64_t k = 0; k < n; ++k) {
    NoiseHandle h = noise.derive(k);
    const TermSample t = var.draw(h);
    sum += t.value;
    e.sq_sum += t.value * t.value;
    e.work += t.work;
    if (retained) retained->push_back(t.value);
  }
  e.mean = sum / static_cast<double>(n);
  return e;
}

AdaptiveCount adaptive_n(const InnerVariable& var, int level,
                         const AdaptiveConfig& cfg, NoiseHandle& noise) {
  const std::uint64_t cap = cfg.n0 * pow2_u64(2 * level);
  if (!cfg.adaptive) return {cap, 0};

  std::uint64_t n = cfg.n0 * pow2_u64(level);
  AdaptiveCount out{n, 0};
  for (std::uint64_t iter = 0;; ++iter) {
    if (2 * n >= cap) {
      out.n_final = cap;
      return out;
    }
    NoiseHandle probe = noise.derive(iter);
    const InnerEstimate e = inner_estimate(var, n, probe);
    out.probe_work += e.work;
    // Biased (/n) variance estimator; zero variance reads as delta^ = +inf.
    const double variance =
        std::max(0.0, e.sq_sum / static_cast<double>(n) - e.mean * e.mean);
    bool satisfied = true;
    if (variance > 0.0) {
      const double delta_hat = std::abs(e.mean) / std::sqrt(variance);
      const double rhs =
          static_cast<double>(cap) *
          std::pow(std::sqrt(static_cast<double>(cfg.n0)) *
                       static_cast<double>(pow2_u64(level)) * delta_hat / cfg.c,
                   -cfg.r);
      satisfied = static_cast<double>(n) >= rhs;
    }
    if (satisfied) {
      out.n_final = n;
      return out;
    }
    n *= 2;
  }
}

DeltaSample antithetic_delta(const InnerVariable& var, int level, int base_level,
                             const AdaptiveConfig& cfg, NoiseHandle& noise) {
  DeltaSample out;

  if (level <= base_level) {
    NoiseHandle probe = noise.derive(kFineProbeStream);
    const AdaptiveCount n = adaptive_n(var, level, cfg, probe);
    NoiseHandle est_noise = noise.derive(kEstimatorStream);
    const InnerEstimate e = inner_estimate(var, n.n_final, est_noise);
    out.delta = out.fine_indicator = heaviside(e.mean);
    out.n_fine = n.n_final;
    out.work = n.probe_work + e.work;
    return out;
  }

  NoiseHandle probe_f = noise.derive(kFineProbeStream);
  NoiseHandle probe_c = noise.derive(kCoarseProbeStream);
  const AdaptiveCount fine = adaptive_n(var, level, cfg, probe_f);
  const AdaptiveCount coarse = adaptive_n(var, level - 1, cfg, probe_c);
  const std::uint64_t n_f = fine.n_final;
  const std::uint64_t n_c = coarse.n_final;
  const std::uint64_t pool_n = std::max(n_f, n_c);

  std::vector<double> pool;
  NoiseHandle est_noise = noise.derive(kEstimatorStream);
  const InnerEstimate e = inner_estimate(var, pool_n, est_noise, &pool);
  out.work = fine.probe_work + coarse.probe_work + e.work;
  out.n_fine = n_f;

  auto group_mean = [&pool](std::uint64_t begin, std::uint64_t len) {
    double s = 0.0;
    for (std::uint64_t i = begin; i < begin + len; ++i) s += pool[i];
    return s / static_cast<double>(len);
  };

  if (n_f >= n_c) {
    // Fine over the whole pool, s coarse groups partitioning the same draws.
    const std::uint64_t s = n_f / n_c;
    const double h_fine = heaviside(e.mean);
    double coarse_sum = 0.0;
    for (std::uint64_t i = 0; i < s; ++i)
      coarse_sum += heaviside(group_mean(i * n_c, n_c));
    out.delta = h_fine - coarse_sum / static_cast<double>(s);
    out.fine_indicator = h_fine;
  } else {
    // Roles swap: the fine approximation carries the antithetic estimators.
    const std::uint64_t s = n_c / n_f;
    const double h_coarse = heaviside(e.mean);
    double fine_sum = 0.0;
    for (std::uint64_t i = 0; i < s; ++i)
      fine_sum += heaviside(group_mean(i * n_f, n_f));
    out.delta = fine_sum / static_cast<double>(s) - h_coarse;
    out.fine_indicator = heaviside(group_mean(0, n_f));
  }
  return out;
}

namespace {

struct LevelAccumulator {
  std::uint64_t m = 0;
  double sum_d = 0.0, sum_d2 = 0.0;
  double sum_f = 0.0, sum_f2 = 0.0;
  double sum_n = 0.0;
  std::uint64_t work = 0;

  void add(const DeltaSample& s, std::uint64_t extra_work) {
    ++m;
    sum_d += s.delta;
    sum_d2 += s.delta * s.delta;
    sum_f += s.fine_indicator;
    sum_f2 += s.fine_indicator * s.fine_indicator;
    sum_n += static_cast<double>(s.n_fine);
    work += s.work + extra_work;
  }

  double mean_delta() const { return m ? sum_d / static_cast<double>(m) : 0.0; }
  double var_delta() const {
    if (!m) return 0.0;
    const double mu = mean_delta();
    return std::max(0.0, sum_d2 / static_cast<double>(m) - mu * mu);
  }
  double mean_fine() const { return m ? sum_f / static_cast<double>(m) : 0.0; }
  double var_fine() const {
    if (!m) return 0.0;
    const double mu = mean_fine();
    return std::max(0.0, sum_f2 / static_cast<double>(m) - mu * mu);
  }
  double work_per_scenario() const {
    return m ? static_cast<double>(work) / static_cast<double>(m) : 0.0;
  }

  LevelStats snapshot(int level, bool base_form) const {
    LevelStats s;
    s.level = level;
    s.m = m;
    // At the base level the difference degenerates to the indicator itself.
    s.mean_delta = base_form ? mean_fine() : mean_delta();
    s.var_delta = base_form ? var_fine() : var_delta();
    s.mean_fine = mean_fine();
    s.var_fine = var_fine();
    s.mean_inner_n = m ? sum_n / static_cast<double>(m) : 0.0;
    s.work = work;
    return s;
  }
};

struct ScenarioOutput {
  DeltaSample sample;
  std::uint64_t setup_work;
};

/// Samples scenarios [first_index, first_index + count) of `level` in
/// parallel and merges them into acc in index order, so the statistics are
/// independent of the worker count.
void sample_scenarios(const LossModel& loss, int level, int base_level,
                      const AdaptiveConfig& cfg, std::uint64_t seed,
                      std::uint64_t first_index, std::uint64_t count,
                      unsigned jobs, LevelAccumulator& acc) {
  const NoiseHandle root(seed);
  constexpr std::uint64_t kBatch = 1 << 14;
  std::vector<ScenarioOutput> slots;
  for (std::uint64_t done = 0; done < count; done += kBatch) {
    const std::uint64_t batch = std::min(kBatch, count - done);
    slots.resize(batch);
    parallel_for(batch, jobs, [&](std::size_t i) {
      const std::uint64_t index = first_index + done + i;
      NoiseHandle scenario_root =
          root.derive(static_cast<std::uint64_t>(level), index);
      NoiseHandle scen_noise = scenario_root.derive(kScenarioStream);
      const RiskScenario scenario = sample_risk_scenario(loss.market(), scen_noise);
      InnerVariable var(loss, scenario);
      NoiseHandle sample_noise = scenario_root.derive(7);
      slots[i].sample = antithetic_delta(var, level, base_level, cfg, sample_noise);
      slots[i].setup_work = var.setup_work();
    });
    for (std::uint64_t i = 0; i < batch; ++i)
      acc.add(slots[i].sample, slots[i].setup_work);
  }
}

}  // namespace

int select_start_level(const std::vector<LevelStats>& pilot) {
  if (pilot.empty()) throw MissingPilot("start-level selection needs pilot stats");
  const int top = static_cast<int>(pilot.size()) - 1;
  auto cost_f = [&](int l) {
    return std::sqrt(pilot[l].var_fine * pilot[l].work /
                     std::max<double>(1.0, static_cast<double>(pilot[l].m)));
  };
  auto cost_d = [&](int l) {
    return std::sqrt(pilot[l].var_delta * pilot[l].work /
                     std::max<double>(1.0, static_cast<double>(pilot[l].m)));
  };
  for (int l0 = 0; l0 <= top; ++l0) {
    bool ok = true;
    double running = cost_f(l0);
    for (int deeper = l0 + 1; deeper <= top && ok; ++deeper) {
      running += cost_d(deeper);
      if (!(running < 1.5 * cost_f(deeper))) ok = false;
    }
    if (ok) return l0;
  }
  return top;
}

MlmcResult run_mlmc(const LossModel& model, const MlmcOptions& opts) {
  opts.adaptive.validate();
  if (!(opts.tol_abs > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const auto t0 = std::chrono::steady_clock::now();

  const double tol_split = opts.tol_abs / std::sqrt(2.0);
  const int cap = opts.max_level;
  std::vector<LevelAccumulator> acc(static_cast<std::size_t>(cap) + 1);

  // Pilot pass: M0 scenarios per level for the start-level criterion.
  const int pilot_top = std::min(opts.pilot_levels, cap);
  std::vector<LevelStats> pilot;
  for (int l = 0; l <= pilot_top; ++l) {
    sample_scenarios(model, l, 0, opts.adaptive, opts.seed, 0, opts.m0, opts.jobs,
                     acc[l]);
    pilot.push_back(acc[l].snapshot(l, l == 0));
  }
  const int l0 = select_start_level(pilot);

  auto assemble = [&](int max_l) {
    MlmcResult res;
    res.start_level = l0;
    res.max_level = max_l;
    res.estimate = acc[l0].mean_fine();
    double variance = acc[l0].var_fine() / static_cast<double>(acc[l0].m);
    for (int l = 0; l <= std::max(max_l, pilot_top); ++l) {
      // Rows below l0 keep their pilot difference-form stats; the l0 row is
      // the base level, whose telescoped term is the indicator itself.
      res.per_level.push_back(acc[l].snapshot(l, l == l0 || l == 0));
      res.total_work += acc[l].work;
    }
    for (int l = l0 + 1; l <= max_l; ++l) {
      res.estimate += acc[l].mean_delta();
      variance += acc[l].var_delta() / static_cast<double>(acc[l].m);
    }
    res.std_error = std::sqrt(variance);
    res.out_of_range = res.estimate < 0.0 || res.estimate > 1.0;
    res.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  };

  int level_top = l0;
  for (int round = 0;; ++round) {
    // Statistical allocation: M_l proportional to sqrt(V_l / W_l).
    double cost_sum = 0.0;
    for (int l = l0; l <= level_top; ++l) {
      const double v = l == l0 ? acc[l].var_fine() : acc[l].var_delta();
      cost_sum += std::sqrt(v * acc[l].work_per_scenario());
    }
    const double stat_budget = tol_split * tol_split;
    bool drew = false;
    if (round < 64) {
      for (int l = l0; l <= level_top; ++l) {
        const double v = l == l0 ? acc[l].var_fine() : acc[l].var_delta();
        const double w = acc[l].work_per_scenario();
        if (!(v > 0.0) || !(w > 0.0)) continue;
        const auto target = static_cast<std::uint64_t>(
            std::ceil(std::sqrt(v / w) * cost_sum / stat_budget));
        if (target > acc[l].m) {
          sample_scenarios(model, l, l0, opts.adaptive, opts.seed, acc[l].m,
                           target - acc[l].m, opts.jobs, acc[l]);
          drew = true;
        }
      }
    }
    if (drew) continue;

    // Bias check: geometric extrapolation of the last three difference means,
    // with the decay rate alpha estimated from the data (clamped to [0.5, 3]).
    // Needs three genuine difference levels; below that the level means are
    // still pre-asymptotic and the check would stop early.
    double bias;
    if (level_top == l0) {
      bias = 0.5;  // nothing telescoped yet; half the range of a probability
    } else if (level_top - l0 < 3) {
      bias = std::numeric_limits<double>::infinity();
    } else {
      const int fit_n = std::min(4, level_top - l0);
      double sx = 0, sy = 0, sxy = 0, sxx = 0;
      int n = 0;
      for (int i = 0; i < fit_n; ++i) {
        const double m = std::abs(acc[level_top - i].mean_delta());
        if (!(m > 0.0)) continue;
        const double x = level_top - i, y = std::log2(m);
        sx += x; sy += y; sxy += x * y; sxx += x * x;
        ++n;
      }
      double alpha = 1.0;
      if (n >= 2 && n * sxx - sx * sx > 0.0)
        alpha = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
      alpha = std::clamp(alpha, 0.5, 3.0);
      bias = 0.0;
      for (int i = 0; i < 3; ++i)
        bias = std::max(bias, std::abs(acc[level_top - i].mean_delta()) *
                                  std::exp2(-alpha * i));
      bias /= std::exp2(alpha) - 1.0;
    }
    if (bias <= tol_split) break;
    if (level_top == cap) throw ToleranceUnreachable(assemble(level_top));
    ++level_top;
    if (acc[level_top].m == 0) {
      const std::uint64_t m_open =
          opts.m_open ? opts.m_open : std::max<std::uint64_t>(64, opts.m0 / 8);
      sample_scenarios(model, level_top, l0, opts.adaptive, opts.seed, 0, m_open,
                       opts.jobs, acc[level_top]);
    }
  }

  return assemble(level_top);
}

BruteForceResult nested_brute_force(const Portfolio& portfolio,
                                    const MarketModel& model, std::uint64_t m,
                                    std::uint64_t n, std::uint64_t seed,
                                    unsigned jobs) {
  CvConfig cv;
  cv.delta_cv = false;
  cv.antithetic = false;
  cv.shared_tail = true;
  const LossModel loss(portfolio, model, cv, LevelDistribution::make(1.5), false);

  const NoiseHandle root = NoiseHandle(seed).derive(0x62727574ULL);
  std::vector<double> indicator(m);
  std::vector<std::uint64_t> work(m);
  parallel_for(m, jobs, [&](std::size_t i) {
    NoiseHandle scenario_root = root.derive(i);
    NoiseHandle scen_noise = scenario_root.derive(kScenarioStream);
    const RiskScenario scenario = sample_risk_scenario(model, scen_noise);
    InnerVariable var(loss, scenario);
    NoiseHandle draw_noise = scenario_root.derive(7);
    double sum = 0.0;
    std::uint64_t w = var.setup_work();
    for (std::uint64_t k = 0; k < n; ++k) {
      NoiseHandle h = draw_noise.derive(k);
      const TermSample t = var.draw(h);
      sum += t.value;
      w += t.work;
    }
    indicator[i] = heaviside(sum / static_cast<double>(n));
    work[i] = w;
  });

  BruteForceResult res;
  double sum = 0.0, sum2 = 0.0;
  for (std::uint64_t i = 0; i < m; ++i) {
    sum += indicator[i];
    sum2 += indicator[i] * indicator[i];
    res.total_work += work[i];
  }
  res.estimate = sum / static_cast<double>(m);
  const double var = std::max(0.0, sum2 / static_cast<double>(m) -
                                       res.estimate * res.estimate);
  res.std_error = std::sqrt(var / static_cast<double>(m));
  return res;
}

std::vector<LevelStats> level_sweep(const LossModel& model, int first_level,
                                    int last_level, std::uint64_t m,
                                    const AdaptiveConfig& cfg, std::uint64_t seed,
                                    unsigned jobs) {
  std::vector<LevelStats> out;
  for (int l = first_level; l <= last_level; ++l) {
    LevelAccumulator acc;
    sample_scenarios(model, l, first_level, cfg, seed, 0, m, jobs, acc);
    out.push_back(acc.snapshot(l, l == first_level));
  }
  return out;
}

}  // namespace nestrisk
