// Command-line runner for the nested-risk estimator experiments:
//   run            tolerance sweeps over method variants, CSV output
//   gen-portfolio  write a reproducible portfolio manifest
//   oracle         brute-force nested Monte Carlo check on a manifest
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "nestrisk/errors.hpp"
#include "nestrisk/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitUnreachable = 2;
constexpr int kExitIo = 3;

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned jobs = 0;
  bool jobs_set = false;
};

nestrisk::ExperimentConfig load(const CommonArgs& args) {
  auto cfg = nestrisk::load_config(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  if (args.jobs_set) cfg.jobs = args.jobs;
  return cfg;
}

int cmd_run(const CommonArgs& args, const std::string& out, bool timing) {
  auto cfg = load(args);
  if (!out.empty()) cfg.out_path = out;
  cfg.timing = timing;

  const auto records = nestrisk::run_experiment(cfg);
  bool all_unreachable = !records.empty();
  for (const auto& rec : records) {
    all_unreachable = all_unreachable && rec.unreachable;
    std::fprintf(stderr, "%-16s tol=%-8.4g eta=%.6e work=%llu wall=%.2fs%s%s\n",
                 nestrisk::to_string(rec.variant), rec.tol_rel, rec.eta,
                 static_cast<unsigned long long>(rec.total_work), rec.wall_seconds,
                 rec.out_of_range ? " [out-of-range]" : "",
                 rec.unreachable ? " [tolerance-unreachable]" : "");
  }
  return all_unreachable ? kExitUnreachable : kExitOk;
}

int cmd_gen_portfolio(const CommonArgs& args, const std::string& out) {
  auto cfg = load(args);
  const auto portfolio = nestrisk::generate_with_retry(cfg.gen, cfg.market);
  nestrisk::save_manifest(portfolio, out);
  std::fprintf(stderr, "wrote %zu options to %s (threshold %.6g)\n",
               portfolio.size(), out.c_str(), portfolio.threshold);
  return kExitOk;
}

int cmd_oracle(const CommonArgs& args, const std::string& manifest,
               std::uint64_t outer, std::uint64_t inner) {
  auto cfg = load(args);
  const auto portfolio =
      nestrisk::load_manifest(manifest, cfg.market, cfg.gen.threshold);
  const auto res = nestrisk::nested_brute_force(portfolio, cfg.market, outer, inner,
                                                cfg.seed, cfg.jobs);
  std::printf("eta_estimate,std_error,total_work\n%.9e,%.9e,%llu\n", res.estimate,
              res.std_error, static_cast<unsigned long long>(res.total_work));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested-risk MLMC experiment runner"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string out_path, manifest;
  bool timing = false;
  std::uint64_t outer = 100000, inner = 1024;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", common.config_path, "experiment config file")
        ->required();
    cmd->add_option("--seed", common.seed, "override [run] seed")
        ->each([&](const std::string&) { common.seed_set = true; });
    cmd->add_option("--jobs", common.jobs, "worker threads (0 = all cores)")
        ->each([&](const std::string&) { common.jobs_set = true; });
  };

  auto* run = app.add_subcommand("run", "run the configured tolerance sweep");
  add_common(run);
  run->add_option("--out", out_path, "summary CSV path (overrides [run] out)");
  run->add_flag("--timing", timing, "write wall seconds into the CSV");

  auto* gen = app.add_subcommand("gen-portfolio", "write a portfolio manifest");
  add_common(gen);
  gen->add_option("--out", manifest, "manifest path")->required();

  auto* oracle = app.add_subcommand("oracle", "brute-force nested MC estimate");
  add_common(oracle);
  oracle->add_option("--portfolio", manifest, "portfolio manifest")->required();
  oracle->add_option("--outer", outer, "outer scenarios M")->required();
  oracle->add_option("--inner", inner, "inner samples N per scenario")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(common, out_path, timing);
    if (gen->parsed()) return cmd_gen_portfolio(common, manifest);
    if (oracle->parsed()) return cmd_oracle(common, manifest, outer, inner);
  } catch (const nestrisk::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const nestrisk::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitOk;
}
