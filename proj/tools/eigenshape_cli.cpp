// Command-line front end: eig, optimize, diagnose, baseline.

#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "eigenshape/cli.hpp"
#include "eigenshape/parallel.hpp"

using namespace eigenshape;

int main(int argc, char** argv) {
  CLI::App app{"spectral shape optimization and free-boundary diagnostics"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_path, spectrum_path, domain = "square";
  std::uint64_t seed = 0;
  bool seed_set = false, recompute = false;
  int threads = 1, baseline_n = 5;
  double baseline_size = 1.0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* copt = sub->add_option("--config", config_path, "run configuration JSON");
    if (needs_config) copt->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides config)");
    sub->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
      seed_set = true;
    });
    sub->add_option("--threads", threads, "worker threads (speed only, never results)");
  };

  auto* eig = app.add_subcommand("eig", "validate the eigensolver against analytic spectra");
  add_common(eig, true);

  auto* opt = app.add_subcommand("optimize", "run the shape optimization");
  add_common(opt, true);

  auto* diag = app.add_subcommand("diagnose", "free-boundary diagnostics for a checkpoint");
  add_common(diag, true);
  diag->add_option("--checkpoint", checkpoint_path, "level-set checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  diag->add_option("--spectrum", spectrum_path, "spectrum metadata JSON");
  diag->add_flag("--recompute", recompute, "re-solve the eigenproblem instead of loading");

  auto* base = app.add_subcommand("baseline", "print the analytic spectrum of a named domain");
  base->add_option("--domain", domain, "square or disk");
  base->add_option("--size", baseline_size, "side length or radius");
  base->add_option("--n", baseline_n, "number of eigenvalues");

  CLI11_PARSE(app, argc, argv);
  set_thread_count(threads);

  try {
    if (base->parsed()) return cmd_baseline(domain, baseline_size, baseline_n);

    RunConfig cfg = load_run_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed_set) {
      cfg.seed = seed;
      cfg.opt.seed = seed;
      cfg.diagnostics.seed = seed;
    }
    if (threads > 1) cfg.threads = threads;

    if (eig->parsed()) return cmd_eig(cfg);
    if (opt->parsed()) return cmd_optimize(cfg);
    if (diag->parsed()) return cmd_diagnose(cfg, checkpoint_path, spectrum_path, recompute);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  }
  return kUsageError;
}
