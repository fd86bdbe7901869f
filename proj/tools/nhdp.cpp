// Command-line front end: every subcommand resolves to a RunConfig and goes
// through run(). Flags override the --config file, which overrides defaults.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include "CLI11.hpp"
#include "nhdp/errors.hpp"
#include "nhdp/run.hpp"

namespace {

// --config has to be applied before the other flags land on top of it, so
// fish it out of argv ahead of the real parse.
std::string find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  nhdp::RunConfig cfg;
  std::string config_path = find_config_arg(argc, argv);
  try {
    if (!config_path.empty()) cfg = nhdp::load_run_config(config_path);
  } catch (const nhdp::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  if (const char* env_out = std::getenv("NHDP_OUT_DIR")) {
    if (config_path.empty() || cfg.out_dir == ".") cfg.out_dir = env_out;
  }

  CLI::App app{"nested HDP clustering of two-level areal data"};
  app.require_subcommand(1);
  std::string config_sink;
  app.add_option("--config", config_sink, "JSON config file, flags override it");
  app.add_option("--out", cfg.out_dir, "output directory (or NHDP_OUT_DIR)");
  app.add_option("--seed", cfg.seed, "RNG seed");

  app.add_option("--input", cfg.input, "table CSV (unit_id, parent_id, density or count+area)");
  app.add_option("--points", cfg.points, "points CSV with lon, lat and optional year");
  app.add_option("--polygons", cfg.polygons, "GeoJSON FeatureCollection of units");
  app.add_option("--estimate", cfg.estimate, "partition CSV to score");
  app.add_option("--truth", cfg.truth, "reference partition CSV");
  app.add_option("--fit-dir", cfg.fit_dir, "directory holding a fit's outputs");

  // synth
  std::optional<int> n_groups, units_per_group;
  app.add_option("--framework", cfg.framework, "synthetic framework, fw1 or fw2");
  app.add_option("--n-groups", n_groups, "synthetic group count");
  app.add_option("--units-per-group", units_per_group, "units per synthetic group");
  app.add_option("--kappa", cfg.fw2.kappa, "fw2 atom spacing in sigmas");
  app.add_option("--min-tv", cfg.fw2.min_tv, "fw2 pairwise TV rejection floor");
  std::optional<double> fw2_a0, fw2_a1, fw2_a2;
  app.add_option("--fw2-alpha0", fw2_a0, "fw2 generator alpha0");
  app.add_option("--fw2-alpha1", fw2_a1, "fw2 generator alpha1");
  app.add_option("--fw2-alpha2", fw2_a2, "fw2 generator alpha2");

  // hyperparameters
  std::optional<std::string> hyper_defaults;
  std::optional<double> alpha0, alpha1, alpha2, sigma2, k0;
  bool fix_alphas = false, fix_sigma2 = false;
  app.add_option("--hyper-defaults", hyper_defaults, "real or simulation");
  app.add_option("--alpha0", alpha0, "dish-level concentration");
  app.add_option("--alpha1", alpha1, "table-level concentration");
  app.add_option("--alpha2", alpha2, "restaurant-level concentration");
  app.add_option("--sigma2", sigma2, "observation variance");
  app.add_option("--k0", k0, "cluster-mean precision ratio");
  app.add_flag("--fix-alphas", fix_alphas, "drop the concentration priors");
  app.add_flag("--fix-sigma2", fix_sigma2, "drop the variance prior");

  // chain
  app.add_option("--iters", cfg.chain.n_iter, "sweeps per chain");
  app.add_option("--burn-in", cfg.chain.burn_in, "sweeps discarded per chain");
  app.add_option("--thin", cfg.chain.thin, "keep 1 of every thin sweeps");
  app.add_option("--chains", cfg.chain.n_chains, "independent chains");
  std::optional<int> rungs;
  std::optional<double> max_temp;
  app.add_option("--rungs", rungs, "tempering ladder size");
  app.add_option("--max-temp", max_temp, "hottest ladder temperature");
  bool prior_only = false;
  app.add_flag("--prior-only", prior_only, "sample the prior, ignore the data");

  bool no_standardize = false;
  app.add_flag("--no-standardize", no_standardize, "fit the raw densities");
  app.add_option("--kmax", cfg.kmax, "largest K the baseline scans");
  app.add_option("--prior-groups", cfg.prior_groups, "prior-check group count");
  app.add_option("--prior-units", cfg.prior_units, "prior-check units per group");

  const std::pair<const char*, const char*> modes[] = {
      {"ingest", "aggregate points over polygons into a unit table"},
      {"synth", "generate a synthetic two-level dataset"},
      {"fit", "run the nested HDP sampler on a unit table"},
      {"summarize", "point estimates and cluster means from a fit"},
      {"eval", "score an estimated partition against a reference"},
      {"baseline", "two-stage k-means reference clustering"},
      {"prior-check", "prior-only chain diagnostics"},
  };
  for (auto [name, what] : modes) app.add_subcommand(name, what)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  cfg.mode = app.get_subcommands().front()->get_name();
  if (n_groups) {
    cfg.fw1.n_groups = *n_groups;
    cfg.fw2.n_groups = *n_groups;
  }
  if (units_per_group) {
    cfg.fw1.units_per_group = *units_per_group;
    cfg.fw2.units_per_group = *units_per_group;
  }
  if (fw2_a0) cfg.fw2.alpha0 = *fw2_a0;
  if (fw2_a1) cfg.fw2.alpha1 = *fw2_a1;
  if (fw2_a2) cfg.fw2.alpha2 = *fw2_a2;
  if (hyper_defaults) {
    if (*hyper_defaults == "real")
      cfg.hyper = nhdp::real_data_defaults();
    else if (*hyper_defaults == "simulation")
      cfg.hyper = nhdp::simulation_defaults();
    else {
      std::cerr << "error: --hyper-defaults must be real or simulation\n";
      return 1;
    }
  }
  if (alpha0) cfg.hyper.alpha0 = *alpha0;
  if (alpha1) cfg.hyper.alpha1 = *alpha1;
  if (alpha2) cfg.hyper.alpha2 = *alpha2;
  if (sigma2) cfg.hyper.sigma2 = *sigma2;
  if (k0) cfg.hyper.k0 = *k0;
  if (fix_alphas) cfg.hyper.alpha_prior.reset();
  if (fix_sigma2) cfg.hyper.sigma2_prior.reset();
  if (rungs || max_temp) {
    nhdp::TemperingConfig tc = cfg.chain.tempering.value_or(nhdp::TemperingConfig{});
    if (rungs) tc.n_rungs = *rungs;
    if (max_temp) tc.max_temp = *max_temp;
    cfg.chain.tempering = tc;
  }
  if (prior_only) cfg.chain.prior_only = true;
  if (no_standardize) cfg.standardize_input = false;

  try {
    nhdp::run(cfg);
  } catch (const nhdp::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
