#include "nhdp/run.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "nhdp/errors.hpp"
#include "nhdp/eval.hpp"
#include "nhdp/geo.hpp"
#include "nhdp/io.hpp"
#include "nhdp/kmeans.hpp"
#include "nhdp/model.hpp"

namespace nhdp {

namespace {

using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

void require_known_keys(const json& j, const std::set<std::string>& known,
                        const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key()))
      throw DataError(where + ": unknown key '" + it.key() + "'");
  }
}

void load_hyper(const json& j, Hyperparams& hp) {
  require_known_keys(j,
                     {"defaults", "alpha0", "alpha1", "alpha2", "sigma2", "k0",
                      "fix_alphas", "fix_sigma2"},
                     "hyper");
  if (j.contains("defaults")) {
    std::string d = j.at("defaults").get<std::string>();
    if (d == "real")
      hp = real_data_defaults();
    else if (d == "simulation")
      hp = simulation_defaults();
    else
      throw DataError("hyper.defaults must be 'real' or 'simulation'");
  }
  if (j.contains("alpha0")) hp.alpha0 = j.at("alpha0").get<double>();
  if (j.contains("alpha1")) hp.alpha1 = j.at("alpha1").get<double>();
  if (j.contains("alpha2")) hp.alpha2 = j.at("alpha2").get<double>();
  if (j.contains("sigma2")) hp.sigma2 = j.at("sigma2").get<double>();
  if (j.contains("k0")) hp.k0 = j.at("k0").get<double>();
  if (j.value("fix_alphas", false)) hp.alpha_prior.reset();
  if (j.value("fix_sigma2", false)) hp.sigma2_prior.reset();
}

void load_chain(const json& j, ChainConfig& cc) {
  require_known_keys(j,
                     {"n_iter", "burn_in", "thin", "n_chains", "prior_only",
                      "tempering"},
                     "chain");
  if (j.contains("n_iter")) cc.n_iter = j.at("n_iter").get<long>();
  if (j.contains("burn_in")) cc.burn_in = j.at("burn_in").get<long>();
  if (j.contains("thin")) cc.thin = j.at("thin").get<long>();
  if (j.contains("n_chains")) cc.n_chains = j.at("n_chains").get<int>();
  if (j.contains("prior_only")) cc.prior_only = j.at("prior_only").get<bool>();
  if (j.contains("tempering")) {
    const json& t = j.at("tempering");
    require_known_keys(t, {"n_rungs", "max_temp"}, "chain.tempering");
    TemperingConfig tc;
    if (t.contains("n_rungs")) tc.n_rungs = t.at("n_rungs").get<int>();
    if (t.contains("max_temp")) tc.max_temp = t.at("max_temp").get<double>();
    cc.tempering = tc;
  }
}

json hyper_to_json(const Hyperparams& hp) {
  json j;
  j["alpha0"] = hp.alpha0;
  j["alpha1"] = hp.alpha1;
  j["alpha2"] = hp.alpha2;
  j["sigma2"] = hp.sigma2;
  j["k0"] = hp.k0;
  if (hp.alpha_prior) {
    json priors = json::array();
    for (const auto& p : *hp.alpha_prior) priors.push_back({{"mean", p.mean}, {"sd", p.sd}});
    j["alpha_prior"] = priors;
  }
  if (hp.sigma2_prior)
    j["sigma2_prior"] = {{"beta0", hp.sigma2_prior->beta0},
                         {"beta1", hp.sigma2_prior->beta1}};
  return j;
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["mode"] = cfg.mode;
  j["input"] = cfg.input;
  j["points"] = cfg.points;
  j["polygons"] = cfg.polygons;
  j["estimate"] = cfg.estimate;
  j["truth"] = cfg.truth;
  j["fit_dir"] = cfg.fit_dir;
  j["out_dir"] = cfg.out_dir;
  j["standardize"] = cfg.standardize_input;
  j["seed"] = cfg.seed;
  j["framework"] = cfg.framework;
  j["fw1"] = {{"n_groups", cfg.fw1.n_groups},
              {"units_per_group", cfg.fw1.units_per_group}};
  j["fw2"] = {{"n_groups", cfg.fw2.n_groups},
              {"units_per_group", cfg.fw2.units_per_group},
              {"alpha0", cfg.fw2.alpha0},
              {"alpha1", cfg.fw2.alpha1},
              {"alpha2", cfg.fw2.alpha2},
              {"kappa", cfg.fw2.kappa},
              {"sigma", cfg.fw2.sigma},
              {"min_tv", cfg.fw2.min_tv}};
  j["hyper"] = hyper_to_json(cfg.hyper);
  j["chain"] = {{"n_iter", cfg.chain.n_iter},
                {"burn_in", cfg.chain.burn_in},
                {"thin", cfg.chain.thin},
                {"n_chains", cfg.chain.n_chains},
                {"prior_only", cfg.chain.prior_only}};
  if (cfg.chain.tempering)
    j["chain"]["tempering"] = {{"n_rungs", cfg.chain.tempering->n_rungs},
                               {"max_temp", cfg.chain.tempering->max_temp}};
  j["kmax"] = cfg.kmax;
  j["prior_groups"] = cfg.prior_groups;
  j["prior_units"] = cfg.prior_units;
  return j;
}

std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
  return std::filesystem::path(cfg.out_dir) / name;
}

void write_manifest(const RunConfig& cfg) {
  json resolved = config_to_json(cfg);
  std::string dump = resolved.dump(2);
  char hash[19];
  std::snprintf(hash, sizeof(hash), "0x%016llx",
                static_cast<unsigned long long>(fnv1a64(dump)));
  json manifest;
  manifest["version"] = kVersion;
  manifest["mode"] = cfg.mode;
  manifest["seed"] = cfg.seed;
  manifest["config"] = resolved;
  manifest["config_hash"] = hash;
  write_text_file(out_path(cfg, "manifest.json").string(), manifest.dump(2) + "\n");
}

void write_metrics(const RunConfig& cfg, const json& metrics) {
  write_text_file(out_path(cfg, "metrics.json").string(), metrics.dump(2) + "\n");
}

TwoLevelDataset dataset_from_records(const std::vector<ArealRecord>& records) {
  TwoLevelDataset data;
  std::unordered_map<std::string, int> group_index;
  std::set<std::string> seen;
  for (const auto& rec : records) {
    if (!seen.insert(rec.unit_id).second)
      throw DataError("duplicate unit_id '" + rec.unit_id + "' in polygons");
    auto it = group_index.find(rec.parent_id);
    int g;
    if (it == group_index.end()) {
      g = static_cast<int>(group_index.size());
      group_index.emplace(rec.parent_id, g);
      data.group_ids.push_back(rec.parent_id);
    } else {
      g = it->second;
    }
    data.y.push_back(rec.density);
    data.group_of.push_back(g);
    data.unit_ids.push_back(rec.unit_id);
  }
  data.n_groups = static_cast<int>(group_index.size());
  data.check();
  return data;
}

void mode_ingest(const RunConfig& cfg) {
  TwoLevelDataset data;
  json metrics;
  if (!cfg.points.empty() || !cfg.polygons.empty()) {
    if (cfg.points.empty() || cfg.polygons.empty())
      throw DataError("ingest from points needs both --points and --polygons");
    AggregateResult agg = aggregate_points(cfg.points, cfg.polygons);
    std::ofstream out(out_path(cfg, "areal.csv"));
    if (!out) throw std::runtime_error("cannot write areal.csv");
    out << "unit_id,parent_id,count,area,density\n";
    for (const auto& rec : agg.records) {
      out << rec.unit_id << ',' << rec.parent_id << ',' << format_double(rec.count)
          << ',' << format_double(rec.area) << ',' << format_double(rec.density)
          << '\n';
    }
    data = dataset_from_records(agg.records);
    metrics["unmatched_points"] = agg.unmatched;
    metrics["n_years"] = agg.n_years;
    if (agg.unmatched > 0)
      std::cerr << "ingest: " << agg.unmatched << " point(s) matched no polygon\n";
  } else {
    if (cfg.input.empty()) throw DataError("ingest needs --input or --points/--polygons");
    data = ingest_table(cfg.input);
  }
  write_table_csv(out_path(cfg, "dataset.csv").string(), data);
  metrics["n_units"] = data.n_units();
  metrics["n_groups"] = data.n_groups;
  write_metrics(cfg, metrics);
}

void mode_synth(const RunConfig& cfg) {
  SynthData sd;
  if (cfg.framework == "fw1") {
    Framework1Config fc = cfg.fw1;
    fc.seed = cfg.seed;
    sd = gen_framework1(fc);
  } else if (cfg.framework == "fw2") {
    Framework2Config fc = cfg.fw2;
    fc.seed = cfg.seed;
    sd = gen_framework2(fc);
  } else {
    throw DataError("framework must be fw1 or fw2");
  }
  write_table_csv(out_path(cfg, "data.csv").string(), sd.data);
  PartitionPair truth{sd.true_gamma_l, sd.true_gamma_h};
  write_partition_csv(out_path(cfg, "truth_partition.csv").string(), sd.data, truth);
  write_values_csv(out_path(cfg, "truth_theta.csv").string(), "theta", sd.true_theta);
  write_values_csv(out_path(cfg, "truth_phi.csv").string(), "phi", sd.true_phi);
  if (!sd.holdout.empty())
    write_values_csv(out_path(cfg, "holdout.csv").string(), "holdout", sd.holdout);
  json metrics;
  metrics["n_units"] = sd.data.n_units();
  metrics["n_groups"] = sd.data.n_groups;
  write_metrics(cfg, metrics);
}

void mode_fit(const RunConfig& cfg) {
  if (cfg.input.empty()) throw DataError("fit needs --input");
  TwoLevelDataset data = ingest_table(cfg.input);
  json metrics;
  if (cfg.standardize_input) {
    Standardized s;
    try {
      s = standardize(data.y);
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("standardization failed: ") + e.what());
    }
    data.y = s.values;
    metrics["standardize"] = {{"mean", s.mean}, {"sd", s.sd}};
  }
  ChainConfig cc = cfg.chain;
  cc.seed = cfg.seed;
  PosteriorSamples samples = run_chain(data, cfg.hyper, cc);

  write_draws_csv(out_path(cfg, "draws.csv").string(), samples.draws);
  std::vector<std::vector<int>> labels_h, labels_l;
  for (const auto& d : samples.draws) {
    labels_h.push_back(d.pair.gamma_h);
    labels_l.push_back(d.pair.gamma_l);
  }
  write_labels_csv(out_path(cfg, "labels_h.csv").string(), labels_h);
  write_labels_csv(out_path(cfg, "labels_l.csv").string(), labels_l);

  metrics["n_draws"] = samples.draws.size();
  metrics["accept"] = {{"tables", samples.tables.rate()},
                       {"dishes", samples.dishes.rate()},
                       {"restaurants", samples.restaurants.rate()},
                       {"alpha0", samples.alpha[0].rate()},
                       {"alpha1", samples.alpha[1].rate()},
                       {"alpha2", samples.alpha[2].rate()},
                       {"swaps", samples.swaps.rate()}};
  write_metrics(cfg, metrics);
}

void mode_summarize(const RunConfig& cfg) {
  if (cfg.input.empty()) throw DataError("summarize needs --input");
  std::string fit_dir = cfg.fit_dir.empty() ? cfg.out_dir : cfg.fit_dir;
  TwoLevelDataset data = ingest_table(cfg.input);
  auto labels_h = read_labels_csv((std::filesystem::path(fit_dir) / "labels_h.csv").string());
  auto labels_l = read_labels_csv((std::filesystem::path(fit_dir) / "labels_l.csv").string());
  if (labels_h.empty() || labels_l.empty())
    throw DataError("summarize: no retained draws in " + fit_dir);

  PartitionPair est;
  est.gamma_h = minvi_point_estimate(labels_h);
  est.gamma_l = minvi_point_estimate(labels_l);
  write_partition_csv(out_path(cfg, "partition_estimate.csv").string(), data, est);

  // Choropleth companion: cluster means of the raw densities, original scale.
  int kh = count_clusters(est.gamma_h);
  std::vector<double> sum(kh, 0.0);
  std::vector<int> cnt(kh, 0);
  for (int i = 0; i < data.n_units(); ++i) {
    sum[est.gamma_h[i]] += data.y[i];
    ++cnt[est.gamma_h[i]];
  }
  for (int k = 0; k < kh; ++k) sum[k] /= cnt[k];
  std::vector<std::string> ids;
  for (int i = 0; i < data.n_units(); ++i) ids.push_back(data.unit_ids[i]);
  write_cluster_means_csv(out_path(cfg, "cluster_means.csv").string(), ids,
                          est.gamma_h, sum);

  json metrics;
  metrics["n_clusters_h"] = kh;
  metrics["n_clusters_l"] = count_clusters(est.gamma_l);
  metrics["mean_vi_h"] = mean_vi_to_draws(est.gamma_h, labels_h);
  metrics["mean_vi_l"] = mean_vi_to_draws(est.gamma_l, labels_l);
  write_metrics(cfg, metrics);
}

void mode_eval(const RunConfig& cfg) {
  if (cfg.estimate.empty() || cfg.truth.empty())
    throw DataError("eval needs --estimate and --truth");
  PartitionPair est = read_partition_csv(cfg.estimate);
  PartitionPair truth = read_partition_csv(cfg.truth);
  json metrics;
  metrics["vi_gamma_h"] = vi_distance(est.gamma_h, truth.gamma_h);
  metrics["vi_gamma_l"] = vi_distance(est.gamma_l, truth.gamma_l);
  write_metrics(cfg, metrics);
  std::cout << "vi_gamma_h " << metrics["vi_gamma_h"].get<double>() << "\n"
            << "vi_gamma_l " << metrics["vi_gamma_l"].get<double>() << "\n";
}

void mode_baseline(const RunConfig& cfg) {
  if (cfg.input.empty()) throw DataError("baseline needs --input");
  TwoLevelDataset data = ingest_table(cfg.input);
  PartitionPair pair = multilevel_kmeans(data, cfg.kmax, cfg.seed);
  write_partition_csv(out_path(cfg, "partition_baseline.csv").string(), data, pair);
  json metrics;
  metrics["k_h"] = count_clusters(pair.gamma_h);
  metrics["k_l"] = count_clusters(pair.gamma_l);
  write_metrics(cfg, metrics);
}

void mode_prior_check(const RunConfig& cfg) {
  if (cfg.prior_groups < 2 || cfg.prior_units < 1)
    throw DataError("prior-check needs at least 2 groups of 1 unit");
  std::vector<std::vector<double>> groups(cfg.prior_groups,
                                          std::vector<double>(cfg.prior_units, 0.0));
  TwoLevelDataset data = make_dataset(groups);

  Hyperparams hp = cfg.hyper;
  hp.alpha_prior.reset();   // the check targets fixed concentrations
  hp.sigma2_prior.reset();
  ChainConfig cc = cfg.chain;
  cc.seed = cfg.seed;
  cc.prior_only = true;
  PosteriorSamples samples = run_chain(data, hp, cc);

  long together = 0;
  for (const auto& d : samples.draws)
    together += d.pair.gamma_l[0] == d.pair.gamma_l[1] ? 1 : 0;
  double freq = static_cast<double>(together) / samples.draws.size();
  double target = 1.0 / (1.0 + hp.alpha2);
  std::cout << "co-clustering frequency " << freq << " target " << target << "\n";
  json metrics;
  metrics["frequency"] = freq;
  metrics["target"] = target;
  write_metrics(cfg, metrics);
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  require_known_keys(j,
                     {"mode", "input", "points", "polygons", "estimate", "truth",
                      "fit_dir", "out_dir", "standardize", "seed", "framework",
                      "fw1", "fw2", "hyper", "chain", "kmax", "prior_groups",
                      "prior_units"},
                     path);
  RunConfig cfg;
  if (j.contains("mode")) cfg.mode = j.at("mode").get<std::string>();
  if (j.contains("input")) cfg.input = j.at("input").get<std::string>();
  if (j.contains("points")) cfg.points = j.at("points").get<std::string>();
  if (j.contains("polygons")) cfg.polygons = j.at("polygons").get<std::string>();
  if (j.contains("estimate")) cfg.estimate = j.at("estimate").get<std::string>();
  if (j.contains("truth")) cfg.truth = j.at("truth").get<std::string>();
  if (j.contains("fit_dir")) cfg.fit_dir = j.at("fit_dir").get<std::string>();
  if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("standardize")) cfg.standardize_input = j.at("standardize").get<bool>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("framework")) cfg.framework = j.at("framework").get<std::string>();
  if (j.contains("fw1")) {
    const json& f = j.at("fw1");
    require_known_keys(f, {"n_groups", "units_per_group"}, "fw1");
    if (f.contains("n_groups")) cfg.fw1.n_groups = f.at("n_groups").get<int>();
    if (f.contains("units_per_group"))
      cfg.fw1.units_per_group = f.at("units_per_group").get<int>();
  }
  if (j.contains("fw2")) {
    const json& f = j.at("fw2");
    require_known_keys(f,
                       {"n_groups", "units_per_group", "alpha0", "alpha1",
                        "alpha2", "kappa", "sigma", "min_tv"},
                       "fw2");
    if (f.contains("n_groups")) cfg.fw2.n_groups = f.at("n_groups").get<int>();
    if (f.contains("units_per_group"))
      cfg.fw2.units_per_group = f.at("units_per_group").get<int>();
    if (f.contains("alpha0")) cfg.fw2.alpha0 = f.at("alpha0").get<double>();
    if (f.contains("alpha1")) cfg.fw2.alpha1 = f.at("alpha1").get<double>();
    if (f.contains("alpha2")) cfg.fw2.alpha2 = f.at("alpha2").get<double>();
    if (f.contains("kappa")) cfg.fw2.kappa = f.at("kappa").get<double>();
    if (f.contains("sigma")) cfg.fw2.sigma = f.at("sigma").get<double>();
    if (f.contains("min_tv")) cfg.fw2.min_tv = f.at("min_tv").get<double>();
  }
  if (j.contains("hyper")) load_hyper(j.at("hyper"), cfg.hyper);
  if (j.contains("chain")) load_chain(j.at("chain"), cfg.chain);
  if (j.contains("kmax")) cfg.kmax = j.at("kmax").get<int>();
  if (j.contains("prior_groups")) cfg.prior_groups = j.at("prior_groups").get<int>();
  if (j.contains("prior_units")) cfg.prior_units = j.at("prior_units").get<int>();
  return cfg;
}

void run(const RunConfig& cfg) {
  try {
    cfg.hyper.check();
    std::filesystem::create_directories(cfg.out_dir);
    if (cfg.mode == "ingest")
      mode_ingest(cfg);
    else if (cfg.mode == "synth")
      mode_synth(cfg);
    else if (cfg.mode == "fit")
      mode_fit(cfg);
    else if (cfg.mode == "summarize")
      mode_summarize(cfg);
    else if (cfg.mode == "eval")
      mode_eval(cfg);
    else if (cfg.mode == "baseline")
      mode_baseline(cfg);
    else if (cfg.mode == "prior-check")
      mode_prior_check(cfg);
    else
      throw DataError("unknown mode '" + cfg.mode + "'");
    write_manifest(cfg);
  } catch (const DataError& e) {
    throw DataError(cfg.mode + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(cfg.mode + ": " + e.what());
  }
}

}  // namespace nhdp
