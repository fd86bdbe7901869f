#pragma once

#include <cstdint>
#include <string>

#include "nhdp/hyperparams.hpp"
#include "nhdp/sampler.hpp"
#include "nhdp/synth.hpp"

namespace nhdp {

// Everything a CLI invocation resolves to. Loaded from a JSON config file
// and then overridden field by field from command-line flags, so the
// manifest's copy of this struct pins the run down completely.
struct RunConfig {
  std::string mode;       // ingest | synth | fit | summarize | eval | baseline | prior-check
  std::string input;      // table CSV (ingest, fit, summarize, baseline)
  std::string points;     // ingest from raw GPS points...
  std::string polygons;   // ...against a GeoJSON FeatureCollection
  std::string estimate;   // eval: partition CSV under test
  std::string truth;      // eval: reference partition CSV
  std::string fit_dir;    // summarize: directory with draws/labels (default out_dir)
  std::string out_dir = ".";
  bool standardize_input = true;
  std::uint64_t seed = 1;

  std::string framework = "fw1";  // synth: fw1 | fw2
  Framework1Config fw1;
  Framework2Config fw2;

  Hyperparams hyper = real_data_defaults();
  ChainConfig chain;

  int kmax = 20;          // baseline silhouette scan bound
  int prior_groups = 2;   // prior-check instance shape
  int prior_units = 2;
};

// Parses a config file; unknown keys are errors so typos do not silently
// fall back to defaults. Fields absent from the file keep their defaults.
RunConfig load_run_config(const std::string& path);

// Executes one mode end to end, writing outputs plus manifest.json under
// cfg.out_dir. Throws DataError for bad inputs and std::runtime_error
// otherwise, both prefixed with the failing mode.
void run(const RunConfig& cfg);

}  // namespace nhdp
