#pragma once

#include <cstdint>
#include <string>

namespace cyclomdp {

// Stage names in execution order. `Compare` and `Report` sit after the core
// fit -> build -> solve -> simulate chain.
enum class Stage {
  Data,
  Quantiles,
  Transitions,
  BuildMdp,
  Solve,
  Simulate,
  Compare,
  Report
};
const char* to_string(Stage stage);

struct PipelineOptions {
  std::string config_path;
  std::string output_dir_override;  // empty: use the config's output_dir
  bool has_seed_override = false;
  std::uint64_t seed_override = 0;
  bool force = false;  // recompute even when stamps match
};

// Runs every stage up to and including `upto`. Stages whose input stamp
// matches a previous run are skipped, so re-runs are idempotent. A stage
// failure is reported as "stage <name>: <cause>".
void run_pipeline(const PipelineOptions& opts, Stage upto = Stage::Report);

}  // namespace cyclomdp
