#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cyclomdp/error.hpp"
#include "cyclomdp/model_io.hpp"
#include "cyclomdp/pipeline.hpp"
#include "cyclomdp/series.hpp"
#include "cyclomdp/synth.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("-c,--config", args->config, "case configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("-o,--out-dir", args->out_dir,
                  "override the config's output directory");
  cmd->add_option("-s,--seed", args->seed, "override the config's seed")
      ->each([args](const std::string&) { args->seed_set = true; });
  cmd->add_flag("-f,--force", args->force,
                "recompute stages even when inputs are unchanged");
}

cyclomdp::PipelineOptions to_options(const CommonArgs& args) {
  cyclomdp::PipelineOptions opts;
  opts.config_path = args.config;
  opts.output_dir_override = args.out_dir;
  opts.has_seed_override = args.seed_set;
  opts.seed_override = args.seed;
  opts.force = args.force;
  return opts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "cyclomdp: periodic quantile models, cyclostationary Markov chains, "
      "and average-cost MDPs for energy scheduling studies"};
  app.require_subcommand(1);

  using cyclomdp::Stage;
  struct StageCmd {
    const char* name;
    const char* help;
    Stage stage;
  };
  const StageCmd stage_cmds[] = {
      {"fit-quantiles", "fit the periodic quantile curves", Stage::Quantiles},
      {"fit-transitions", "fit the time-inhomogeneous transition model",
       Stage::Transitions},
      {"build-mdp", "discretize and assemble the decision process",
       Stage::BuildMdp},
      {"solve", "solve the occupancy LP and extract the policy",
       Stage::Solve},
      {"simulate", "simulate sample paths and roll the policy out",
       Stage::Simulate},
      {"compare", "compare the time-dependent and shared (fixed) plans",
       Stage::Compare},
      {"report", "write the figure manifest and summary", Stage::Report},
      {"run", "run the full pipeline", Stage::Report},
  };

  std::vector<std::pair<CommonArgs, Stage>> invocations(std::size(stage_cmds));
  for (std::size_t i = 0; i < std::size(stage_cmds); ++i) {
    CLI::App* cmd = app.add_subcommand(stage_cmds[i].name, stage_cmds[i].help);
    invocations[i].second = stage_cmds[i].stage;
    add_common(cmd, &invocations[i].first);
    Stage stage = stage_cmds[i].stage;
    CommonArgs* args = &invocations[i].first;
    cmd->callback([args, stage]() {
      cyclomdp::run_pipeline(to_options(*args), stage);
    });
  }

  // Standalone synthetic-data emission, usable without a case config.
  struct {
    std::string kind;
    int years = 5;
    std::uint64_t seed = 1;
    std::string out;
  } synth_args;
  CLI::App* synth = app.add_subcommand(
      "synth", "write a synthetic series CSV (timestamp,value)");
  synth->add_option("-k,--kind", synth_args.kind, "generator")
      ->required()
      ->check(CLI::IsMember({"hydro_inflow", "demand", "wind_speed"}));
  synth->add_option("-y,--years", synth_args.years, "years of data");
  synth->add_option("-s,--seed", synth_args.seed, "generator seed");
  synth->add_option("-o,--out", synth_args.out, "output CSV path")->required();
  synth->callback([&synth_args]() {
    cyclomdp::Series series;
    if (synth_args.kind == "hydro_inflow")
      series = cyclomdp::synth_hydro_inflow(synth_args.years, synth_args.seed);
    else if (synth_args.kind == "demand")
      series = cyclomdp::synth_demand(synth_args.years, synth_args.seed);
    else
      series = cyclomdp::synth_wind_speed(synth_args.years, synth_args.seed);
    std::string csv = "timestamp,value\n";
    for (const auto& rec : series.records)
      csv += cyclomdp::format_iso8601(rec.timestamp) + "," +
             cyclomdp::strf("%.17g", rec.value) + "\n";
    cyclomdp::write_text_atomic(synth_args.out, csv);
    std::cout << synth_args.out << ": " << series.records.size()
              << " records\n";
  });

  try {
    CLI11_PARSE(app, argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
