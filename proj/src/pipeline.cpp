#include "cyclomdp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "cyclomdp/chain.hpp"
#include "cyclomdp/discretize.hpp"
#include "cyclomdp/error.hpp"
#include "cyclomdp/hydro.hpp"
#include "cyclomdp/mdp.hpp"
#include "cyclomdp/model_io.hpp"
#include "cyclomdp/quantile.hpp"
#include "cyclomdp/series.hpp"
#include "cyclomdp/simulate.hpp"
#include "cyclomdp/synth.hpp"
#include "cyclomdp/wind.hpp"

namespace cyclomdp {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const json& req(const json& j, const char* key, const char* scope) {
  if (!j.contains(key))
    fail(strf("config: missing required field '%s.%s'", scope, key));
  return j.at(key);
}

std::string num(double v) { return strf("%.17g", v); }

std::uint64_t fnv_string(std::string_view s, std::uint64_t h) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double percentile(std::vector<double> values, double pct) {
  require(!values.empty(), "percentile: empty");
  std::sort(values.begin(), values.end());
  double rank = pct / 100.0 * static_cast<double>(values.size());
  std::size_t idx = static_cast<std::size_t>(std::ceil(rank));
  idx = std::min(std::max<std::size_t>(idx, 1), values.size());
  return values[idx - 1];
}

// Everything the stages share within one invocation. Heavy in-memory
// artifacts (kernel, MDP) are cached so one `run` builds them once.
struct Ctx {
  json config;
  std::string case_name;
  Stage active = Stage::Data;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool force = false;

  TimeMap time_map;
  double period_steps = 0;  // driver period in model time units

  std::optional<Series> data;
  std::optional<QuantileFamily> family;
  std::optional<PeriodicTransitionModel> chain;
  std::optional<InflowKernel> kernel;
  std::optional<MdpSpec> mdp;
  std::optional<MdpSolution> solution;
  std::optional<MdpSolution> restricted;

  std::string path(const std::string& name) const {
    return (fs::path(out_dir) / name).string();
  }
};

std::vector<Observation> to_observations(const Ctx& ctx) {
  std::vector<Observation> obs;
  obs.reserve(ctx.data->records.size());
  for (const auto& rec : ctx.data->records)
    obs.push_back({ctx.time_map.to_model_time(rec.timestamp), rec.value});
  return obs;
}

void write_series_csv(const Series& series, const std::string& path) {
  std::string out = "timestamp,value\n";
  for (const auto& rec : series.records)
    out += format_iso8601(rec.timestamp) + "," + num(rec.value) + "\n";
  write_text_atomic(path, out);
}

Series load_series_artifact(const std::string& path, const std::string& unit) {
  SeriesSchema schema;
  schema.time_column = "timestamp";
  schema.value_column = "value";
  schema.time_format = TimeFormat::Iso8601;
  schema.unit = unit;
  return ingest_csv(path, schema);
}

// ---------------------------------------------------------------------------
// stage stamps

std::uint64_t stage_input_hash(const Ctx& ctx, Stage stage,
                               std::span<const std::string> input_files) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv_string(ctx.config.dump(), h);
  h = fnv_string(strf("seed=%llu", static_cast<unsigned long long>(ctx.seed)),
                 h);
  h = fnv_string(to_string(stage), h);
  for (const auto& f : input_files) {
    h = fnv_string(f, h);
    h ^= hash_file(ctx.path(f));
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool stage_is_current(const Ctx& ctx, Stage stage, std::uint64_t input_hash,
                      std::span<const std::string> outputs) {
  if (ctx.force) return false;
  std::string stamp_path = ctx.path(strf("stamps/%s.stamp", to_string(stage)));
  std::ifstream in(stamp_path);
  if (!in.good()) return false;
  std::string recorded;
  std::getline(in, recorded);
  if (recorded != strf("%016llx", static_cast<unsigned long long>(input_hash)))
    return false;
  for (const auto& f : outputs)
    if (!fs::exists(ctx.path(f))) return false;
  return true;
}

void write_stamp(const Ctx& ctx, Stage stage, std::uint64_t input_hash) {
  fs::create_directories(fs::path(ctx.out_dir) / "stamps");
  write_text_atomic(
      ctx.path(strf("stamps/%s.stamp", to_string(stage))),
      strf("%016llx\n", static_cast<unsigned long long>(input_hash)));
}

// ---------------------------------------------------------------------------
// configuration loading

Ctx make_context(const PipelineOptions& opts) {
  Ctx ctx;
  std::ifstream in(opts.config_path);
  require(in.good(),
          strf("cannot open config '%s'", opts.config_path.c_str()));
  try {
    ctx.config = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const std::exception& e) {
    fail(strf("config '%s' is not valid JSON: %s", opts.config_path.c_str(),
              e.what()));
  }
  ctx.case_name = req(ctx.config, "case", "").get<std::string>();
  require(ctx.case_name == "hydro" || ctx.case_name == "wind",
          strf("config: unknown case '%s'", ctx.case_name.c_str()));
  ctx.out_dir = opts.output_dir_override.empty()
                    ? req(ctx.config, "output_dir", "").get<std::string>()
                    : opts.output_dir_override;
  ctx.seed = opts.has_seed_override
                 ? opts.seed_override
                 : req(ctx.config, "seed", "").get<std::uint64_t>();
  ctx.force = opts.force;

  const json& time = req(ctx.config, "time", "");
  ctx.time_map.unit_seconds =
      req(time, "unit_hours", "time").get<double>() * 3600.0;
  ctx.period_steps = req(time, "period_steps", "time").get<double>();
  if (time.contains("epoch"))
    ctx.time_map.epoch = parse_iso8601(time.at("epoch").get<std::string>());

  fs::create_directories(ctx.out_dir);
  return ctx;
}

SeriesSchema schema_from_config(const json& j, const char* scope) {
  SeriesSchema schema;
  schema.time_column = req(j, "time_column", scope).get<std::string>();
  schema.value_column = req(j, "value_column", scope).get<std::string>();
  std::string fmt = req(j, "time_format", scope).get<std::string>();
  require(fmt == "iso8601" || fmt == "epoch_seconds",
          strf("config: %s.time_format must be iso8601 or epoch_seconds",
               scope));
  schema.time_format =
      fmt == "iso8601" ? TimeFormat::Iso8601 : TimeFormat::EpochSeconds;
  schema.unit = j.value("unit", "");
  schema.drop_missing = j.value("missing_policy", "drop") == "drop";
  return schema;
}

Series load_input_series(const json& source, const char* scope,
                         std::uint64_t seed) {
  if (source.contains("csv")) {
    const json& csv = source.at("csv");
    return ingest_csv(req(csv, "path", scope).get<std::string>(),
                      schema_from_config(csv, scope));
  }
  const json& synth = req(source, "synthetic", scope);
  std::string kind = req(synth, "kind", scope).get<std::string>();
  int years = req(synth, "years", scope).get<int>();
  std::uint64_t synth_seed = synth.value("seed", seed);
  if (kind == "hydro_inflow") return synth_hydro_inflow(years, synth_seed);
  if (kind == "demand") return synth_demand(years, synth_seed);
  if (kind == "wind_speed") return synth_wind_speed(years, synth_seed);
  fail(strf("config: unknown synthetic kind '%s'", kind.c_str()));
}

HydroSystemSpec hydro_spec_from_config(const json& config) {
  const json& s = req(config, "system", "");
  HydroSystemSpec spec;
  spec.demand_mw = req(s, "demand_mw", "system").get<double>();
  spec.thermal_capacity_mw =
      req(s, "thermal_capacity_mw", "system").get<double>();
  spec.thermal_block_mw = req(s, "thermal_block_mw", "system").get<double>();
  spec.hydro_capacity_mw =
      req(s, "hydro_capacity_mw", "system").get<double>();
  spec.reservoir_capacity_gwh =
      req(s, "reservoir_capacity_gwh", "system").get<double>();
  spec.storage_block_gwh =
      req(s, "storage_block_gwh", "system").get<double>();
  spec.thermal_cost_per_mwh =
      req(s, "thermal_cost_per_mwh", "system").get<double>();
  spec.unserved_cost_per_mwh =
      req(s, "unserved_cost_per_mwh", "system").get<double>();
  spec.hours_per_step = req(s, "hours_per_step", "system").get<double>();
  spec.period_steps = static_cast<int>(
      req(config.at("time"), "period_steps", "time").get<double>());
  spec.validate();
  return spec;
}

WindSystemSpec wind_spec_from_config(const json& config) {
  const json& s = req(config, "system", "");
  WindSystemSpec spec;
  spec.turbine_rated_mw = req(s, "turbine_rated_mw", "system").get<double>();
  spec.turbine_count = req(s, "turbine_count", "system").get<int>();
  const json& pc = req(s, "power_curve", "system");
  spec.power_curve.cut_in_ms =
      req(pc, "cut_in", "system.power_curve").get<double>();
  spec.power_curve.rated_ms =
      req(pc, "rated_speed", "system.power_curve").get<double>();
  spec.power_curve.cut_out_ms =
      req(pc, "cut_out", "system.power_curve").get<double>();
  spec.ccgt_capacity_mw = req(s, "ccgt_capacity_mw", "system").get<double>();
  spec.ccgt_ramp_mw = req(s, "ccgt_ramp_mw", "system").get<double>();
  spec.production_cost_per_mwh =
      req(s, "production_cost_per_mwh", "system").get<double>();
  spec.unserved_cost_per_mwh =
      req(s, "unserved_cost_per_mwh", "system").get<double>();
  spec.net_demand_block_mw =
      req(s, "net_demand_block_mw", "system").get<double>();
  spec.validate();
  return spec;
}

BasisSpec quantile_basis_from_config(const Ctx& ctx) {
  const json& q = req(ctx.config, "quantiles", "");
  int order = req(q, "harmonic_order", "quantiles").get<int>();
  if (ctx.case_name == "hydro")
    return build_basis({ctx.period_steps}, order);
  return build_basis({8760.0 / ctx.time_map.unit_seconds * 3600.0, 24.0},
                     order, q.value("cross_terms", true));
}

BasisSpec transition_basis_from_config(const Ctx& ctx) {
  const json& t = req(ctx.config, "transitions", "");
  int order = req(t, "harmonic_order", "transitions").get<int>();
  double period =
      ctx.case_name == "hydro" ? ctx.period_steps : 8760.0;
  if (order == 0) return constant_basis(period);
  return build_basis({period}, order);
}

std::vector<double> quantile_levels_from_config(const Ctx& ctx) {
  return req(req(ctx.config, "quantiles", ""), "levels", "quantiles")
      .get<std::vector<double>>();
}

// ---------------------------------------------------------------------------
// stages

void ensure_data(Ctx& ctx);
void ensure_quantiles(Ctx& ctx);
void ensure_transitions(Ctx& ctx);
void ensure_build(Ctx& ctx);
void ensure_solve(Ctx& ctx);
void ensure_simulate(Ctx& ctx);
void ensure_compare(Ctx& ctx);
void ensure_report(Ctx& ctx);

void ensure_data(Ctx& ctx) {
  ctx.active = Stage::Data;
  const std::vector<std::string> outputs =
      ctx.case_name == "hydro"
          ? std::vector<std::string>{"data.csv"}
          : std::vector<std::string>{"data.csv", "data_demand.csv",
                                     "data_wind_speed.csv"};
  std::uint64_t h = stage_input_hash(ctx, Stage::Data, {});
  if (!stage_is_current(ctx, Stage::Data, h, outputs)) {
    const json& data = req(ctx.config, "data", "");
    if (ctx.case_name == "hydro") {
      Series inflow = load_input_series(data, "data", ctx.seed);
      write_series_csv(inflow, ctx.path("data.csv"));
    } else {
      Series demand =
          load_input_series(req(data, "demand", "data"), "data.demand",
                            ctx.seed);
      Series speed = load_input_series(req(data, "wind_speed", "data"),
                                       "data.wind_speed", ctx.seed + 1);
      WindSystemSpec spec = wind_spec_from_config(ctx.config);
      std::pair<int, int> unmatched;
      Series nd = net_demand(demand, speed, spec, &unmatched);
      if (unmatched.first + unmatched.second > 0)
        std::cerr << strf("note: net_demand dropped %d demand / %d wind "
                          "records without a matching timestamp\n",
                          unmatched.first, unmatched.second);
      write_series_csv(demand, ctx.path("data_demand.csv"));
      write_series_csv(speed, ctx.path("data_wind_speed.csv"));
      write_series_csv(nd, ctx.path("data.csv"));
    }
    write_stamp(ctx, Stage::Data, h);
  }
  if (!ctx.data) {
    ctx.data = load_series_artifact(ctx.path("data.csv"),
                                    ctx.case_name == "hydro" ? "MW" : "MW");
    if (ctx.time_map.epoch == 0 && !ctx.config.at("time").contains("epoch"))
      ctx.time_map.epoch = ctx.data->records.front().timestamp;
  }
}

void ensure_quantiles(Ctx& ctx) {
  ensure_data(ctx);
  ctx.active = Stage::Quantiles;
  const std::vector<std::string> outputs = {"quantiles.json",
                                            "quantile_curves.csv",
                                            "quantile_stats.csv"};
  std::vector<std::string> inputs = {"data.csv"};
  std::uint64_t h = stage_input_hash(ctx, Stage::Quantiles, inputs);
  if (!stage_is_current(ctx, Stage::Quantiles, h, outputs)) {
    auto obs = to_observations(ctx);
    BasisSpec basis = quantile_basis_from_config(ctx);
    auto levels = quantile_levels_from_config(ctx);
    std::vector<QuantileCurve> curves;
    std::string stats = "level,pinball_objective,pseudo_r2,lp_iterations\n";
    for (double level : levels) {
      QuantileFit fit = fit_quantile(obs, level, basis);
      stats += num(level) + "," + num(fit.objective) + "," +
               num(pseudo_r2(fit.curve, obs)) + "," +
               strf("%d", fit.lp_iterations) + "\n";
      curves.push_back(std::move(fit.curve));
    }
    QuantileFamily family = make_family(std::move(curves));
    auto grid = phase_grid(family.basis(), 1024);
    family = repair_crossings(family, grid);
    save_quantile_family(family, ctx.path("quantiles.json"));

    std::string csv = "t";
    for (double level : levels) csv += ",q" + num(level);
    csv += "\n";
    for (double t : grid) {
      csv += num(t);
      for (const auto& curve : family.curves)
        csv += "," + num(eval_quantile(curve, t));
      csv += "\n";
    }
    write_text_atomic(ctx.path("quantile_curves.csv"), csv);
    write_text_atomic(ctx.path("quantile_stats.csv"), stats);
    write_stamp(ctx, Stage::Quantiles, h);
  }
  if (!ctx.family)
    ctx.family = load_quantile_family(ctx.path("quantiles.json"));
}

void ensure_transitions(Ctx& ctx) {
  ensure_quantiles(ctx);
  ctx.active = Stage::Transitions;
  const std::vector<std::string> outputs = {"transitions.json",
                                            "transition_curves.csv"};
  std::vector<std::string> inputs = {"data.csv", "quantiles.json"};
  std::uint64_t h = stage_input_hash(ctx, Stage::Transitions, inputs);
  if (!stage_is_current(ctx, Stage::Transitions, h, outputs)) {
    auto obs = to_observations(ctx);
    TransitionObservations tobs = observe_series(*ctx.family, obs);
    Eigen::VectorXd pi = stationary_from_levels(ctx.family->levels());
    BasisSpec basis = transition_basis_from_config(ctx);
    PeriodicTransitionModel model =
        fit_periodic_transitions(tobs, pi, basis);
    validate_transition_model(model);
    save_transition_model(model, ctx.path("transitions.json"));

    std::string csv = "t,from,to,p\n";
    const int m = model.num_states;
    auto grid = phase_grid(basis, 512);
    for (double t : grid) {
      Eigen::MatrixXd P = eval_transition(model, t);
      for (int i = 1; i <= m; ++i)
        for (int j = 1; j <= m; ++j)
          csv += num(t) + "," + strf("%d,%d,", i, j) + num(P(i - 1, j - 1)) +
                 "\n";
    }
    write_text_atomic(ctx.path("transition_curves.csv"), csv);
    write_stamp(ctx, Stage::Transitions, h);
  }
  if (!ctx.chain)
    ctx.chain = load_transition_model(ctx.path("transitions.json"));
}

BlockOptions block_options_from_config(const Ctx& ctx) {
  const json& blocks = req(ctx.config, "blocks", "");
  BlockOptions opts;
  std::vector<double> values;
  values.reserve(ctx.data->records.size());
  for (const auto& rec : ctx.data->records) values.push_back(rec.value);
  opts.cap = percentile(values, blocks.value("cap_percentile", 99.5));
  if (blocks.contains("floor_percentile")) {
    double block = ctx.case_name == "hydro"
                       ? hydro_spec_from_config(ctx.config).thermal_block_mw
                       : wind_spec_from_config(ctx.config).net_demand_block_mw;
    double raw = percentile(values, blocks.at("floor_percentile").get<double>());
    opts.floor = std::floor(raw / block) * block;
  }
  return opts;
}

void build_kernel(Ctx& ctx) {
  if (ctx.kernel) return;
  auto obs = to_observations(ctx);
  auto samples = normalized_samples_by_state(*ctx.family, obs);
  BlockOptions bopts = block_options_from_config(ctx);
  if (ctx.case_name == "hydro") {
    HydroSystemSpec spec = hydro_spec_from_config(ctx.config);
    ctx.kernel = compose_inflow_kernel(*ctx.chain, *ctx.family,
                                       spec.thermal_block_mw, samples,
                                       spec.period_steps, bopts);
  } else {
    WindSystemSpec spec = wind_spec_from_config(ctx.config);
    const json& grid_cfg = req(ctx.config, "grid", "");
    int days = req(grid_cfg, "representative_days", "grid").get<int>();
    auto grid = ccgt_time_grid(days);
    ctx.kernel = compose_inflow_kernel(*ctx.chain, *ctx.family,
                                       spec.net_demand_block_mw, samples,
                                       static_cast<int>(grid.size()), bopts,
                                       grid);
  }
}

void build_mdp(Ctx& ctx) {
  if (ctx.mdp) return;
  build_kernel(ctx);
  if (ctx.case_name == "hydro")
    ctx.mdp = build_hydro_mdp(hydro_spec_from_config(ctx.config), *ctx.kernel);
  else
    ctx.mdp = build_ccgt_mdp(wind_spec_from_config(ctx.config), *ctx.kernel);
}

void ensure_build(Ctx& ctx) {
  ensure_transitions(ctx);
  ctx.active = Stage::BuildMdp;
  const std::vector<std::string> outputs = {"blocks.csv", "mdp_info.json"};
  std::vector<std::string> inputs = {"data.csv", "quantiles.json",
                                     "transitions.json"};
  std::uint64_t h = stage_input_hash(ctx, Stage::BuildMdp, inputs);
  if (!stage_is_current(ctx, Stage::BuildMdp, h, outputs)) {
    build_mdp(ctx);
    std::string csv = "t,state,multiple,prob\n";
    for (int t = 0; t < ctx.kernel->period; ++t)
      for (int i = 1; i <= ctx.kernel->num_states; ++i) {
        const auto& bd = ctx.kernel->dist[t][i - 1];
        for (std::size_t b = 0; b < bd.support.size(); ++b)
          csv += strf("%d,%d,", t, i) + num(bd.support[b]) + "," +
                 num(bd.probs[b]) + "\n";
      }
    write_text_atomic(ctx.path("blocks.csv"), csv);

    int allowed = 0;
    for (int t = 0; t < ctx.mdp->period; ++t)
      for (int i = 0; i < ctx.mdp->num_states; ++i)
        for (int k = 0; k < ctx.mdp->num_actions; ++k)
          allowed += ctx.mdp->allowed(t, i, k);
    json info;
    info["num_states"] = ctx.mdp->num_states;
    info["num_actions"] = ctx.mdp->num_actions;
    info["period"] = ctx.mdp->period;
    info["lp_variables"] = allowed;
    info["lp_rows"] = ctx.mdp->period * (1 + ctx.mdp->num_states);
    write_text_atomic(ctx.path("mdp_info.json"), info.dump(2) + "\n");
    write_stamp(ctx, Stage::BuildMdp, h);
  }
}

int internal_level_count(const Ctx& ctx) {
  return ctx.case_name == "hydro"
             ? hydro_spec_from_config(ctx.config).num_storage_levels()
             : wind_spec_from_config(ctx.config).num_thermal_levels();
}

void write_policy_csv(const Ctx& ctx, const Policy& policy,
                      const std::string& file) {
  const int levels = internal_level_count(ctx);
  std::string csv = "t,state,driver_state,internal_level,action,d\n";
  for (int t = 0; t < policy.period; ++t)
    for (int i = 0; i < policy.num_states; ++i)
      for (int k = 0; k < policy.num_actions; ++k) {
        double d = policy.at(t, i, k);
        if (d == 0.0) continue;
        csv += strf("%d,%d,%d,%d,%d,", t, i, i / levels + 1, i % levels, k) +
               num(d) + "\n";
      }
  write_text_atomic(ctx.path(file), csv);
}

void write_occupancy_csvs(const Ctx& ctx, const OccupancyMeasure& y) {
  const int levels = internal_level_count(ctx);
  auto marginals = occupancy_summary(y);
  std::string csv = "t,state,driver_state,internal_level,mass\n";
  for (int t = 0; t < y.period; ++t)
    for (int i = 0; i < y.num_states; ++i) {
      if (marginals[t][i] <= 0.0) continue;
      csv += strf("%d,%d,%d,%d,", t, i, i / levels + 1, i % levels) +
             num(marginals[t][i]) + "\n";
    }
  write_text_atomic(ctx.path("occupancy.csv"), csv);

  // marginal over the internal (storage / thermal) level
  std::string lcsv = "t,internal_level,mass\n";
  for (int t = 0; t < y.period; ++t) {
    std::vector<double> mass(levels, 0.0);
    for (int i = 0; i < y.num_states; ++i)
      mass[i % levels] += marginals[t][i];
    for (int l = 0; l < levels; ++l)
      lcsv += strf("%d,%d,", t, l) + num(mass[l]) + "\n";
  }
  write_text_atomic(ctx.path("level_occupancy.csv"), lcsv);
}

void write_decision_grid(const Ctx& ctx, const Policy& policy,
                         const std::string& file) {
  const int levels = internal_level_count(ctx);
  // modal action per (t, state), heatmap-ready
  std::string csv = "t,driver_state,internal_level,action\n";
  for (int t = 0; t < policy.period; ++t)
    for (int i = 0; i < policy.num_states; ++i) {
      int best = 0;
      for (int k = 1; k < policy.num_actions; ++k)
        if (policy.at(t, i, k) > policy.at(t, i, best)) best = k;
      csv += strf("%d,%d,%d,%d\n", t, i / levels + 1, i % levels, best);
    }
  write_text_atomic(ctx.path(file), csv);
}

// Reload a persisted solve so an up-to-date stage is never recomputed.
MdpSolution load_solution_artifacts(const Ctx& ctx) {
  std::ifstream info_in(ctx.path("mdp_info.json"));
  json info = json::parse(info_in);
  MdpSolution sol;
  int S = info.at("num_states").get<int>();
  int A = info.at("num_actions").get<int>();
  int T = info.at("period").get<int>();
  sol.policy.num_states = S;
  sol.policy.num_actions = A;
  sol.policy.period = T;
  sol.policy.d.assign(static_cast<std::size_t>(S) * A * T, 0.0);
  sol.occupancy.num_states = S;
  sol.occupancy.num_actions = A;
  sol.occupancy.period = T;
  sol.occupancy.y.assign(sol.policy.d.size(), 0.0);

  std::ifstream pol(ctx.path("policy.csv"));
  std::string line;
  std::getline(pol, line);  // header
  while (std::getline(pol, line)) {
    int t, i, drv, internal, k;
    double d;
    require(std::sscanf(line.c_str(), "%d,%d,%d,%d,%d,%lf", &t, &i, &drv,
                        &internal, &k, &d) == 6,
            "policy.csv: malformed row");
    sol.policy.at(t, i, k) = d;
  }
  std::ifstream occ(ctx.path("occupancy.csv"));
  std::getline(occ, line);
  while (std::getline(occ, line)) {
    int t, i, drv, internal;
    double mass;
    require(std::sscanf(line.c_str(), "%d,%d,%d,%d,%lf", &t, &i, &drv,
                        &internal, &mass) == 5,
            "occupancy.csv: malformed row");
    sol.occupancy.at(t, i, 0) = mass;  // marginal; only sums over k are used
  }
  std::ifstream sj_in(ctx.path("solution.json"));
  json sj = json::parse(sj_in);
  sol.cycle_cost = sj.at("cycle_cost").get<double>();
  sol.lp_iterations = sj.at("lp_iterations").get<int>();
  return sol;
}

void ensure_solve(Ctx& ctx) {
  ensure_build(ctx);
  ctx.active = Stage::Solve;
  const std::vector<std::string> outputs = {
      "policy.csv", "occupancy.csv", "level_occupancy.csv",
      "decision_grid.csv", "solution.json"};
  std::vector<std::string> inputs = {"data.csv", "quantiles.json",
                                     "transitions.json", "mdp_info.json"};
  std::uint64_t h = stage_input_hash(ctx, Stage::Solve, inputs);
  if (!stage_is_current(ctx, Stage::Solve, h, outputs)) {
    build_mdp(ctx);
    if (ctx.config.value("dump_lp", false)) {
      std::ostringstream dump;
      write_lp_format(build_mdp_lp(*ctx.mdp).lp, dump);
      write_text_atomic(ctx.path("mdp.lp"), dump.str());
    }
    ctx.solution = solve_mdp(*ctx.mdp);
    write_policy_csv(ctx, ctx.solution->policy, "policy.csv");
    write_occupancy_csvs(ctx, ctx.solution->occupancy);
    write_decision_grid(ctx, ctx.solution->policy, "decision_grid.csv");
    json sol;
    sol["cycle_cost"] = ctx.solution->cycle_cost;
    sol["lp_iterations"] = ctx.solution->lp_iterations;
    write_text_atomic(ctx.path("solution.json"), sol.dump(2) + "\n");
    write_stamp(ctx, Stage::Solve, h);
  } else if (!ctx.solution) {
    ctx.solution = load_solution_artifacts(ctx);
  }
}

void ensure_simulate(Ctx& ctx) {
  ensure_solve(ctx);
  ctx.active = Stage::Simulate;
  const std::vector<std::string> outputs = {"paths.csv", "rollout_report.csv"};
  std::vector<std::string> inputs = {"transitions.json", "solution.json"};
  std::uint64_t h = stage_input_hash(ctx, Stage::Simulate, inputs);
  if (stage_is_current(ctx, Stage::Simulate, h, outputs)) return;
  build_kernel(ctx);

  const json& sim = req(ctx.config, "simulate", "");
  int cycles = req(sim, "cycles", "simulate").get<int>();
  int reps = req(sim, "replications", "simulate").get<int>();
  std::int64_t horizon =
      static_cast<std::int64_t>(cycles) * ctx.kernel->period;

  std::string paths = "replicate,t,state,value\n";
  std::string report =
      "replicate,total_cost,total_unmet,cycles\n";
  std::unique_ptr<SystemModel> system;
  if (ctx.case_name == "hydro")
    system = std::make_unique<HydroSystem>(hydro_spec_from_config(ctx.config),
                                           ctx.kernel->num_states);
  else
    system = std::make_unique<CcgtSystem>(wind_spec_from_config(ctx.config),
                                          ctx.kernel->num_states,
                                          ctx.kernel->period);
  for (int rep = 0; rep < reps; ++rep) {
    std::uint64_t rep_seed = ctx.seed + 1000003ULL * (rep + 1);
    SamplePath driver =
        simulate_chain(*ctx.chain, *ctx.kernel, horizon, rep_seed);
    for (std::size_t i = 0; i < driver.times.size(); ++i)
      paths += strf("%d,", rep) + num(driver.times[i]) +
               strf(",%d,", driver.states[i]) + num(driver.values[i]) + "\n";
    RolloutOptions ropts;
    ropts.occupancy = &ctx.solution->occupancy;
    RolloutResult rr = rollout_policy(*system, ctx.solution->policy, driver,
                                      rep_seed, ropts);
    report += strf("%d,", rep) + num(rr.report.total_cost) + "," +
              num(rr.report.total_unmet) + "," +
              strf("%zu\n", rr.report.cost_per_cycle.size());
  }
  write_text_atomic(ctx.path("paths.csv"), paths);
  write_text_atomic(ctx.path("rollout_report.csv"), report);
  write_stamp(ctx, Stage::Simulate, h);
}

std::vector<int> sharing_classes(const Ctx& ctx) {
  std::string mode = req(req(ctx.config, "compare", ""), "sharing", "compare")
                         .get<std::string>();
  int T = ctx.kernel->period;
  std::vector<int> classes(T, 0);
  if (mode == "single_class") {
    // one decision rule for the whole cycle
  } else if (mode == "hour_of_day") {
    for (int t = 0; t < T; ++t) classes[t] = t % 24;
  } else if (mode == "none") {
    for (int t = 0; t < T; ++t) classes[t] = t;
  } else {
    fail(strf("config: compare.sharing '%s' not one of single_class, "
              "hour_of_day, none",
              mode.c_str()));
  }
  return classes;
}

void ensure_compare(Ctx& ctx) {
  ensure_solve(ctx);
  ctx.active = Stage::Compare;
  const std::vector<std::string> outputs = {"comparison.csv", "compare.json",
                                            "restricted_policy.csv",
                                            "restricted_decision_grid.csv"};
  std::vector<std::string> inputs = {"transitions.json", "solution.json"};
  std::uint64_t h = stage_input_hash(ctx, Stage::Compare, inputs);
  if (stage_is_current(ctx, Stage::Compare, h, outputs)) return;
  build_mdp(ctx);

  auto classes = sharing_classes(ctx);
  ctx.restricted = restrict_policy_sharing(*ctx.mdp, classes);
  write_policy_csv(ctx, ctx.restricted->policy, "restricted_policy.csv");
  write_decision_grid(ctx, ctx.restricted->policy,
                      "restricted_decision_grid.csv");

  const json& sim = req(ctx.config, "simulate", "");
  int cycles = req(sim, "cycles", "simulate").get<int>();
  int reps = req(sim, "replications", "simulate").get<int>();
  std::int64_t horizon =
      static_cast<std::int64_t>(cycles) * ctx.kernel->period;

  std::unique_ptr<SystemModel> system;
  if (ctx.case_name == "hydro")
    system = std::make_unique<HydroSystem>(hydro_spec_from_config(ctx.config),
                                           ctx.kernel->num_states);
  else
    system = std::make_unique<CcgtSystem>(wind_spec_from_config(ctx.config),
                                          ctx.kernel->num_states,
                                          ctx.kernel->period);

  double cost_free = 0, unmet_free = 0, cost_fixed = 0, unmet_fixed = 0;
  for (int rep = 0; rep < reps; ++rep) {
    std::uint64_t rep_seed = ctx.seed + 7000003ULL * (rep + 1);
    // common random numbers: one driver path and one action stream per rep
    SamplePath driver =
        simulate_chain(*ctx.chain, *ctx.kernel, horizon, rep_seed);
    RolloutOptions ropts;
    ropts.occupancy = &ctx.solution->occupancy;
    RolloutResult free_run =
        rollout_policy(*system, ctx.solution->policy, driver, rep_seed, ropts);
    RolloutResult fixed_run = rollout_policy(
        *system, ctx.restricted->policy, driver, rep_seed, ropts);
    cost_free += free_run.report.total_cost;
    unmet_free += free_run.report.total_unmet;
    cost_fixed += fixed_run.report.total_cost;
    unmet_fixed += fixed_run.report.total_unmet;
  }

  std::string table = "approach,total_extra,total_cost\n";
  table += "time-dependent plan," + num(unmet_free) + "," + num(cost_free) +
           "\n";
  table += "fixed plan," + num(unmet_fixed) + "," + num(cost_fixed) + "\n";
  write_text_atomic(ctx.path("comparison.csv"), table);

  json cj;
  cj["unrestricted_cycle_cost"] = ctx.solution->cycle_cost;
  cj["restricted_cycle_cost"] = ctx.restricted->cycle_cost;
  cj["restricted_method"] = ctx.restricted->note;
  cj["simulated_total_cost_time_dependent"] = cost_free;
  cj["simulated_total_cost_fixed"] = cost_fixed;
  cj["simulated_total_extra_time_dependent"] = unmet_free;
  cj["simulated_total_extra_fixed"] = unmet_fixed;
  write_text_atomic(ctx.path("compare.json"), cj.dump(2) + "\n");
  write_stamp(ctx, Stage::Compare, h);
}

void ensure_report(Ctx& ctx) {
  ensure_simulate(ctx);
  ensure_compare(ctx);
  ctx.active = Stage::Report;
  json manifest;
  manifest["case"] = ctx.case_name;
  manifest["figures"] = json::array();
  auto add = [&](const char* name, const char* file, const char* columns) {
    json f;
    f["name"] = name;
    f["file"] = file;
    f["columns"] = columns;
    manifest["figures"].push_back(f);
  };
  add("data_with_quantiles", "quantile_curves.csv", "t,q<level>...");
  add("raw_series", "data.csv", "timestamp,value");
  add("transition_probabilities", "transition_curves.csv", "t,from,to,p");
  add("simulated_paths", "paths.csv", "replicate,t,state,value");
  add("decision_grid", "decision_grid.csv",
      "t,driver_state,internal_level,action");
  add("restricted_decision_grid", "restricted_decision_grid.csv",
      "t,driver_state,internal_level,action");
  add("level_occupancy", "level_occupancy.csv", "t,internal_level,mass");
  add("cost_comparison", "comparison.csv", "approach,total_extra,total_cost");
  write_text_atomic(ctx.path("manifest.json"), manifest.dump(2) + "\n");

  std::ifstream sol(ctx.path("solution.json"));
  json sj = json::parse(sol);
  std::cout << strf("case %s: cycle cost %.6g", ctx.case_name.c_str(),
                    sj.at("cycle_cost").get<double>())
            << "\n";
}

void dispatch(Ctx& ctx, Stage stage) {
  switch (stage) {
    case Stage::Data: ensure_data(ctx); break;
    case Stage::Quantiles: ensure_quantiles(ctx); break;
    case Stage::Transitions: ensure_transitions(ctx); break;
    case Stage::BuildMdp: ensure_build(ctx); break;
    case Stage::Solve: ensure_solve(ctx); break;
    case Stage::Simulate: ensure_simulate(ctx); break;
    case Stage::Compare: ensure_compare(ctx); break;
    case Stage::Report: ensure_report(ctx); break;
  }
}

}  // namespace

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::Data: return "data";
    case Stage::Quantiles: return "fit-quantiles";
    case Stage::Transitions: return "fit-transitions";
    case Stage::BuildMdp: return "build-mdp";
    case Stage::Solve: return "solve";
    case Stage::Simulate: return "simulate";
    case Stage::Compare: return "compare";
    case Stage::Report: return "report";
  }
  return "?";
}

void run_pipeline(const PipelineOptions& opts, Stage upto) {
  Ctx ctx = make_context(opts);
  try {
    dispatch(ctx, upto);
  } catch (const std::exception& e) {
    fail(strf("stage %s: %s", to_string(ctx.active), e.what()));
  }
}

}  // namespace cyclomdp
