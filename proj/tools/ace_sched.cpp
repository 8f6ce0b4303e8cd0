///////////////////////////////////////////////////////////////////////////////
// ace_sched.cpp: Command-line front end for the adaptive gesture-detection
// stack. Subcommands: synth, profile, select, simulate, track, eval,
// plot-data. Every run writes a manifest next to its outputs. Exit codes:
// 0 success, 1 usage error, 2 data error.
///////////////////////////////////////////////////////////////////////////////

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ace/ace_profiler.hpp"
#include "ace/config_graph.hpp"
#include "ace/roi_tracker.hpp"
#include "ace/runtime_selector.hpp"
#include "ace/sim_harness.hpp"
#include "ace/temporal_metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct GlobalOptions {
  uint64_t seed = 0;
  std::string out_dir = ".";
  bool quiet = false;
};

struct Manifest {
  std::string subcommand;
  json flags = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

std::string timestamp_utc() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Relative output paths land inside --out-dir; absolute paths are honored.
std::string resolve_out(const GlobalOptions& global, const std::string& path) {
  const fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(global.out_dir) / p).string();
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_manifest(const GlobalOptions& global, const Manifest& manifest,
                    const std::string& started) {
  json doc;
  doc["subcommand"] = manifest.subcommand;
  doc["flags"] = manifest.flags;
  doc["inputs"] = manifest.inputs;
  doc["outputs"] = manifest.outputs;
  doc["seed"] = global.seed;
  doc["version"] = kVersion;
  doc["started"] = started;
  doc["finished"] = timestamp_utc();
  const std::string path =
      resolve_out(global, manifest.subcommand + ".manifest.json");
  write_text(path, doc.dump(2) + "\n");
  if (!global.quiet)
    std::cerr << "manifest: " << path << "\n";
}

uint64_t mix_seed(uint64_t seed, const std::string& tag, uint64_t extra = 0) {
  uint64_t h = seed ^ 0x9e3779b97f4a7c15ull ^ (extra * 0xff51afd7ed558ccdull);
  for (char c : tag) h = (h ^ static_cast<uint64_t>(c)) * 0x100000001b3ull;
  return h;
}

std::set<ace::synth::PLevel> parse_heads(const std::string& text) {
  std::set<ace::synth::PLevel> heads;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto level = ace::synth::parse_p_level(item);
    if (!level) throw std::runtime_error("unknown head level: " + item);
    heads.insert(*level);
  }
  if (heads.empty()) throw std::runtime_error("no head levels given");
  return heads;
}

std::vector<std::string> script_files(const std::string& path) {
  std::vector<std::string> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.path().extension() == ".json")
        files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  if (files.empty()) throw std::runtime_error("no scripts found in " + path);
  return files;
}

// ---------------------------------------------------------------- synth ----

struct SynthArgs {
  std::string base, out;
  double alpha = 1.0, beta = 1.0;
  int cmax = 1 << 30;
  std::string heads = "P3,P4,P5";
  bool simplify = false;
  bool report = false;
};

void run_synth(const GlobalOptions& global, const SynthArgs& args) {
  const std::string started = timestamp_utc();
  const ace::synth::DetectorGraph base =
      ace::synth::parse_config(read_text(args.base));
  ace::synth::FamilySpec spec;
  spec.alpha = args.alpha;
  spec.beta = args.beta;
  spec.c_max = args.cmax;
  spec.heads = parse_heads(args.heads);
  spec.simplify_attention = args.simplify;
  const ace::synth::DetectorGraph family =
      ace::synth::synthesize_family(base, spec);

  const std::string out = resolve_out(global, args.out);
  write_text(out, ace::synth::emit_config(family) + "\n");

  if (args.report) {
    const ace::synth::GraphReport report = ace::synth::summarize(family);
    json doc;
    doc["layer_count"] = report.layer_count;
    doc["total_channels"] = report.total_channels;
    doc["parameter_proxy"] = report.parameter_proxy;
    std::cout << doc.dump(2) << "\n";
  }

  Manifest manifest;
  manifest.subcommand = "synth";
  manifest.flags = {{"base", args.base},   {"alpha", args.alpha},
                    {"beta", args.beta},   {"cmax", args.cmax},
                    {"heads", args.heads}, {"simplify-attention", args.simplify}};
  manifest.inputs = {args.base};
  manifest.outputs = {out};
  write_manifest(global, manifest, started);
}

// -------------------------------------------------------------- profile ----

struct ProfileArgs {
  std::string grid = "default";
  std::string oracle, videos, out = "ace_profiles.json";
  std::vector<std::string> models;
  std::vector<int> resolutions;
  std::vector<int> strides;
};

void run_profile(const GlobalOptions& global, const ProfileArgs& args) {
  const std::string started = timestamp_utc();
  const ace::sim::OracleCalibration calib =
      ace::sim::load_calibration(args.oracle);

  std::vector<std::string> models = args.models;
  if (models.empty())
    for (const auto& [name, model] : calib.models) models.push_back(name);

  std::vector<int> resolutions = args.resolutions;
  std::vector<int> strides = args.strides;
  if (args.grid == "default") {
    if (resolutions.empty()) resolutions = ace::profiler::default_resolutions();
    if (strides.empty()) strides = ace::profiler::default_strides();
  }
  if (resolutions.empty() || strides.empty())
    throw std::runtime_error("grid needs resolutions and strides");

  const std::vector<std::string> files = script_files(args.videos);
  std::vector<ace::sim::GestureScript> scripts;
  std::vector<ace::profiler::GestureTimeline> timelines;
  for (const std::string& file : files)
    scripts.push_back(ace::sim::load_script(file));
  for (const ace::sim::GestureScript& script : scripts)
    timelines.push_back(ace::sim::script_to_timeline(script));

  const uint64_t seed = global.seed;
  const ace::profiler::OracleProvider provider =
      [&](const std::string& model, size_t video) {
        return std::make_unique<ace::sim::SyntheticOracle>(
            calib.models.at(model), scripts.at(video),
            mix_seed(seed, model, video));
      };
  const ace::profiler::FlopsLookup flops =
      [&](const std::string& model) -> std::optional<double> {
    return calib.models.at(model).g640;
  };

  ace::profiler::ProfilerOptions options;
  const ace::profiler::BuildResult result = ace::profiler::build_table(
      models, resolutions, strides, timelines, provider, options, flops);
  for (const ace::profiler::BuildWarning& w : result.warnings)
    std::cerr << "warning: " << w.point.model << "@" << w.point.resolution
              << "/" << w.point.stride << " video " << w.video_index << ": "
              << w.message << "\n";
  if (result.profiles.empty())
    throw std::runtime_error("no grid point profiled successfully");

  const std::string out = resolve_out(global, args.out);
  ace::profiler::save_profiles(out, result.profiles);
  if (!global.quiet)
    std::cerr << "profiled " << result.profiles.size() << " grid points -> "
              << out << "\n";

  Manifest manifest;
  manifest.subcommand = "profile";
  manifest.flags = {{"grid", args.grid}, {"oracle", args.oracle},
                    {"videos", args.videos}};
  manifest.inputs = {args.oracle};
  for (const std::string& file : files) manifest.inputs.push_back(file);
  manifest.outputs = {out};
  write_manifest(global, manifest, started);
}

// --------------------------------------------------------------- select ----

struct SelectArgs {
  std::string profiles, telemetry, out = "decisions.jsonl";
  double amin = 0.0, fps = 30.0;
  double battery_wh = 50.0, soc = 1.0, horizon = 3600.0, bg_w = 0.0;
  double ebud_mj = -1;
  int topk = 5;
};

void run_select(const GlobalOptions& global, const SelectArgs& args) {
  const std::string started = timestamp_utc();
  const std::vector<ace::profiler::AceProfile> profiles =
      ace::profiler::load_profiles(args.profiles);
  const std::vector<ace::select::TelemetrySample> samples =
      ace::select::load_telemetry_csv(args.telemetry);
  if (samples.empty()) throw std::runtime_error("telemetry file is empty");

  ace::select::Constraints constraints;
  constraints.a_min = args.amin;
  constraints.fps_target = args.fps;
  constraints.battery_capacity_wh = args.battery_wh;
  constraints.state_of_charge = args.soc;
  constraints.horizon_s = args.horizon;
  constraints.background_power_w = args.bg_w;
  if (args.ebud_mj >= 0) constraints.e_bud_override_j = args.ebud_mj * 1e-3;

  ace::select::SelectorOptions options;
  options.top_k = args.topk;
  ace::select::SelectorState state(options);

  std::ostringstream log;
  for (const ace::select::TelemetrySample& sample : samples) {
    const ace::select::Decision decision =
        ace::select::control_step(profiles, constraints, sample, state);
    log << ace::select::decision_to_jsonl(decision) << "\n";
  }
  const std::string out = resolve_out(global, args.out);
  write_text(out, log.str());
  if (!global.quiet)
    std::cerr << samples.size() << " decisions -> " << out << "\n";

  Manifest manifest;
  manifest.subcommand = "select";
  manifest.flags = {{"profiles", args.profiles},
                    {"telemetry", args.telemetry},
                    {"amin", args.amin},
                    {"fps", args.fps},
                    {"topk", args.topk}};
  manifest.inputs = {args.profiles, args.telemetry};
  manifest.outputs = {out};
  write_manifest(global, manifest, started);
}

// ------------------------------------------------------------- simulate ----

struct SimulateArgs {
  std::string scenario, profiles, oracle, script;
  std::string out_prefix;
  int frames = 20000;
  double duty = 0.03;
  bool roi = false;
  bool compare = false;
};

void write_run_outputs(const GlobalOptions& global, const std::string& prefix,
                       const ace::sim::RunLog& log, Manifest& manifest) {
  std::ostringstream epochs;
  for (const ace::sim::EpochRecord& epoch : log.epochs)
    epochs << ace::sim::epoch_to_jsonl(epoch) << "\n";
  const std::string log_path = resolve_out(global, prefix + ".jsonl");
  const std::string csv_path = resolve_out(global, prefix + "_summary.csv");
  write_text(log_path, epochs.str());
  write_text(csv_path, ace::sim::run_summary_csv(log));
  manifest.outputs.push_back(log_path);
  manifest.outputs.push_back(csv_path);
}

void run_simulate(const GlobalOptions& global, const SimulateArgs& args) {
  const std::string started = timestamp_utc();
  const ace::sim::ScenarioConfig scenario =
      ace::sim::load_scenario(args.scenario);
  const std::vector<ace::profiler::AceProfile> profiles =
      ace::profiler::load_profiles(args.profiles);
  const ace::sim::OracleCalibration calib =
      ace::sim::load_calibration(args.oracle);

  ace::sim::GestureScript script;
  if (!args.script.empty()) {
    script = ace::sim::load_script(args.script);
  } else {
    ace::sim::TimelineParams params;
    params.total_frames = args.frames;
    params.duty_cycle = args.duty;
    script = ace::sim::generate_timeline(global.seed, params);
  }

  ace::sim::SimOptions options;
  options.seed = global.seed;
  options.use_roi = args.roi;

  Manifest manifest;
  manifest.subcommand = "simulate";
  manifest.flags = {{"scenario", args.scenario}, {"profiles", args.profiles},
                    {"oracle", args.oracle},     {"roi", args.roi},
                    {"compare", args.compare}};
  manifest.inputs = {args.scenario, args.profiles, args.oracle};
  if (!args.script.empty()) manifest.inputs.push_back(args.script);
  const std::string prefix =
      args.out_prefix.empty() ? scenario.name : args.out_prefix;

  if (args.compare) {
    const ace::sim::ComparisonReport report = ace::sim::compare_fixed_vs_adaptive(
        profiles, calib, scenario, script, options);
    write_run_outputs(global, prefix + "_fixed", report.fixed, manifest);
    write_run_outputs(global, prefix + "_adaptive", report.adaptive, manifest);
    json doc;
    doc["fixed_point"] = {{"model", report.fixed_point.model},
                          {"resolution", report.fixed_point.resolution},
                          {"stride", report.fixed_point.stride}};
    doc["fixed"] = {{"energy_per_frame_mj", report.fixed.energy_per_frame_j * 1e3},
                    {"event_f1", report.fixed.event_f1},
                    {"blended", report.fixed.blended}};
    doc["adaptive"] = {
        {"energy_per_frame_mj", report.adaptive.energy_per_frame_j * 1e3},
        {"event_f1", report.adaptive.event_f1},
        {"blended", report.adaptive.blended}};
    std::cout << doc.dump(2) << "\n";
  } else {
    const ace::sim::RunLog log =
        ace::sim::run_closed_loop(profiles, calib, scenario, script, options);
    write_run_outputs(global, prefix, log, manifest);
    if (!global.quiet) std::cerr << ace::sim::run_summary_csv(log);
  }
  write_manifest(global, manifest, started);
}

// ---------------------------------------------------------------- track ----

struct TrackArgs {
  std::string detections, frames, model;
  double s = 1.8, tau = 0.5;
  int tmiss = 8;
  int resolution = 640;
  std::string out = "track.jsonl";
};

void run_track(const GlobalOptions& global, const TrackArgs& args) {
  const std::string started = timestamp_utc();
  const ace::sim::OracleCalibration calib =
      ace::sim::load_calibration(args.detections);
  const std::string model_name =
      args.model.empty() ? calib.models.begin()->first : args.model;
  if (!calib.models.count(model_name))
    throw std::runtime_error("calibration has no model " + model_name);
  const ace::sim::GestureScript script = ace::sim::load_script(args.frames);
  ace::sim::SyntheticOracle oracle(calib.models.at(model_name), script,
                                   mix_seed(global.seed, model_name));

  ace::track::TrackerParams params;
  params.roi_scale = args.s;
  params.iou_gate = args.tau;
  params.miss_budget = args.tmiss;
  ace::track::TrackState state;

  std::ostringstream log;
  for (int frame = 0; frame < script.total_frames; ++frame) {
    const ace::track::StepResult step =
        ace::track::step(state, frame, oracle, args.resolution, params);
    ace::track::FrameRecord record;
    record.frame = frame;
    record.box = step.box;
    record.track_active = step.track_active;
    record.roi = step.roi;
    record.processed_pixels = step.processed_pixels;
    log << ace::track::frame_record_to_jsonl(record) << "\n";
  }
  const std::string out = resolve_out(global, args.out);
  write_text(out, log.str());
  if (!global.quiet)
    std::cerr << script.total_frames << " frames tracked -> " << out << "\n";

  Manifest manifest;
  manifest.subcommand = "track";
  manifest.flags = {{"detections", args.detections}, {"frames", args.frames},
                    {"model", model_name},           {"s", args.s},
                    {"tau", args.tau},               {"tmiss", args.tmiss}};
  manifest.inputs = {args.detections, args.frames};
  manifest.outputs = {out};
  write_manifest(global, manifest, started);
}

// ----------------------------------------------------------------- eval ----

struct EvalArgs {
  std::string preds, gt, events;
  int stride = 1;
  int frames = 0;
  double gamma = 0.25, conf = 0.25, iou = 0.5, lambda = 0.6;
};

void run_eval(const GlobalOptions& global, const EvalArgs& args) {
  const std::string started = timestamp_utc();
  const std::vector<ace::metrics::Detection> sparse =
      ace::metrics::read_detections_jsonl(args.preds);
  const std::vector<ace::metrics::GroundTruthFrame> gt =
      ace::metrics::read_ground_truth_jsonl(args.gt);
  const std::vector<ace::metrics::GestureEvent> events =
      ace::metrics::read_events_json(args.events);

  int total_frames = args.frames;
  if (total_frames <= 0) {
    for (const ace::metrics::Detection& d : sparse)
      total_frames = std::max(total_frames, d.frame + 1);
    for (const ace::metrics::GroundTruthFrame& f : gt)
      total_frames = std::max(total_frames, f.frame + 1);
    for (const ace::metrics::GestureEvent& e : events)
      total_frames = std::max(total_frames, e.end_frame + 1);
  }
  const ace::metrics::FramePredictions dense = ace::metrics::hold_last_impute(
      sparse, args.stride, total_frames, args.gamma);

  const ace::metrics::FrameMetrics frame =
      ace::metrics::frame_metrics(dense, gt, args.iou, args.conf);
  const double event_f1 = ace::metrics::event_f1(dense, events, args.conf);
  json doc;
  doc["frame_precision"] = frame.precision;
  doc["frame_recall"] = frame.recall;
  doc["frame_f1"] = frame.f1;
  doc["event_f1"] = event_f1;
  doc["blended"] =
      ace::metrics::blended_accuracy(event_f1, frame.f1, args.lambda);
  std::cout << doc.dump(2) << "\n";

  Manifest manifest;
  manifest.subcommand = "eval";
  manifest.flags = {{"preds", args.preds},   {"gt", args.gt},
                    {"events", args.events}, {"stride", args.stride},
                    {"conf", args.conf},     {"iou", args.iou}};
  manifest.inputs = {args.preds, args.gt, args.events};
  write_manifest(global, manifest, started);
}

// ------------------------------------------------------------ plot-data ----

struct PlotArgs {
  std::string log, kind = "pareto", out;
};

void run_plot_data(const GlobalOptions& global, const PlotArgs& args) {
  const std::string started = timestamp_utc();
  std::ostringstream csv;
  if (args.kind == "pareto") {
    // Expects a profile table as produced by `profile`.
    const std::vector<ace::profiler::AceProfile> profiles =
        ace::profiler::load_profiles(args.log);
    csv << "a_norm,c_norm,e_norm,score,chosen\n";
    for (const ace::profiler::AceProfile& p : profiles)
      csv << p.a_norm << "," << p.c_norm << "," << p.e_norm << "," << p.score
          << "," << p.point.model << "@" << p.point.resolution << "/"
          << p.point.stride << "\n";
  } else if (args.kind == "timeline") {
    // Expects an epoch log as produced by `simulate`.
    std::ifstream in(args.log);
    if (!in) throw std::runtime_error("cannot open " + args.log);
    csv << "t,model,resolution,stride,score,soc,temperature_c,"
           "epoch_energy_j\n";
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json obj = json::parse(line);
      const json& chosen = obj.at("chosen");
      csv << obj.value("t", 0.0) << "," << chosen.value("model", "") << ","
          << chosen.value("resolution", 0) << "," << chosen.value("stride", 0)
          << "," << obj.value("score", 0.0) << "," << obj.value("soc", 0.0)
          << "," << obj.value("temperature_c", 0.0) << ","
          << obj.value("epoch_energy_j", 0.0) << "\n";
    }
  } else {
    throw std::runtime_error("unknown plot kind: " + args.kind);
  }

  Manifest manifest;
  manifest.subcommand = "plot-data";
  manifest.flags = {{"log", args.log}, {"kind", args.kind}};
  manifest.inputs = {args.log};
  if (args.out.empty()) {
    std::cout << csv.str();
  } else {
    const std::string out = resolve_out(global, args.out);
    write_text(out, csv.str());
    manifest.outputs = {out};
  }
  write_manifest(global, manifest, started);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Runtime-adaptive gesture detection toolkit"};
  app.require_subcommand(1);

  GlobalOptions global;
  if (const char* env = std::getenv("ACE_SCHED_SEED"))
    global.seed = std::strtoull(env, nullptr, 10);
  app.add_option("--seed", global.seed, "Seed for all stochastic components");
  app.add_option("--out-dir", global.out_dir,
                 "Directory for outputs given as relative paths");
  app.add_flag("--quiet", global.quiet, "Suppress progress messages");

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "Synthesize a family variant");
  synth->add_option("--base", synth_args.base)->required();
  synth->add_option("--alpha", synth_args.alpha);
  synth->add_option("--beta", synth_args.beta);
  synth->add_option("--cmax", synth_args.cmax);
  synth->add_option("--heads", synth_args.heads);
  synth->add_flag("--simplify-attention", synth_args.simplify);
  synth->add_flag("--report", synth_args.report);
  synth->add_option("--out", synth_args.out)->required();
  synth->callback([&] { run_synth(global, synth_args); });

  ProfileArgs profile_args;
  CLI::App* profile =
      app.add_subcommand("profile", "Sweep the configuration grid");
  profile->add_option("--grid", profile_args.grid);
  profile->add_option("--oracle", profile_args.oracle)->required();
  profile->add_option("--videos", profile_args.videos)->required();
  profile->add_option("--models", profile_args.models)->delimiter(',');
  profile->add_option("--resolutions", profile_args.resolutions)
      ->delimiter(',');
  profile->add_option("--strides", profile_args.strides)->delimiter(',');
  profile->add_option("--out", profile_args.out);
  profile->callback([&] { run_profile(global, profile_args); });

  SelectArgs select_args;
  CLI::App* select =
      app.add_subcommand("select", "Replay telemetry through the selector");
  select->add_option("--profiles", select_args.profiles)->required();
  select->add_option("--telemetry", select_args.telemetry)->required();
  select->add_option("--amin", select_args.amin);
  select->add_option("--fps", select_args.fps);
  select->add_option("--battery-wh", select_args.battery_wh);
  select->add_option("--soc", select_args.soc);
  select->add_option("--horizon", select_args.horizon);
  select->add_option("--bg-w", select_args.bg_w);
  select->add_option("--ebud-mj", select_args.ebud_mj);
  select->add_option("--topk", select_args.topk);
  select->add_option("--out", select_args.out);
  select->callback([&] { run_select(global, select_args); });

  SimulateArgs simulate_args;
  CLI::App* simulate =
      app.add_subcommand("simulate", "Run a closed-loop scenario");
  simulate->add_option("--scenario", simulate_args.scenario)->required();
  simulate->add_option("--profiles", simulate_args.profiles)->required();
  simulate->add_option("--oracle", simulate_args.oracle)->required();
  simulate->add_option("--script", simulate_args.script);
  simulate->add_option("--frames", simulate_args.frames);
  simulate->add_option("--duty", simulate_args.duty);
  simulate->add_flag("--roi", simulate_args.roi);
  simulate->add_flag("--compare", simulate_args.compare);
  simulate->add_option("--out-prefix", simulate_args.out_prefix);
  simulate->callback([&] { run_simulate(global, simulate_args); });

  TrackArgs track_args;
  CLI::App* track = app.add_subcommand("track", "Kalman-gated ROI tracking");
  track->add_option("--detections", track_args.detections)->required();
  track->add_option("--frames", track_args.frames)->required();
  track->add_option("--model", track_args.model);
  track->add_option("--s", track_args.s);
  track->add_option("--tau", track_args.tau);
  track->add_option("--tmiss", track_args.tmiss);
  track->add_option("--resolution", track_args.resolution);
  track->add_option("--out", track_args.out);
  track->callback([&] { run_track(global, track_args); });

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Score predictions");
  eval->add_option("--preds", eval_args.preds)->required();
  eval->add_option("--gt", eval_args.gt)->required();
  eval->add_option("--events", eval_args.events)->required();
  eval->add_option("--stride", eval_args.stride);
  eval->add_option("--frames", eval_args.frames);
  eval->add_option("--gamma", eval_args.gamma);
  eval->add_option("--conf", eval_args.conf);
  eval->add_option("--iou", eval_args.iou);
  eval->add_option("--lambda", eval_args.lambda);
  eval->callback([&] { run_eval(global, eval_args); });

  PlotArgs plot_args;
  CLI::App* plot =
      app.add_subcommand("plot-data", "Flatten logs into plot-ready CSV");
  plot->add_option("--log", plot_args.log)->required();
  plot->add_option("--kind", plot_args.kind);
  plot->add_option("--out", plot_args.out);
  plot->callback([&] { run_plot_data(global, plot_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
