#include "ace/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace ace::sim {

using metrics::Box;
using nlohmann::json;
using profiler::ConfigPoint;

Box GestureBurst::box_at(int frame, const FrameSize& size) const {
  const int dt = frame - start_frame;
  Box box = start_box;
  box.cx = std::clamp(box.cx + vx * dt, box.w / 2, size.width - box.w / 2);
  box.cy = std::clamp(box.cy + vy * dt, box.h / 2, size.height - box.h / 2);
  return box;
}

std::optional<GestureBurst> GestureScript::burst_at(int frame) const {
  for (const GestureBurst& b : bursts)
    if (b.start_frame <= frame && frame <= b.end_frame) return b;
  return std::nullopt;
}

GestureScript generate_timeline(uint64_t seed, const TimelineParams& params) {
  if (params.duty_cycle <= 0 || params.duty_cycle >= 1)
    throw SimError("duty cycle must lie in (0,1)");
  if (params.total_frames < 1) throw SimError("total_frames must be >= 1");

  const long long target_active =
      std::llround(params.duty_cycle * params.total_frames);
  if (target_active < 1)
    throw SimError("duty cycle yields no gesture-active frames");

  std::mt19937_64 rng(seed);
  std::geometric_distribution<int> burst_len(
      1.0 / std::max(params.mean_burst_frames, 1.0));

  // Draw burst lengths until the active budget is met; the last burst is
  // truncated so the realized duty matches the target closely.
  std::vector<int> lengths;
  long long active = 0;
  while (active < target_active) {
    int len = burst_len(rng) + 1;
    len = static_cast<int>(
        std::min<long long>(len, target_active - active));
    lengths.push_back(len);
    active += len;
  }

  // Distribute background frames over the gaps around the bursts.
  const long long background = params.total_frames - active;
  if (background < static_cast<long long>(lengths.size()))
    throw SimError("duty cycle forces overlapping bursts");
  const size_t gaps = lengths.size() + 1;
  std::vector<double> weights(gaps);
  std::uniform_real_distribution<double> unit(0.1, 1.0);
  for (double& w : weights) w = unit(rng);
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);

  std::vector<long long> gap_frames(gaps);
  long long assigned = 0;
  for (size_t i = 0; i + 1 < gaps; ++i) {
    gap_frames[i] = std::llround(background * weights[i] / wsum);
    assigned += gap_frames[i];
  }
  gap_frames.back() = background - assigned;
  // Guarantee at least one background frame between consecutive bursts.
  for (size_t i = 1; i + 1 < gaps; ++i) {
    if (gap_frames[i] == 0 && gap_frames.back() > 0) {
      gap_frames[i] = 1;
      --gap_frames.back();
    }
  }

  GestureScript script;
  script.total_frames = params.total_frames;
  script.frame_size = params.frame_size;

  std::uniform_int_distribution<int> class_dist(0, params.num_classes - 1);
  std::uniform_real_distribution<double> size_dist(params.min_box,
                                                   params.max_box);
  std::uniform_real_distribution<double> speed_dist(-params.max_speed,
                                                    params.max_speed);
  int cursor = 0;
  for (size_t i = 0; i < lengths.size(); ++i) {
    cursor += static_cast<int>(gap_frames[i]);
    GestureBurst burst;
    burst.class_id = class_dist(rng);
    burst.start_frame = cursor;
    burst.end_frame = cursor + lengths[i] - 1;
    burst.start_box.w = size_dist(rng);
    burst.start_box.h = size_dist(rng);
    std::uniform_real_distribution<double> cx_dist(
        burst.start_box.w / 2, params.frame_size.width - burst.start_box.w / 2);
    std::uniform_real_distribution<double> cy_dist(
        burst.start_box.h / 2,
        params.frame_size.height - burst.start_box.h / 2);
    burst.start_box.cx = cx_dist(rng);
    burst.start_box.cy = cy_dist(rng);
    burst.vx = speed_dist(rng);
    burst.vy = speed_dist(rng);
    script.bursts.push_back(burst);
    cursor = burst.end_frame + 1;
  }
  script.duty_cycle = static_cast<double>(active) / params.total_frames;
  return script;
}

profiler::GestureTimeline script_to_timeline(const GestureScript& script) {
  profiler::GestureTimeline timeline;
  timeline.total_frames = script.total_frames;
  for (const GestureBurst& burst : script.bursts) {
    timeline.events.push_back(
        {burst.class_id, burst.start_frame, burst.end_frame});
    for (int f = burst.start_frame; f <= burst.end_frame; ++f) {
      metrics::GroundTruthFrame frame;
      frame.frame = f;
      frame.entries.push_back(
          {burst.box_at(f, script.frame_size), burst.class_id});
      timeline.gt.push_back(std::move(frame));
    }
  }
  return timeline;
}

std::string script_to_json(const GestureScript& script) {
  json doc;
  doc["total_frames"] = script.total_frames;
  doc["frame_width"] = script.frame_size.width;
  doc["frame_height"] = script.frame_size.height;
  doc["duty_cycle"] = script.duty_cycle;
  json bursts = json::array();
  for (const GestureBurst& b : script.bursts)
    bursts.push_back({{"class", b.class_id},
                      {"start", b.start_frame},
                      {"end", b.end_frame},
                      {"box", {b.start_box.cx, b.start_box.cy, b.start_box.w,
                               b.start_box.h}},
                      {"velocity", {b.vx, b.vy}}});
  doc["bursts"] = std::move(bursts);
  return doc.dump(2);
}

GestureScript script_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SimError(std::string("invalid script document: ") + e.what());
  }
  GestureScript script;
  script.total_frames = doc.at("total_frames").get<int>();
  script.frame_size.width = doc.value("frame_width", 640);
  script.frame_size.height = doc.value("frame_height", 640);
  script.duty_cycle = doc.value("duty_cycle", 0.0);
  for (const json& b : doc.at("bursts")) {
    GestureBurst burst;
    burst.class_id = b.at("class").get<int>();
    burst.start_frame = b.at("start").get<int>();
    burst.end_frame = b.at("end").get<int>();
    const json& box = b.at("box");
    burst.start_box = {box[0].get<double>(), box[1].get<double>(),
                       box[2].get<double>(), box[3].get<double>()};
    const json& vel = b.at("velocity");
    burst.vx = vel[0].get<double>();
    burst.vy = vel[1].get<double>();
    script.bursts.push_back(burst);
  }
  return script;
}

GestureScript load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SimError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return script_from_json(buf.str());
}

OracleCalibration load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SimError("cannot open " + path);
  json doc;
  in >> doc;
  OracleCalibration calib;
  for (const auto& [name, m] : doc.at("models").items()) {
    SyntheticDetectorModel model;
    model.detect_prob = m.value("detect_prob", 1.0);
    model.localization_noise_px = m.value("noise_px", 0.0);
    model.base_latency_ms = m.value("base_latency_ms", 10.0);
    model.energy_mj_per_call = m.value("energy_mj_per_call", 10.0);
    model.conf_mean = m.value("conf_mean", 0.9);
    model.conf_jitter = m.value("conf_jitter", 0.0);
    if (m.contains("g640") && !m["g640"].is_null())
      model.g640 = m["g640"].get<double>();
    calib.models[name] = model;
  }
  if (calib.models.empty()) throw SimError("calibration defines no models");
  return calib;
}

OracleResult SyntheticOracle::detect(int frame, int resolution,
                                     const std::optional<Region>& region) {
  const FrameSize size = script_->frame_size;
  const Region query =
      region.value_or(Region{0, 0, static_cast<double>(size.width),
                             static_cast<double>(size.height)});
  if (query.x0 < 0 || query.y0 < 0 ||
      query.x0 + query.width > size.width + 1e-9 ||
      query.y0 + query.height > size.height + 1e-9)
    throw SimError("query region outside frame");

  // Cost scales with the processed fraction of the frame at resolution r.
  const double effective_pixels = (query.pixels() / size.pixels()) *
                                  static_cast<double>(resolution) * resolution;
  const double pixel_ratio = effective_pixels / (640.0 * 640.0);

  OracleResult result;
  result.latency_s = model_.base_latency_ms * 1e-3 * pixel_ratio;
  result.energy_j = model_.energy_mj_per_call * 1e-3 * pixel_ratio;

  const std::optional<GestureBurst> burst = script_->burst_at(frame);
  if (!burst) return result;
  const Box truth = burst->box_at(frame, size);

  // The gesture is only visible when its box overlaps the queried region.
  const double ix = std::min(query.x0 + query.width, truth.cx + truth.w / 2) -
                    std::max(query.x0, truth.cx - truth.w / 2);
  const double iy = std::min(query.y0 + query.height, truth.cy + truth.h / 2) -
                    std::max(query.y0, truth.cy - truth.h / 2);
  if (ix <= 0 || iy <= 0) return result;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng_) > model_.detect_prob) return result;

  std::normal_distribution<double> noise(0.0, 1.0);
  const double sigma = model_.localization_noise_px;
  metrics::Detection det;
  det.frame = frame;
  det.class_id = burst->class_id;
  det.box = truth;
  if (sigma > 0) {
    det.box.cx += sigma * noise(rng_);
    det.box.cy += sigma * noise(rng_);
    det.box.w = std::max(1.0, det.box.w + sigma * noise(rng_));
    det.box.h = std::max(1.0, det.box.h + sigma * noise(rng_));
  }
  double conf = model_.conf_mean;
  if (model_.conf_jitter > 0)
    conf += model_.conf_jitter * (unit(rng_) - 0.5);
  det.confidence = std::clamp(conf, 0.0, 1.0);
  result.detections.push_back(det);
  return result;
}

select::TelemetrySample DeviceModel::step(double energy_drawn_j, double dt_s,
                                          double busy_s) {
  if (dt_s <= 0) throw SimError("device step dt must be positive");
  const double compute_power = energy_drawn_j / dt_s;
  const double total_power = idle_power_w + compute_power;

  total_compute_energy_j += energy_drawn_j;
  const double drained_j = (idle_power_w * dt_s) + energy_drawn_j;
  state_of_charge = std::max(
      0.0, state_of_charge - drained_j / (battery_capacity_wh * 3600.0));

  // First-order response toward ambient + coeff * power.
  const double target = ambient_c + heat_coeff_c_per_w * total_power;
  temperature_c += (target - temperature_c) * (1 - std::exp(-dt_s /
                                                            thermal_tau_s));
  time_s += dt_s;

  select::TelemetrySample sample;
  sample.timestamp = time_s;
  sample.battery_pct = 100.0 * state_of_charge;
  sample.cpu_temp_c = temperature_c;
  sample.gpu_temp_c = temperature_c;
  sample.gpu_util_pct = std::clamp(100.0 * busy_s / dt_s, 0.0, 100.0);
  sample.power_w = total_power;
  return sample;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SimError("cannot open " + path);
  json doc;
  in >> doc;
  ScenarioConfig scenario;
  scenario.name = doc.value("name", "balanced");
  const json& c = doc.at("constraints");
  scenario.constraints.a_min = c.value("a_min", 0.0);
  scenario.constraints.fps_target = c.value("fps", 30.0);
  scenario.constraints.battery_capacity_wh = c.value("battery_wh", 50.0);
  scenario.constraints.state_of_charge = c.value("soc", 1.0);
  scenario.constraints.horizon_s = c.value("horizon_s", 3600.0);
  scenario.constraints.background_power_w = c.value("background_w", 0.0);
  if (c.contains("ebud_mj") && !c["ebud_mj"].is_null())
    scenario.constraints.e_bud_override_j = c["ebud_mj"].get<double>() * 1e-3;
  if (doc.contains("overrides")) {
    const json& o = doc["overrides"];
    if (o.contains("battery_pct"))
      scenario.overrides.battery_pct = o["battery_pct"].get<double>();
    if (o.contains("cpu_temp"))
      scenario.overrides.cpu_temp_c = o["cpu_temp"].get<double>();
    if (o.contains("gpu_temp"))
      scenario.overrides.gpu_temp_c = o["gpu_temp"].get<double>();
    if (o.contains("gpu_util"))
      scenario.overrides.gpu_util_pct = o["gpu_util"].get<double>();
  }
  if (doc.contains("device")) {
    const json& d = doc["device"];
    scenario.device.battery_capacity_wh = d.value("capacity_wh", 50.0);
    scenario.device.state_of_charge = d.value("soc", 1.0);
    scenario.device.idle_power_w = d.value("idle_w", 3.0);
    scenario.device.ambient_c = d.value("ambient_c", 30.0);
    scenario.device.heat_coeff_c_per_w = d.value("heat_c_per_w", 2.0);
    scenario.device.thermal_tau_s = d.value("tau_s", 60.0);
    scenario.device.temperature_c = scenario.device.ambient_c;
  }
  scenario.duration_s = doc.value("duration_s", 300.0);
  scenario.epoch_s = doc.value("epoch_s", 5.0);
  scenario.fps = doc.value("fps", 30.0);
  return scenario;
}

namespace {

void apply_overrides(select::TelemetrySample& sample,
                     const TelemetryOverrides& overrides) {
  if (overrides.battery_pct) sample.battery_pct = *overrides.battery_pct;
  if (overrides.cpu_temp_c) sample.cpu_temp_c = *overrides.cpu_temp_c;
  if (overrides.gpu_temp_c) sample.gpu_temp_c = *overrides.gpu_temp_c;
  if (overrides.gpu_util_pct) sample.gpu_util_pct = *overrides.gpu_util_pct;
}

uint64_t mix_seed(uint64_t seed, const std::string& tag) {
  uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
  for (char c : tag) h = (h ^ static_cast<uint64_t>(c)) * 0x100000001b3ull;
  return h;
}

}  // namespace

RunLog run_closed_loop(const std::vector<profiler::AceProfile>& profiles,
                       const OracleCalibration& calibration,
                       const ScenarioConfig& scenario,
                       const GestureScript& script, const SimOptions& options) {
  if (profiles.empty()) throw SimError("no profiles loaded");

  // One oracle per model, seeded deterministically.
  std::map<std::string, std::unique_ptr<SyntheticOracle>> oracles;
  for (const auto& [name, model] : calibration.models)
    oracles[name] = std::make_unique<SyntheticOracle>(
        model, script, mix_seed(options.seed, name));

  DeviceModel device = scenario.device;
  device.temperature_c = device.ambient_c;
  select::Constraints constraints = scenario.constraints;
  select::SelectorState selector(options.selector);

  RunLog log;
  metrics::FramePredictions dense(script.total_frames);
  std::vector<double> latencies;

  const int frames_per_epoch =
      std::max(1, static_cast<int>(std::lround(scenario.fps *
                                               scenario.epoch_s)));
  track::TrackState track_state;

  select::TelemetrySample telemetry;
  telemetry.battery_pct = 100.0 * device.state_of_charge;
  telemetry.cpu_temp_c = telemetry.gpu_temp_c = device.temperature_c;
  apply_overrides(telemetry, scenario.overrides);

  int frame = 0;
  double simulated_s = 0;
  while (frame < script.total_frames && simulated_s < scenario.duration_s) {
    const bool gesture_active = script.active_at(frame);

    select::Decision decision;
    if (options.forced_point) {
      decision.chosen = *options.forced_point;
      decision.timestamp = simulated_s;
    } else {
      // Constraints track the device's live state of charge.
      constraints.state_of_charge = device.state_of_charge;
      decision = select::control_step(profiles, constraints, telemetry,
                                      selector, gesture_active);
    }

    auto oracle_it = oracles.find(decision.chosen.model);
    if (oracle_it == oracles.end())
      throw SimError("no oracle for chosen model " + decision.chosen.model);
    SyntheticOracle& oracle = *oracle_it->second;

    EpochRecord epoch;
    epoch.decision = decision;
    epoch.gesture_active = gesture_active;
    const int k = decision.chosen.stride;
    const int r = decision.chosen.resolution;
    const int epoch_end =
        std::min(frame + frames_per_epoch, script.total_frames);

    double epoch_busy_s = 0;
    for (int f = frame; f < epoch_end; f += k) {
      double latency = 0, energy = 0, pixels = 0;
      std::optional<metrics::Detection> best;
      if (options.use_roi) {
        const track::StepResult step =
            track::step(track_state, f, oracle, r, options.tracker);
        latency = step.latency_s;
        energy = step.energy_j;
        pixels = step.processed_pixels;
        if (step.box) {
          metrics::Detection det;
          det.frame = f;
          det.box = *step.box;
          const auto burst = script.burst_at(f);
          det.class_id = burst ? burst->class_id : 0;
          det.confidence =
              calibration.models.at(decision.chosen.model).conf_mean;
          best = det;
        }
      } else {
        const OracleResult result = oracle.detect(f, r, std::nullopt);
        latency = result.latency_s;
        energy = result.energy_j;
        pixels = static_cast<double>(script.frame_size.pixels());
        if (!result.detections.empty()) {
          best = *std::max_element(
              result.detections.begin(), result.detections.end(),
              [](const metrics::Detection& a, const metrics::Detection& b) {
                return a.confidence < b.confidence;
              });
        }
      }

      latencies.push_back(latency);
      epoch_busy_s += latency;
      epoch.energy_j += energy;
      ++epoch.detector_calls;
      log.total_processed_pixels += pixels;
      log.total_energy_j += energy;

      if (best) {
        // Hold-last imputation over the frames skipped by the stride.
        const int hold_end = std::min({f + k, epoch_end});
        for (int g = f; g < hold_end; ++g) {
          metrics::Detection det = *best;
          det.frame = g;
          det.confidence *= std::exp(-options.profiler.decay_gamma * (g - f));
          dense[g].push_back(det);
        }
      }
    }

    epoch.frames = epoch_end - frame;
    epoch.mean_latency_s =
        epoch.detector_calls > 0 ? epoch_busy_s / epoch.detector_calls : 0;

    telemetry = device.step(epoch.energy_j, scenario.epoch_s, epoch_busy_s);
    apply_overrides(telemetry, scenario.overrides);
    epoch.soc = device.state_of_charge;
    epoch.temperature_c = device.temperature_c;
    log.epochs.push_back(std::move(epoch));

    frame = epoch_end;
    simulated_s += scenario.epoch_s;
  }

  const profiler::GestureTimeline timeline = script_to_timeline(script);
  log.total_frames = frame;
  log.energy_per_frame_j = frame > 0 ? log.total_energy_j / frame : 0;
  log.mean_latency_s =
      latencies.empty()
          ? 0
          : std::accumulate(latencies.begin(), latencies.end(), 0.0) /
                latencies.size();
  log.frame = metrics::frame_metrics(dense, timeline.gt,
                                     options.profiler.iou_thresh,
                                     options.profiler.conf_thresh);
  log.event_f1 =
      metrics::event_f1(dense, timeline.events, options.profiler.conf_thresh);
  log.blended = metrics::blended_accuracy(log.event_f1, log.frame.f1,
                                          options.profiler.lambda);
  log.device_compute_energy_j = device.total_compute_energy_j;
  return log;
}

ComparisonReport compare_fixed_vs_adaptive(
    const std::vector<profiler::AceProfile>& profiles,
    const OracleCalibration& calibration, const ScenarioConfig& scenario,
    const GestureScript& script, const SimOptions& options) {
  if (profiles.size() < 2)
    throw SimError("comparison requires at least two profiles");

  const auto best = std::max_element(
      profiles.begin(), profiles.end(),
      [](const profiler::AceProfile& a, const profiler::AceProfile& b) {
        return a.raw.a_blend < b.raw.a_blend;
      });

  ComparisonReport report;
  report.fixed_point = best->point;

  SimOptions fixed_options = options;
  fixed_options.forced_point = best->point;
  report.fixed = run_closed_loop(profiles, calibration, scenario, script,
                                 fixed_options);

  SimOptions adaptive_options = options;
  adaptive_options.forced_point.reset();
  report.adaptive = run_closed_loop(profiles, calibration, scenario, script,
                                    adaptive_options);
  return report;
}

std::string epoch_to_jsonl(const EpochRecord& record) {
  json obj = json::parse(select::decision_to_jsonl(record.decision));
  obj["epoch_energy_j"] = record.energy_j;
  obj["epoch_mean_latency_ms"] = record.mean_latency_s * 1e3;
  obj["epoch_frames"] = record.frames;
  obj["detector_calls"] = record.detector_calls;
  obj["soc"] = record.soc;
  obj["temperature_c"] = record.temperature_c;
  obj["gesture_active"] = record.gesture_active;
  return obj.dump();
}

std::string run_summary_csv(const RunLog& log) {
  std::ostringstream out;
  out << "total_frames,total_energy_j,energy_per_frame_mj,mean_latency_ms,"
         "frame_f1,event_f1,blended\n";
  out << log.total_frames << "," << log.total_energy_j << ","
      << log.energy_per_frame_j * 1e3 << "," << log.mean_latency_s * 1e3
      << "," << log.frame.f1 << "," << log.event_f1 << "," << log.blended
      << "\n";
  return out.str();
}

}  // namespace ace::sim
