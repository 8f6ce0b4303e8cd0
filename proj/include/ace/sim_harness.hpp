///////////////////////////////////////////////////////////////////////////////
// sim_harness.hpp: Closed-loop, hardware-free reproduction environment.
// Synthetic detector oracles with pixel-proportional cost models, sparse
// gesture timeline generation, a battery/thermal device model, scenario
// scripts and adaptive-vs-fixed comparison runs.
///////////////////////////////////////////////////////////////////////////////

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ace/ace_profiler.hpp"
#include "ace/oracle.hpp"
#include "ace/roi_tracker.hpp"
#include "ace/runtime_selector.hpp"

namespace ace::sim {

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Synthetic detector behavior for one model family. Latency and energy are
// quadratic / proportional in processed pixels, referenced to a full frame
// at 640 px.
struct SyntheticDetectorModel {
  double detect_prob = 1.0;
  double localization_noise_px = 0.0;
  double base_latency_ms = 10.0;      // full frame at 640 px
  double energy_mj_per_call = 10.0;   // full frame at 640 px
  double conf_mean = 0.9;
  double conf_jitter = 0.0;
  std::optional<double> g640;         // nominal GFLOPs at 640 px
};

struct OracleCalibration {
  std::map<std::string, SyntheticDetectorModel> models;
};

OracleCalibration load_calibration(const std::string& path);

// One gesture episode with a piecewise constant-velocity box trajectory.
struct GestureBurst {
  int class_id = 0;
  int start_frame = 0;
  int end_frame = 0;  // inclusive
  metrics::Box start_box;
  double vx = 0, vy = 0;  // pixels per frame

  metrics::Box box_at(int frame, const FrameSize& size) const;
};

struct GestureScript {
  int total_frames = 0;
  FrameSize frame_size;
  std::vector<GestureBurst> bursts;
  double duty_cycle = 0;  // realized fraction of gesture-active frames

  std::optional<GestureBurst> burst_at(int frame) const;
  bool active_at(int frame) const { return burst_at(frame).has_value(); }
};

struct TimelineParams {
  int total_frames = 10000;
  double duty_cycle = 0.03;
  double mean_burst_frames = 10.0;
  int num_classes = 18;
  FrameSize frame_size{640, 640};
  double min_box = 60, max_box = 120;
  double max_speed = 4.0;  // pixels per frame
};

GestureScript generate_timeline(uint64_t seed, const TimelineParams& params);

profiler::GestureTimeline script_to_timeline(const GestureScript& script);

std::string script_to_json(const GestureScript& script);
GestureScript script_from_json(const std::string& text);
GestureScript load_script(const std::string& path);

class SyntheticOracle : public DetectorOracle {
 public:
  SyntheticOracle(SyntheticDetectorModel model, const GestureScript& script,
                  uint64_t seed)
      : model_(model), script_(&script), rng_(seed) {}

  OracleResult detect(int frame, int resolution,
                      const std::optional<Region>& region) override;

  FrameSize frame_size() const override { return script_->frame_size; }

 private:
  SyntheticDetectorModel model_;
  const GestureScript* script_;
  std::mt19937_64 rng_;
};

// First-order battery / thermal device model feeding selector telemetry.
struct DeviceModel {
  double battery_capacity_wh = 50.0;
  double state_of_charge = 1.0;
  double idle_power_w = 3.0;
  double ambient_c = 30.0;
  double heat_coeff_c_per_w = 2.0;
  double thermal_tau_s = 60.0;

  // evolving state
  double temperature_c = 30.0;
  double time_s = 0.0;
  double total_compute_energy_j = 0.0;

  select::TelemetrySample step(double energy_drawn_j, double dt_s,
                               double busy_s = 0.0);
};

struct TelemetryOverrides {
  std::optional<double> battery_pct;
  std::optional<double> cpu_temp_c;
  std::optional<double> gpu_temp_c;
  std::optional<double> gpu_util_pct;
};

struct ScenarioConfig {
  std::string name = "balanced";
  select::Constraints constraints;
  TelemetryOverrides overrides;
  DeviceModel device;
  double duration_s = 300.0;
  double epoch_s = 5.0;  // decision epoch == telemetry cadence
  double fps = 30.0;
};

ScenarioConfig load_scenario(const std::string& path);

struct EpochRecord {
  select::Decision decision;
  double energy_j = 0;
  double mean_latency_s = 0;
  int frames = 0;
  int detector_calls = 0;
  double soc = 0;
  double temperature_c = 0;
  bool gesture_active = false;
};

struct RunLog {
  std::vector<EpochRecord> epochs;
  double total_energy_j = 0;
  double energy_per_frame_j = 0;
  double mean_latency_s = 0;
  double total_processed_pixels = 0;
  long long total_frames = 0;
  metrics::FrameMetrics frame;
  double event_f1 = 0;
  double blended = 0;
  double device_compute_energy_j = 0;
};

struct SimOptions {
  uint64_t seed = 0;
  select::SelectorOptions selector;
  bool use_roi = false;
  track::TrackerParams tracker;
  profiler::ProfilerOptions profiler;
  // When set, the selector is bypassed and this point runs for the whole
  // scenario (fixed-configuration baseline).
  std::optional<profiler::ConfigPoint> forced_point;
};

RunLog run_closed_loop(const std::vector<profiler::AceProfile>& profiles,
                       const OracleCalibration& calibration,
                       const ScenarioConfig& scenario,
                       const GestureScript& script, const SimOptions& options);

struct ComparisonReport {
  profiler::ConfigPoint fixed_point;
  RunLog fixed;
  RunLog adaptive;
};

// Best-accuracy fixed profile vs the adaptive controller on identical
// scripts and seeds.
ComparisonReport compare_fixed_vs_adaptive(
    const std::vector<profiler::AceProfile>& profiles,
    const OracleCalibration& calibration, const ScenarioConfig& scenario,
    const GestureScript& script, const SimOptions& options);

std::string epoch_to_jsonl(const EpochRecord& record);
std::string run_summary_csv(const RunLog& log);

}  // namespace ace::sim
