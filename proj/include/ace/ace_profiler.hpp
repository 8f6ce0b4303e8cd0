///////////////////////////////////////////////////////////////////////////////
// ace_profiler.hpp: Sweep the (model, resolution, stride) configuration grid,
// aggregate accuracy, latency, flops and idle-normalized energy per point,
// min-max normalize across the table and emit scored profiles.
///////////////////////////////////////////////////////////////////////////////

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ace/oracle.hpp"
#include "ace/temporal_metrics.hpp"

namespace ace::profiler {

struct ProfilerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigPoint {
  std::string model;
  int resolution = 640;
  int stride = 1;

  bool operator==(const ConfigPoint&) const = default;
  auto operator<=>(const ConfigPoint&) const = default;
};

struct RawProfile {
  double a_fr = 0, a_ev = 0, a_blend = 0;
  double l_mean = 0, l_p90 = 0;  // seconds per inference
  double l_eff = 0;              // seconds per source frame (l_mean / k)
  std::optional<double> g640;    // nominal GFLOPs at 640 px
  std::optional<double> c_flop;  // effective GFLOPs per source frame
  double e_per_frame = 0;        // joules per source frame
  double mean_excess_power = 0;  // watts above idle
};

struct AceProfile {
  ConfigPoint point;
  RawProfile raw;
  double a_norm = 0, c_norm = 0, e_norm = 0;
  double score = 0;
};

// Power trace with idle baseline, timestamps strictly increasing.
struct PowerTrace {
  std::vector<std::pair<double, double>> samples;  // (seconds, watts)
  double idle_watts = 0;
};

// Frame-indexed ground truth plus event spans for one video.
struct GestureTimeline {
  int total_frames = 0;
  std::vector<metrics::GroundTruthFrame> gt;
  std::vector<metrics::GestureEvent> events;
};

double effective_latency(double l_mean, int stride);

double effective_flops(double g640, int resolution, int stride);

struct EnergyResult {
  double e_per_frame = 0;       // joules per source frame
  double mean_excess_power = 0; // watts
};

// Trapezoidal integral of max(W(t) - idle, 0) over [t0, t1], divided by the
// source-frame count.
EnergyResult integrate_energy(const PowerTrace& trace, double t0, double t1,
                              long long n_src);

// (v - min) / (max - min); all zeros when the list is degenerate.
std::vector<double> minmax_normalize(const std::vector<double>& values);

double ace_score(double a_norm, double c_norm, double e_norm, double delta_a,
                 double gamma_c, double eta_e);

struct VideoRunStats {
  double a_fr = 0, a_ev = 0;
  std::vector<double> latency_samples;  // seconds, one per detector call
  double energy_j = 0;
  long long source_frames = 0;
};

struct ProfilerOptions {
  double conf_thresh = 0.25;
  double iou_thresh = 0.5;
  double decay_gamma = 0.25;
  double lambda = 0.6;
  double source_fps = 30.0;
  int warmup_calls = 5;  // excluded from latency stats, per grid point
  std::optional<double> g640;
};

VideoRunStats run_one_video(DetectorOracle& oracle,
                            const GestureTimeline& timeline,
                            const ConfigPoint& point,
                            const ProfilerOptions& options);

// Oracle provider: one oracle per (model, video) pair.
using OracleProvider = std::function<std::unique_ptr<DetectorOracle>(
    const std::string& model, size_t video_index)>;

struct BuildWarning {
  ConfigPoint point;
  size_t video_index = 0;
  std::string message;
};

struct BuildResult {
  std::vector<AceProfile> profiles;
  std::vector<BuildWarning> warnings;
};

// Grid defaults r in {160, 320, 640} and k in {1, 2, 3, 6}.
std::vector<int> default_resolutions();
std::vector<int> default_strides();

// Per-model nominal GFLOPs at 640 px, optional.
using FlopsLookup =
    std::function<std::optional<double>(const std::string& model)>;

BuildResult build_table(const std::vector<std::string>& models,
                        const std::vector<int>& resolutions,
                        const std::vector<int>& strides,
                        const std::vector<GestureTimeline>& videos,
                        const OracleProvider& provider,
                        const ProfilerOptions& options,
                        const FlopsLookup& flops = nullptr);

std::string profiles_to_json(const std::vector<AceProfile>& profiles);
std::vector<AceProfile> profiles_from_json(const std::string& text);
std::vector<AceProfile> load_profiles(const std::string& path);
void save_profiles(const std::string& path,
                   const std::vector<AceProfile>& profiles);

PowerTrace load_power_trace_csv(const std::string& path, double idle_watts);

}  // namespace ace::profiler
