#include "ace/ace_profiler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ace/runtime_selector.hpp"

namespace ace::profiler {

using nlohmann::json;

double effective_latency(double l_mean, int stride) {
  if (stride < 1) throw ProfilerError("stride must be >= 1");
  return l_mean / stride;
}

double effective_flops(double g640, int resolution, int stride) {
  const double scale = static_cast<double>(resolution) / 640.0;
  return g640 * scale * scale / stride;
}

namespace {

double interp(const PowerTrace& trace, size_t seg, double t) {
  const auto& [t0, w0] = trace.samples[seg];
  const auto& [t1, w1] = trace.samples[seg + 1];
  return w0 + (w1 - w0) * (t - t0) / (t1 - t0);
}

// Integral of max(w(t) - idle, 0) over one linear segment [ta, tb].
double segment_excess(double ta, double wa, double tb, double wb,
                      double idle) {
  const double ea = wa - idle;
  const double eb = wb - idle;
  if (ea <= 0 && eb <= 0) return 0;
  if (ea >= 0 && eb >= 0) return 0.5 * (ea + eb) * (tb - ta);
  // Zero crossing inside the segment.
  const double tc = ta + (tb - ta) * (0 - ea) / (eb - ea);
  if (ea > 0) return 0.5 * ea * (tc - ta);
  return 0.5 * eb * (tb - tc);
}

}  // namespace

EnergyResult integrate_energy(const PowerTrace& trace, double t0, double t1,
                              long long n_src) {
  if (trace.samples.size() < 2) throw ProfilerError("power trace too short");
  if (n_src < 1) throw ProfilerError("source frame count must be >= 1");
  if (!(t0 < t1)) throw ProfilerError("empty integration window");
  if (t0 < trace.samples.front().first || t1 > trace.samples.back().first)
    throw ProfilerError("integration window outside trace span");

  double joules = 0;
  for (size_t i = 0; i + 1 < trace.samples.size(); ++i) {
    const double seg_a = trace.samples[i].first;
    const double seg_b = trace.samples[i + 1].first;
    const double ta = std::max(seg_a, t0);
    const double tb = std::min(seg_b, t1);
    if (ta >= tb) continue;
    joules += segment_excess(ta, interp(trace, i, ta), tb,
                             interp(trace, i, tb), trace.idle_watts);
  }
  return {joules / n_src, joules / (t1 - t0)};
}

std::vector<double> minmax_normalize(const std::vector<double>& values) {
  if (values.empty()) throw ProfilerError("cannot normalize empty list");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(values.size(), 0.0);
  if (hi > lo)
    for (size_t i = 0; i < values.size(); ++i)
      out[i] = (values[i] - lo) / (hi - lo);
  return out;
}

double ace_score(double a_norm, double c_norm, double e_norm, double delta_a,
                 double gamma_c, double eta_e) {
  return delta_a * a_norm - gamma_c * c_norm - eta_e * e_norm;
}

VideoRunStats run_one_video(DetectorOracle& oracle,
                            const GestureTimeline& timeline,
                            const ConfigPoint& point,
                            const ProfilerOptions& options) {
  VideoRunStats stats;
  stats.source_frames = timeline.total_frames;

  std::vector<metrics::Detection> sparse;
  for (int f = 0; f < timeline.total_frames; f += point.stride) {
    OracleResult result = oracle.detect(f, point.resolution, std::nullopt);
    stats.latency_samples.push_back(result.latency_s);
    stats.energy_j += result.energy_j;
    if (result.detections.empty()) continue;
    // Keep the highest-confidence prediction per processed frame.
    const auto best = std::max_element(
        result.detections.begin(), result.detections.end(),
        [](const metrics::Detection& a, const metrics::Detection& b) {
          return a.confidence < b.confidence;
        });
    sparse.push_back(*best);
  }

  const metrics::FramePredictions dense = metrics::hold_last_impute(
      sparse, point.stride, timeline.total_frames, options.decay_gamma);
  stats.a_fr = metrics::frame_metrics(dense, timeline.gt, options.iou_thresh,
                                      options.conf_thresh)
                   .f1;
  stats.a_ev = metrics::event_f1(dense, timeline.events, options.conf_thresh);
  return stats;
}

std::vector<int> default_resolutions() { return {160, 320, 640}; }
std::vector<int> default_strides() { return {1, 2, 3, 6}; }

namespace {

double nearest_rank_p90(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const size_t rank = static_cast<size_t>(
      std::ceil(0.9 * static_cast<double>(values.size())));
  return values[std::max<size_t>(rank, 1) - 1];
}

}  // namespace

BuildResult build_table(const std::vector<std::string>& models,
                        const std::vector<int>& resolutions,
                        const std::vector<int>& strides,
                        const std::vector<GestureTimeline>& videos,
                        const OracleProvider& provider,
                        const ProfilerOptions& options,
                        const FlopsLookup& flops) {
  if (models.empty() || resolutions.empty() || strides.empty())
    throw ProfilerError("profiling grid must be non-empty");
  if (videos.empty()) throw ProfilerError("no videos to profile");

  BuildResult result;
  for (const std::string& model : models) {
    for (int r : resolutions) {
      for (int k : strides) {
        const ConfigPoint point{model, r, k};
        double a_fr_sum = 0, a_ev_sum = 0, energy = 0;
        long long src_frames = 0;
        std::vector<double> latencies;
        int ok_videos = 0;
        for (size_t vi = 0; vi < videos.size(); ++vi) {
          try {
            auto oracle = provider(model, vi);
            const VideoRunStats stats =
                run_one_video(*oracle, videos[vi], point, options);
            a_fr_sum += stats.a_fr;
            a_ev_sum += stats.a_ev;
            energy += stats.energy_j;
            src_frames += stats.source_frames;
            latencies.insert(latencies.end(), stats.latency_samples.begin(),
                             stats.latency_samples.end());
            ++ok_videos;
          } catch (const std::exception& e) {
            result.warnings.push_back({point, vi, e.what()});
          }
        }
        if (ok_videos == 0 || src_frames == 0) {
          result.warnings.push_back(
              {point, 0, "no successful videos; grid point omitted"});
          continue;
        }

        AceProfile profile;
        profile.point = point;
        profile.raw.a_fr = a_fr_sum / ok_videos;
        profile.raw.a_ev = a_ev_sum / ok_videos;
        profile.raw.a_blend = metrics::blended_accuracy(
            profile.raw.a_ev, profile.raw.a_fr, options.lambda);

        // Warm-up calls are excluded from latency statistics.
        std::vector<double> timed(latencies.begin() +
                                      std::min<size_t>(options.warmup_calls,
                                                       latencies.size()),
                                  latencies.end());
        if (timed.empty()) timed = latencies;
        profile.raw.l_mean =
            std::accumulate(timed.begin(), timed.end(), 0.0) / timed.size();
        profile.raw.l_p90 = nearest_rank_p90(timed);
        profile.raw.l_eff = effective_latency(profile.raw.l_mean, k);

        if (flops) {
          if (auto g = flops(model)) {
            profile.raw.g640 = g;
            profile.raw.c_flop = effective_flops(*g, r, k);
          }
        }

        profile.raw.e_per_frame = energy / src_frames;
        profile.raw.mean_excess_power =
            energy / (src_frames / options.source_fps);
        result.profiles.push_back(std::move(profile));
      }
    }
  }

  if (result.profiles.empty()) return result;

  std::vector<double> accs, lats, engs, flop_vals;
  bool all_flops = true;
  for (const AceProfile& p : result.profiles) {
    accs.push_back(p.raw.a_blend);
    lats.push_back(p.raw.l_eff);
    engs.push_back(p.raw.e_per_frame);
    if (p.raw.c_flop)
      flop_vals.push_back(*p.raw.c_flop);
    else
      all_flops = false;
  }
  if (!all_flops) flop_vals.clear();

  const std::vector<double> a_norm = minmax_normalize(accs);
  const std::vector<double> e_norm = minmax_normalize(engs);
  const select::ComplexityMix mix = select::complexity_mix(lats, flop_vals);
  for (size_t i = 0; i < result.profiles.size(); ++i) {
    AceProfile& p = result.profiles[i];
    p.a_norm = a_norm[i];
    p.c_norm = mix.c_norm[i];
    p.e_norm = e_norm[i];
    // Stored scores use neutral weights; the selector re-scores at run time.
    p.score = ace_score(p.a_norm, p.c_norm, p.e_norm, 1.0 / 3, 1.0 / 3,
                        1.0 / 3);
  }
  return result;
}

namespace {

json profile_to_json(const AceProfile& p) {
  json obj;
  obj["model"] = p.point.model;
  obj["resolution"] = p.point.resolution;
  obj["stride"] = p.point.stride;
  obj["a_fr"] = p.raw.a_fr;
  obj["a_ev"] = p.raw.a_ev;
  obj["a_blend"] = p.raw.a_blend;
  obj["l_mean_ms"] = p.raw.l_mean * 1e3;
  obj["l_p90_ms"] = p.raw.l_p90 * 1e3;
  obj["l_eff_ms"] = p.raw.l_eff * 1e3;
  if (p.raw.g640) obj["g640"] = *p.raw.g640;
  else obj["g640"] = nullptr;
  if (p.raw.c_flop) obj["c_flop"] = *p.raw.c_flop;
  else obj["c_flop"] = nullptr;
  obj["e_mj_per_frame"] = p.raw.e_per_frame * 1e3;
  obj["mean_excess_w"] = p.raw.mean_excess_power;
  obj["a_norm"] = p.a_norm;
  obj["c_norm"] = p.c_norm;
  obj["e_norm"] = p.e_norm;
  obj["score"] = p.score;
  return obj;
}

AceProfile profile_from_json(const json& obj) {
  AceProfile p;
  p.point.model = obj.at("model").get<std::string>();
  p.point.resolution = obj.at("resolution").get<int>();
  p.point.stride = obj.at("stride").get<int>();
  p.raw.a_fr = obj.value("a_fr", 0.0);
  p.raw.a_ev = obj.value("a_ev", 0.0);
  p.raw.a_blend = obj.at("a_blend").get<double>();
  p.raw.l_mean = obj.at("l_mean_ms").get<double>() * 1e-3;
  p.raw.l_p90 = obj.value("l_p90_ms", obj.at("l_mean_ms").get<double>()) * 1e-3;
  p.raw.l_eff = obj.value("l_eff_ms",
                          obj.at("l_mean_ms").get<double>() / p.point.stride) *
                1e-3;
  if (obj.contains("g640") && !obj["g640"].is_null())
    p.raw.g640 = obj["g640"].get<double>();
  if (obj.contains("c_flop") && !obj["c_flop"].is_null())
    p.raw.c_flop = obj["c_flop"].get<double>();
  p.raw.e_per_frame = obj.at("e_mj_per_frame").get<double>() * 1e-3;
  p.raw.mean_excess_power = obj.value("mean_excess_w", 0.0);
  p.a_norm = obj.value("a_norm", 0.0);
  p.c_norm = obj.value("c_norm", 0.0);
  p.e_norm = obj.value("e_norm", 0.0);
  p.score = obj.value("score", 0.0);
  return p;
}

}  // namespace

std::string profiles_to_json(const std::vector<AceProfile>& profiles) {
  json arr = json::array();
  for (const AceProfile& p : profiles) arr.push_back(profile_to_json(p));
  return arr.dump(2);
}

std::vector<AceProfile> profiles_from_json(const std::string& text) {
  json arr;
  try {
    arr = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ProfilerError(std::string("invalid profiles document: ") + e.what());
  }
  std::vector<AceProfile> out;
  for (const json& obj : arr) out.push_back(profile_from_json(obj));
  return out;
}

std::vector<AceProfile> load_profiles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ProfilerError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return profiles_from_json(buf.str());
}

void save_profiles(const std::string& path,
                   const std::vector<AceProfile>& profiles) {
  std::ofstream out(path);
  if (!out) throw ProfilerError("cannot open " + path + " for writing");
  out << profiles_to_json(profiles) << "\n";
}

PowerTrace load_power_trace_csv(const std::string& path, double idle_watts) {
  std::ifstream in(path);
  if (!in) throw ProfilerError("cannot open " + path);
  PowerTrace trace;
  trace.idle_watts = idle_watts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.find("timestamp") != std::string::npos) continue;  // header
    std::istringstream ss(line);
    double t, w;
    char comma;
    if (!(ss >> t >> comma >> w))
      throw ProfilerError("malformed power trace line: " + line);
    if (!trace.samples.empty() && t <= trace.samples.back().first)
      throw ProfilerError("power trace timestamps must strictly increase");
    trace.samples.emplace_back(t, w);
  }
  return trace;
}

}  // namespace ace::profiler
