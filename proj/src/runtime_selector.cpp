#include "ace/runtime_selector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace ace::select {

using nlohmann::json;
using profiler::AceProfile;
using profiler::ConfigPoint;

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

double latency_budget(double fps_target) {
  if (fps_target <= 0) throw SelectorError("fps target must be positive");
  return 1.0 / fps_target;
}

double energy_budget(const Constraints& constraints) {
  if (constraints.e_bud_override_j) return *constraints.e_bud_override_j;
  if (constraints.horizon_s <= 0) throw SelectorError("horizon must be > 0");
  const double usable_j =
      constraints.battery_capacity_wh * 3600.0 * constraints.state_of_charge -
      constraints.background_power_w * constraints.horizon_s;
  const double frames = constraints.fps_target * constraints.horizon_s;
  return std::max(0.0, usable_j) / frames;
}

FeasibleSet feasible_set(const std::vector<AceProfile>& profiles, double l_bud,
                         double e_bud, double a_min) {
  FeasibleSet out;
  for (const AceProfile& p : profiles) {
    if (p.raw.a_blend >= a_min && p.raw.l_eff <= l_bud &&
        p.raw.e_per_frame <= e_bud)
      out.profiles.push_back(p);
  }
  if (out.profiles.empty()) {
    out.profiles = profiles;
    out.fallback = true;
  }
  return out;
}

Slacks compute_slacks(const std::vector<AceProfile>& profiles, double l_bud,
                      double e_bud, double a_min) {
  if (profiles.empty()) throw SelectorError("no profiles for slacks");
  double min_l = profiles[0].raw.l_eff;
  double min_e = profiles[0].raw.e_per_frame;
  double max_a = profiles[0].raw.a_blend;
  for (const AceProfile& p : profiles) {
    min_l = std::min(min_l, p.raw.l_eff);
    min_e = std::min(min_e, p.raw.e_per_frame);
    max_a = std::max(max_a, p.raw.a_blend);
  }
  Slacks s;
  s.s_lat = l_bud > 0 ? clamp01((l_bud - min_l) / l_bud) : 0.0;
  s.s_energy = e_bud > 0 ? clamp01((e_bud - min_e) / e_bud) : 0.0;
  s.s_acc = a_min < 1.0 ? clamp01((max_a - a_min) / (1.0 - a_min))
                        : (max_a >= a_min ? 1.0 : 0.0);
  return s;
}

Pressures compute_pressures(const TelemetrySample& sample,
                            const PressureCaps& caps) {
  if (caps.t_cap_c <= 0 || caps.util_thresh_pct <= 0)
    throw SelectorError("pressure caps must be positive");
  Pressures p;
  p.thermal = std::clamp(
      std::max(sample.cpu_temp_c, sample.gpu_temp_c) / caps.t_cap_c, 0.0, 2.0);
  p.util = std::clamp(sample.gpu_util_pct / caps.util_thresh_pct, 0.0, 2.0);
  p.battery = clamp01(1.0 - sample.battery_pct / 100.0);
  return p;
}

AceWeights adaptive_weights(const Slacks& slacks, const Pressures& pressures,
                            double accuracy_boost) {
  const double delta_raw = std::exp(2.0 * slacks.s_acc) *
                           std::exp(1.0 - pressures.battery) * accuracy_boost;
  const double gamma_raw = std::exp(3.0 * (1.0 - slacks.s_lat)) *
                           std::exp(2.5 * pressures.thermal) *
                           std::exp(1.5 * pressures.util);
  const double eta_raw = std::exp(2.5 * (1.0 - slacks.s_energy)) *
                         std::exp(3.0 * pressures.battery);
  const double sum = delta_raw + gamma_raw + eta_raw;
  return {delta_raw / sum, gamma_raw / sum, eta_raw / sum};
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
  const size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + j) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double cov = 0, va = 0, vb = 0;
  for (size_t i = 0; i < n; ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va == 0 || vb == 0) return 0;
  return cov / std::sqrt(va * vb);
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw SelectorError("length mismatch");
  if (a.size() < 2) throw SelectorError("need at least two samples");
  return pearson(average_ranks(a), average_ranks(b));
}

ComplexityMix complexity_mix(const std::vector<double>& latencies,
                             const std::vector<double>& flops) {
  if (latencies.empty()) throw SelectorError("no latencies to mix");
  ComplexityMix mix;
  const std::vector<double> lat_norm = profiler::minmax_normalize(latencies);
  if (flops.size() != latencies.size() || latencies.size() < 2) {
    mix.alpha_flop = 0;
    mix.alpha_lat = 1;
    mix.c_norm = lat_norm;
    return mix;
  }
  const double rho = spearman(flops, latencies);
  mix.alpha_flop = 0.3 * (1.0 - std::abs(rho));
  mix.alpha_lat = 1.0 - mix.alpha_flop;
  const std::vector<double> flop_norm = profiler::minmax_normalize(flops);
  mix.c_norm.resize(latencies.size());
  for (size_t i = 0; i < latencies.size(); ++i)
    mix.c_norm[i] = mix.alpha_lat * lat_norm[i] + mix.alpha_flop * flop_norm[i];
  return mix;
}

std::vector<std::pair<ConfigPoint, double>> rank(
    const std::vector<AceProfile>& candidates,
    const std::vector<AceProfile>& all, const AceWeights& weights, int top_k) {
  if (all.empty()) throw SelectorError("no profiles to rank");

  std::vector<double> accs, lats, engs, flop_vals;
  bool all_flops = true;
  for (const AceProfile& p : all) {
    accs.push_back(p.raw.a_blend);
    lats.push_back(p.raw.l_eff);
    engs.push_back(p.raw.e_per_frame);
    if (p.raw.c_flop)
      flop_vals.push_back(*p.raw.c_flop);
    else
      all_flops = false;
  }
  if (!all_flops) flop_vals.clear();
  const std::vector<double> a_norm = profiler::minmax_normalize(accs);
  const std::vector<double> e_norm = profiler::minmax_normalize(engs);
  const ComplexityMix mix = complexity_mix(lats, flop_vals);

  struct Scored {
    ConfigPoint point;
    double score, c, e;
  };
  std::vector<Scored> scored;
  for (const AceProfile& cand : candidates) {
    const auto it = std::find_if(
        all.begin(), all.end(),
        [&](const AceProfile& p) { return p.point == cand.point; });
    if (it == all.end())
      throw SelectorError("candidate not present in profile table");
    const size_t i = static_cast<size_t>(it - all.begin());
    scored.push_back({cand.point,
                      profiler::ace_score(a_norm[i], mix.c_norm[i], e_norm[i],
                                weights.delta_a, weights.gamma_c,
                                weights.eta_e),
                      mix.c_norm[i], e_norm[i]});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a,
                                             const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.e != b.e) return a.e < b.e;
    if (a.c != b.c) return a.c < b.c;
    return a.point < b.point;
  });

  std::vector<std::pair<ConfigPoint, double>> out;
  for (const Scored& s : scored) {
    out.emplace_back(s.point, s.score);
    if (top_k > 0 && static_cast<int>(out.size()) >= top_k) break;
  }
  return out;
}

double SelectorState::smoothed(const ConfigPoint& point, double score) {
  for (auto& [p, ema] : ema_) {
    if (p == point) {
      ema = options_.ema_factor * score + (1 - options_.ema_factor) * ema;
      return ema;
    }
  }
  ema_.emplace_back(point, score);
  return score;
}

void SelectorState::reset() {
  incumbent_.reset();
  ema_.clear();
  challenger_.reset();
  challenger_streak_ = 0;
}

Decision SelectorState::smooth_and_hold(
    const std::vector<std::pair<ConfigPoint, double>>& ranking) {
  if (ranking.empty()) throw SelectorError("empty ranking");

  std::vector<std::pair<ConfigPoint, double>> smoothed_scores;
  for (const auto& [point, score] : ranking)
    smoothed_scores.emplace_back(point, smoothed(point, score));

  const auto raw_score = [&](const ConfigPoint& point) {
    for (const auto& [p, s] : ranking)
      if (p == point) return s;
    return ranking.front().second;
  };
  const auto ema_of = [&](const ConfigPoint& point) {
    for (const auto& [p, s] : smoothed_scores)
      if (p == point) return s;
    return smoothed_scores.front().second;
  };

  const auto in_ranking = [&](const ConfigPoint& point) {
    return std::any_of(ranking.begin(), ranking.end(),
                       [&](const auto& e) { return e.first == point; });
  };

  ConfigPoint chosen = ranking.front().first;
  if (incumbent_ && in_ranking(incumbent_->chosen)) {
    chosen = incumbent_->chosen;
    const ConfigPoint top = ranking.front().first;
    if (top != incumbent_->chosen &&
        ema_of(top) - ema_of(incumbent_->chosen) >=
            options_.hysteresis_margin) {
      if (challenger_ && *challenger_ == top)
        ++challenger_streak_;
      else {
        challenger_ = top;
        challenger_streak_ = 1;
      }
      if (challenger_streak_ >= options_.hysteresis_window) {
        chosen = top;
        challenger_.reset();
        challenger_streak_ = 0;
      }
    } else {
      challenger_.reset();
      challenger_streak_ = 0;
    }
  } else {
    challenger_.reset();
    challenger_streak_ = 0;
  }

  Decision decision;
  decision.chosen = chosen;
  decision.score = raw_score(chosen);
  decision.top_k.emplace_back(chosen, decision.score);
  for (const auto& entry : ranking)
    if (entry.first != chosen) decision.top_k.push_back(entry);
  incumbent_ = decision;
  return decision;
}

Decision control_step(const std::vector<AceProfile>& profiles,
                      const Constraints& constraints,
                      const TelemetrySample& telemetry, SelectorState& state,
                      bool gesture_active) {
  if (profiles.empty()) throw SelectorError("no profiles loaded");

  const double l_bud = latency_budget(constraints.fps_target);
  const double e_bud = energy_budget(constraints);
  const FeasibleSet feasible =
      feasible_set(profiles, l_bud, e_bud, constraints.a_min);
  const Slacks slacks =
      compute_slacks(feasible.profiles, l_bud, e_bud, constraints.a_min);
  const Pressures pressures =
      compute_pressures(telemetry, state.options().caps);
  const AceWeights weights = adaptive_weights(
      slacks, pressures,
      gesture_active ? state.options().accuracy_boost : 1.0);

  const auto ranking = rank(feasible.profiles, profiles, weights, 0);
  Decision decision = state.smooth_and_hold(ranking);
  decision.weights = weights;
  decision.slacks = slacks;
  decision.pressures = pressures;
  decision.feasible_count =
      feasible.fallback ? 0 : static_cast<int>(feasible.profiles.size());
  decision.fallback = feasible.fallback;
  decision.timestamp = telemetry.timestamp;
  if (state.options().top_k > 0 &&
      static_cast<int>(decision.top_k.size()) > state.options().top_k)
    decision.top_k.resize(state.options().top_k);
  return decision;
}

std::vector<TelemetrySample> load_telemetry_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SelectorError("cannot open " + path);
  std::vector<TelemetrySample> samples;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.find("timestamp") != std::string::npos) continue;
    std::istringstream ss(line);
    TelemetrySample s;
    char c;
    if (!(ss >> s.timestamp >> c >> s.battery_pct >> c >> s.cpu_temp_c >> c >>
          s.gpu_temp_c >> c >> s.gpu_util_pct >> c >> s.power_w))
      throw SelectorError("malformed telemetry line: " + line);
    samples.push_back(s);
  }
  return samples;
}

std::string decision_to_jsonl(const Decision& decision) {
  json obj;
  obj["t"] = decision.timestamp;
  obj["chosen"] = {{"model", decision.chosen.model},
                   {"resolution", decision.chosen.resolution},
                   {"stride", decision.chosen.stride}};
  obj["score"] = decision.score;
  obj["weights"] = {{"dA", decision.weights.delta_a},
                    {"gC", decision.weights.gamma_c},
                    {"eE", decision.weights.eta_e}};
  obj["slacks"] = {{"s_lat", decision.slacks.s_lat},
                   {"s_energy", decision.slacks.s_energy},
                   {"s_acc", decision.slacks.s_acc}};
  obj["pressures"] = {{"thermal", decision.pressures.thermal},
                      {"util", decision.pressures.util},
                      {"battery", decision.pressures.battery}};
  obj["feasible_count"] = decision.feasible_count;
  obj["fallback"] = decision.fallback;
  json top = json::array();
  for (const auto& [point, score] : decision.top_k)
    top.push_back({{"model", point.model},
                   {"resolution", point.resolution},
                   {"stride", point.stride},
                   {"score", score}});
  obj["top_k"] = std::move(top);
  return obj.dump();
}

}  // namespace ace::select
