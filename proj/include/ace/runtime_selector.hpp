///////////////////////////////////////////////////////////////////////////////
// runtime_selector.hpp: Constraint- and telemetry-driven profile selection.
// Budgets derived from constraints are turned into slacks, live telemetry
// into pressures; both drive adaptive accuracy/complexity/energy weights
// used to rank profiles, with hysteresis keeping the decision stable.
///////////////////////////////////////////////////////////////////////////////

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ace/ace_profiler.hpp"

namespace ace::select {

struct SelectorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Constraints {
  double a_min = 0.0;            // minimum blended accuracy
  double fps_target = 30.0;      // frames per second
  double battery_capacity_wh = 50.0;
  double state_of_charge = 1.0;  // fraction
  double horizon_s = 3600.0;
  double background_power_w = 0.0;
  std::optional<double> e_bud_override_j;  // joules per frame
};

struct TelemetrySample {
  double timestamp = 0;
  double battery_pct = 100;
  double cpu_temp_c = 40;
  double gpu_temp_c = 40;
  double gpu_util_pct = 0;
  double power_w = 0;
};

struct Slacks {
  double s_lat = 0, s_energy = 0, s_acc = 0;  // each in [0,1]
};

struct Pressures {
  double thermal = 0;  // [0,2]
  double util = 0;     // [0,2]
  double battery = 0;  // [0,1]
};

struct AceWeights {
  double delta_a = 0, gamma_c = 0, eta_e = 0;  // sum to 1
};

struct Decision {
  profiler::ConfigPoint chosen;
  double score = 0;
  std::vector<std::pair<profiler::ConfigPoint, double>> top_k;
  AceWeights weights;
  Slacks slacks;
  Pressures pressures;
  int feasible_count = 0;
  bool fallback = false;
  double timestamp = 0;
};

double latency_budget(double fps_target);  // seconds per frame

double energy_budget(const Constraints& constraints);  // joules per frame

struct FeasibleSet {
  std::vector<profiler::AceProfile> profiles;
  bool fallback = false;  // set when no profile satisfied the budgets
};

FeasibleSet feasible_set(const std::vector<profiler::AceProfile>& profiles,
                         double l_bud, double e_bud, double a_min);

Slacks compute_slacks(const std::vector<profiler::AceProfile>& profiles,
                      double l_bud, double e_bud, double a_min);

struct PressureCaps {
  double t_cap_c = 85.0;
  double util_thresh_pct = 90.0;
};

Pressures compute_pressures(const TelemetrySample& sample,
                            const PressureCaps& caps = {});

// Raw weights: delta ~ exp(2 s_acc) exp(1 - battery);
// gamma ~ exp(3 (1 - s_lat)) exp(2.5 thermal) exp(1.5 util);
// eta ~ exp(2.5 (1 - s_energy)) exp(3 battery); normalized to sum 1.
// accuracy_boost multiplies the raw accuracy weight (gesture-active boost).
AceWeights adaptive_weights(const Slacks& slacks, const Pressures& pressures,
                            double accuracy_boost = 1.0);

double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct ComplexityMix {
  std::vector<double> c_norm;
  double alpha_flop = 0, alpha_lat = 1;
};

// Mix normalized latency and flops with alpha_flop = 0.3 (1 - |rho|). The
// flops list may be empty (then c_norm is normalized latency alone).
ComplexityMix complexity_mix(const std::vector<double>& latencies,
                             const std::vector<double>& flops);

// Rank candidates by S = dA*a_norm - gC*c_norm - eE*e_norm over normalized
// axes computed across `all` (candidates must be a subset of `all`).
std::vector<std::pair<profiler::ConfigPoint, double>> rank(
    const std::vector<profiler::AceProfile>& candidates,
    const std::vector<profiler::AceProfile>& all, const AceWeights& weights,
    int top_k = 5);

struct SelectorOptions {
  PressureCaps caps;
  double hysteresis_margin = 0.02;
  int hysteresis_window = 3;
  double ema_factor = 0.5;
  int top_k = 5;
  double accuracy_boost = 1.0;  // applied when a gesture is active
};

// Per-selector mutable state: incumbent decision, smoothed scores and the
// challenger streak for hysteresis.
class SelectorState {
 public:
  explicit SelectorState(SelectorOptions options = {})
      : options_(options) {}

  const SelectorOptions& options() const { return options_; }
  const std::optional<Decision>& incumbent() const { return incumbent_; }

  // Applies EMA smoothing and windowed hysteresis to a candidate ranking.
  Decision smooth_and_hold(
      const std::vector<std::pair<profiler::ConfigPoint, double>>& ranking);

  void reset();

 private:
  SelectorOptions options_;
  std::optional<Decision> incumbent_;
  std::vector<std::pair<profiler::ConfigPoint, double>> ema_;
  std::optional<profiler::ConfigPoint> challenger_;
  int challenger_streak_ = 0;

  double smoothed(const profiler::ConfigPoint& point, double score);
};

// One full control evaluation: budgets -> feasible set -> slacks ->
// pressures -> weights -> ranking -> hysteresis.
Decision control_step(const std::vector<profiler::AceProfile>& profiles,
                      const Constraints& constraints,
                      const TelemetrySample& telemetry, SelectorState& state,
                      bool gesture_active = false);

std::vector<TelemetrySample> load_telemetry_csv(const std::string& path);

std::string decision_to_jsonl(const Decision& decision);

}  // namespace ace::select
