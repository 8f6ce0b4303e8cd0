///////////////////////////////////////////////////////////////////////////////
// roi_tracker.hpp: Kalman-gated single-hand ROI tracking.
// Constant-velocity Kalman filter over box center, random walk over size.
// While a track is active the detector runs only on a square ROI around the
// predicted box; a miss budget drops the track back to full-frame
// acquisition.
///////////////////////////////////////////////////////////////////////////////

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ace/oracle.hpp"
#include "ace/temporal_metrics.hpp"

namespace ace::track {

struct TrackerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

// State layout: (cx, cy, w, h, vx, vy).
struct KalmanState {
  Vector6d mean = Vector6d::Zero();
  Matrix6d covariance = Matrix6d::Identity();

  metrics::Box box() const {
    return {mean(0), mean(1), mean(2), mean(3)};
  }
};

struct TrackerParams {
  double roi_scale = 1.8;      // s >= 1
  double iou_gate = 0.5;       // tau
  int miss_budget = 8;         // T_miss
  double process_pos_var = 1.0;
  double process_vel_var = 10.0;
  double process_size_var = 4.0;
  double measurement_var = 4.0;
  double init_pos_var = 10.0;
  double init_size_var = 10.0;
  double init_vel_var = 1000.0;
};

enum class TrackStatus { Inactive, Active };

struct TrackState {
  TrackStatus status = TrackStatus::Inactive;
  std::optional<KalmanState> kalman;
  int miss_count = 0;
};

struct Roi {
  double x0 = 0, y0 = 0, side = 0;

  double pixels() const { return side * side; }
  Region region() const { return {x0, y0, side, side}; }
};

KalmanState init_kalman(const metrics::Box& box, const TrackerParams& params);

// Constant-velocity propagation; returns the predicted box.
metrics::Box kf_predict(KalmanState& state, const TrackerParams& params);

Roi make_roi(const metrics::Box& predicted, double scale,
             const FrameSize& frame);

// Measurement update when IoU(measured, predicted) >= tau, otherwise
// re-initialization from the measurement.
void gate_and_update(KalmanState& state, const metrics::Box& predicted,
                     const metrics::Box& measured, const TrackerParams& params);

struct StepResult {
  std::optional<metrics::Box> box;
  bool track_active = false;  // true when this frame used the ROI path
  std::optional<Roi> roi;
  std::optional<metrics::Box> predicted;
  double processed_pixels = 0;
  double latency_s = 0;
  double energy_j = 0;
};

// One frame of Kalman-gated tracking: full-frame acquisition while inactive,
// predict / crop / detect / gate while active.
StepResult step(TrackState& state, int frame, DetectorOracle& oracle,
                int resolution, const TrackerParams& params);

struct FrameRecord {
  int frame = 0;
  std::optional<metrics::Box> box;
  bool track_active = false;
  std::optional<Roi> roi;
  double processed_pixels = 0;
};

std::string frame_record_to_jsonl(const FrameRecord& record);

}  // namespace ace::track
