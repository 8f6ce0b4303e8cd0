#include "ace/roi_tracker.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace ace::track {

using metrics::Box;
using nlohmann::json;

namespace {

Matrix6d transition_matrix() {
  Matrix6d f = Matrix6d::Identity();
  f(0, 4) = 1;
  f(1, 5) = 1;
  return f;
}

Matrix6d process_noise(const TrackerParams& p) {
  Matrix6d q = Matrix6d::Zero();
  q(0, 0) = q(1, 1) = p.process_pos_var;
  q(2, 2) = q(3, 3) = p.process_size_var;
  q(4, 4) = q(5, 5) = p.process_vel_var;
  return q;
}

Matrix6d init_covariance(const TrackerParams& p) {
  Matrix6d cov = Matrix6d::Zero();
  cov(0, 0) = cov(1, 1) = p.init_pos_var;
  cov(2, 2) = cov(3, 3) = p.init_size_var;
  cov(4, 4) = cov(5, 5) = p.init_vel_var;
  return cov;
}

Box clip_box(const Box& box, const FrameSize& frame) {
  Box out = box;
  out.w = std::min(out.w, static_cast<double>(frame.width));
  out.h = std::min(out.h, static_cast<double>(frame.height));
  out.cx = std::clamp(out.cx, out.w / 2, frame.width - out.w / 2);
  out.cy = std::clamp(out.cy, out.h / 2, frame.height - out.h / 2);
  return out;
}

std::optional<Box> best_detection(const OracleResult& result) {
  if (result.detections.empty()) return std::nullopt;
  const auto best = std::max_element(
      result.detections.begin(), result.detections.end(),
      [](const metrics::Detection& a, const metrics::Detection& b) {
        return a.confidence < b.confidence;
      });
  return best->box;
}

}  // namespace

KalmanState init_kalman(const Box& box, const TrackerParams& params) {
  KalmanState state;
  state.mean << box.cx, box.cy, box.w, box.h, 0, 0;
  state.covariance = init_covariance(params);
  return state;
}

Box kf_predict(KalmanState& state, const TrackerParams& params) {
  const Matrix6d f = transition_matrix();
  state.mean = f * state.mean;
  state.covariance =
      f * state.covariance * f.transpose() + process_noise(params);
  return state.box();
}

Roi make_roi(const Box& predicted, double scale, const FrameSize& frame) {
  if (predicted.w <= 0 || predicted.h <= 0)
    throw TrackerError("degenerate predicted box");
  if (scale < 1) throw TrackerError("roi scale must be >= 1");
  double side = scale * std::max(predicted.w, predicted.h);
  side = std::min({side, static_cast<double>(frame.width),
                   static_cast<double>(frame.height)});
  Roi roi;
  roi.side = side;
  // Shift the square inward before truncating.
  roi.x0 = std::clamp(predicted.cx - side / 2, 0.0, frame.width - side);
  roi.y0 = std::clamp(predicted.cy - side / 2, 0.0, frame.height - side);
  return roi;
}

void gate_and_update(KalmanState& state, const Box& predicted,
                     const Box& measured, const TrackerParams& params) {
  if (metrics::iou(measured, predicted) >= params.iou_gate) {
    Eigen::Matrix<double, 4, 6> h = Eigen::Matrix<double, 4, 6>::Zero();
    h(0, 0) = h(1, 1) = h(2, 2) = h(3, 3) = 1;
    const Eigen::Matrix4d r =
        Eigen::Matrix4d::Identity() * params.measurement_var;
    const Eigen::Vector4d z(measured.cx, measured.cy, measured.w, measured.h);
    const Eigen::Vector4d innovation = z - h * state.mean;
    const Eigen::Matrix4d s = h * state.covariance * h.transpose() + r;
    const Eigen::Matrix<double, 6, 4> gain =
        state.covariance * h.transpose() * s.inverse();
    state.mean += gain * innovation;
    state.covariance = (Matrix6d::Identity() - gain * h) * state.covariance;
  } else {
    state = init_kalman(measured, params);
  }
}

StepResult step(TrackState& state, int frame, DetectorOracle& oracle,
                int resolution, const TrackerParams& params) {
  const FrameSize frame_size = oracle.frame_size();
  StepResult result;

  if (state.status == TrackStatus::Inactive) {
    const OracleResult detection =
        oracle.detect(frame, resolution, std::nullopt);
    result.latency_s = detection.latency_s;
    result.energy_j = detection.energy_j;
    result.processed_pixels = static_cast<double>(frame_size.pixels());
    if (auto box = best_detection(detection)) {
      state.kalman = init_kalman(*box, params);
      state.status = TrackStatus::Active;
      state.miss_count = 0;
      result.box = clip_box(*box, frame_size);
    }
    return result;
  }

  result.track_active = true;
  const Box predicted = kf_predict(*state.kalman, params);
  result.predicted = predicted;
  const Roi roi = make_roi(predicted, params.roi_scale, frame_size);
  result.roi = roi;
  result.processed_pixels = roi.pixels();

  const OracleResult detection =
      oracle.detect(frame, resolution, roi.region());
  result.latency_s = detection.latency_s;
  result.energy_j = detection.energy_j;

  if (auto box = best_detection(detection)) {
    state.miss_count = 0;
    gate_and_update(*state.kalman, predicted, *box, params);
    result.box = clip_box(*box, frame_size);
  } else {
    ++state.miss_count;
    if (state.miss_count >= params.miss_budget) {
      state.status = TrackStatus::Inactive;
      state.kalman.reset();
      state.miss_count = 0;
    }
  }
  return result;
}

std::string frame_record_to_jsonl(const FrameRecord& record) {
  json obj;
  obj["frame"] = record.frame;
  if (record.box)
    obj["box"] = {record.box->cx, record.box->cy, record.box->w,
                  record.box->h};
  else
    obj["box"] = nullptr;
  obj["track_active"] = record.track_active;
  if (record.roi)
    obj["roi"] = {record.roi->x0, record.roi->y0, record.roi->side};
  else
    obj["roi"] = nullptr;
  obj["processed_pixels"] = record.processed_pixels;
  return obj.dump();
}

}  // namespace ace::track
