///////////////////////////////////////////////////////////////////////////////
// temporal_metrics.hpp: Frame- and event-level detection metrics on
// temporally annotated streams, with hold-last imputation for strided
// inference and a blended accuracy combining both levels.
///////////////////////////////////////////////////////////////////////////////

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ace::metrics {

struct Box {
  double cx = 0, cy = 0, w = 0, h = 0;

  bool operator==(const Box&) const = default;
};

struct Detection {
  int frame = 0;
  Box box;
  int class_id = 0;
  double confidence = 1.0;

  bool operator==(const Detection&) const = default;
};

struct GroundTruthEntry {
  Box box;
  int class_id = 0;
};

struct GroundTruthFrame {
  int frame = 0;
  std::vector<GroundTruthEntry> entries;
};

struct GestureEvent {
  int class_id = 0;
  int start_frame = 0;
  int end_frame = 0;  // inclusive
};

struct MetricsReport {
  double frame_precision = 0;
  double frame_recall = 0;
  double frame_f1 = 0;
  double event_f1 = 0;
  double blended = 0;
};

struct MetricsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Predictions indexed by frame; each frame holds zero or more detections.
using FramePredictions = std::vector<std::vector<Detection>>;

double iou(const Box& a, const Box& b);

// Spread strided detections (frames == 0 mod k) over skipped frames, with
// confidence decayed as c * exp(-gamma * (f - f0)). Frames before the first
// processed frame stay empty.
FramePredictions hold_last_impute(const std::vector<Detection>& sparse,
                                  int stride, int total_frames, double gamma);

struct FrameCounts {
  long long tp = 0, fp = 0, fn = 0;
};

FrameCounts frame_counts(const FramePredictions& preds,
                         const std::vector<GroundTruthFrame>& gt,
                         double iou_thresh, double conf_thresh);

struct FrameMetrics {
  double precision = 0, recall = 0, f1 = 0;
};

FrameMetrics frame_metrics(const FramePredictions& preds,
                           const std::vector<GroundTruthFrame>& gt,
                           double iou_thresh = 0.5, double conf_thresh = 0.25);

struct EventCounts {
  long long tp = 0, fp = 0, fn = 0;
};

// Event TP: some prediction of the matching class at conf >= conf_thresh lies
// inside the event span. FP events: maximal runs of positive predicted frames
// of a class intersecting no ground-truth event of that class.
EventCounts event_counts(const FramePredictions& preds,
                         const std::vector<GestureEvent>& events,
                         double conf_thresh);

double event_f1(const FramePredictions& preds,
                const std::vector<GestureEvent>& events, double conf_thresh);

double blended_accuracy(double a_ev, double a_fr, double lambda = 0.6);

inline double f1_from_counts(long long tp, long long fp, long long fn) {
  const long long denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
}

// JSONL / JSON file contracts: one object per frame with `frame` and `boxes`
// as arrays of [cx, cy, w, h, class, conf]; events as {class, start, end}.
std::vector<Detection> read_detections_jsonl(const std::string& path);
std::vector<GroundTruthFrame> read_ground_truth_jsonl(const std::string& path);
std::vector<GestureEvent> read_events_json(const std::string& path);
void write_detections_jsonl(const std::string& path,
                            const FramePredictions& preds);

}  // namespace ace::metrics
