#include "ace/temporal_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

namespace ace::metrics {

using nlohmann::json;

double iou(const Box& a, const Box& b) {
  const double ax0 = a.cx - a.w / 2, ax1 = a.cx + a.w / 2;
  const double ay0 = a.cy - a.h / 2, ay1 = a.cy + a.h / 2;
  const double bx0 = b.cx - b.w / 2, bx1 = b.cx + b.w / 2;
  const double by0 = b.cy - b.h / 2, by1 = b.cy + b.h / 2;
  const double iw = std::min(ax1, bx1) - std::max(ax0, bx0);
  const double ih = std::min(ay1, by1) - std::max(ay0, by0);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni <= 0 ? 0.0 : inter / uni;
}

FramePredictions hold_last_impute(const std::vector<Detection>& sparse,
                                  int stride, int total_frames, double gamma) {
  if (stride < 1) throw MetricsError("stride must be >= 1");
  FramePredictions dense(total_frames);
  for (const Detection& det : sparse) {
    if (det.frame >= 0 && det.frame < total_frames)
      dense[det.frame].push_back(det);
  }
  if (stride == 1) return dense;

  for (int f0 = 0; f0 < total_frames; f0 += stride) {
    if (dense[f0].empty()) continue;
    const int end = std::min(f0 + stride, total_frames);
    for (int f = f0 + 1; f < end; ++f) {
      for (Detection det : dense[f0]) {
        det.frame = f;
        det.confidence *= std::exp(-gamma * (f - f0));
        dense[f].push_back(det);
      }
    }
  }
  return dense;
}

FrameCounts frame_counts(const FramePredictions& preds,
                         const std::vector<GroundTruthFrame>& gt,
                         double iou_thresh, double conf_thresh) {
  std::map<int, const GroundTruthFrame*> gt_by_frame;
  for (const GroundTruthFrame& g : gt) gt_by_frame[g.frame] = &g;

  FrameCounts counts;
  std::map<int, std::vector<bool>> gt_matched;
  for (const GroundTruthFrame& g : gt)
    gt_matched[g.frame].assign(g.entries.size(), false);

  for (int f = 0; f < static_cast<int>(preds.size()); ++f) {
    std::vector<int> order(preds[f].size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return preds[f][a].confidence > preds[f][b].confidence;
    });

    auto it = gt_by_frame.find(f);
    for (int pi : order) {
      const Detection& det = preds[f][pi];
      if (det.confidence < conf_thresh) continue;
      int best_gt = -1;
      double best_iou = 0;
      if (it != gt_by_frame.end()) {
        const auto& entries = it->second->entries;
        auto& matched = gt_matched[f];
        for (size_t gi = 0; gi < entries.size(); ++gi) {
          if (matched[gi] || entries[gi].class_id != det.class_id) continue;
          const double overlap = iou(det.box, entries[gi].box);
          if (overlap >= iou_thresh && overlap > best_iou) {
            best_iou = overlap;
            best_gt = static_cast<int>(gi);
          }
        }
      }
      if (best_gt >= 0) {
        gt_matched[f][best_gt] = true;
        ++counts.tp;
      } else {
        ++counts.fp;
      }
    }
  }

  for (const auto& [frame, matched] : gt_matched)
    counts.fn += std::count(matched.begin(), matched.end(), false);
  return counts;
}

FrameMetrics frame_metrics(const FramePredictions& preds,
                           const std::vector<GroundTruthFrame>& gt,
                           double iou_thresh, double conf_thresh) {
  const FrameCounts c = frame_counts(preds, gt, iou_thresh, conf_thresh);
  FrameMetrics m;
  m.precision = c.tp + c.fp == 0
                    ? 0.0
                    : static_cast<double>(c.tp) / (c.tp + c.fp);
  m.recall =
      c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / (c.tp + c.fn);
  m.f1 = f1_from_counts(c.tp, c.fp, c.fn);
  return m;
}

EventCounts event_counts(const FramePredictions& preds,
                         const std::vector<GestureEvent>& events,
                         double conf_thresh) {
  // Positive predicted frames per class.
  std::map<int, std::vector<bool>> positive;
  const int total = static_cast<int>(preds.size());
  for (int f = 0; f < total; ++f) {
    for (const Detection& det : preds[f]) {
      if (det.confidence < conf_thresh) continue;
      auto& mask = positive[det.class_id];
      if (mask.empty()) mask.assign(total, false);
      mask[f] = true;
    }
  }

  EventCounts counts;
  for (const GestureEvent& ev : events) {
    bool hit = false;
    auto it = positive.find(ev.class_id);
    if (it != positive.end()) {
      for (int f = std::max(0, ev.start_frame);
           f <= std::min(total - 1, ev.end_frame) && !hit; ++f)
        hit = it->second[f];
    }
    hit ? ++counts.tp : ++counts.fn;
  }

  // FP events: maximal positive runs intersecting no GT event of the class.
  for (const auto& [class_id, mask] : positive) {
    int f = 0;
    while (f < total) {
      if (!mask[f]) {
        ++f;
        continue;
      }
      int run_end = f;
      while (run_end + 1 < total && mask[run_end + 1]) ++run_end;
      const bool overlaps_gt = std::any_of(
          events.begin(), events.end(), [&](const GestureEvent& ev) {
            return ev.class_id == class_id && ev.start_frame <= run_end &&
                   ev.end_frame >= f;
          });
      if (!overlaps_gt) ++counts.fp;
      f = run_end + 1;
    }
  }
  return counts;
}

double event_f1(const FramePredictions& preds,
                const std::vector<GestureEvent>& events, double conf_thresh) {
  const EventCounts c = event_counts(preds, events, conf_thresh);
  return f1_from_counts(c.tp, c.fp, c.fn);
}

double blended_accuracy(double a_ev, double a_fr, double lambda) {
  if (lambda < 0 || lambda > 1)
    throw MetricsError("lambda must lie in [0,1]");
  return lambda * a_ev + (1 - lambda) * a_fr;
}

namespace {

Box box_from_array(const json& arr) {
  return Box{arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>(),
             arr[3].get<double>()};
}

}  // namespace

std::vector<Detection> read_detections_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MetricsError("cannot open " + path);
  std::vector<Detection> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json obj = json::parse(line);
    const int frame = obj.at("frame").get<int>();
    for (const json& b : obj.at("boxes")) {
      Detection det;
      det.frame = frame;
      det.box = box_from_array(b);
      det.class_id = b[4].get<int>();
      det.confidence = b.size() > 5 ? b[5].get<double>() : 1.0;
      out.push_back(det);
    }
  }
  return out;
}

std::vector<GroundTruthFrame> read_ground_truth_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MetricsError("cannot open " + path);
  std::vector<GroundTruthFrame> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json obj = json::parse(line);
    GroundTruthFrame frame;
    frame.frame = obj.at("frame").get<int>();
    for (const json& b : obj.at("boxes"))
      frame.entries.push_back({box_from_array(b), b[4].get<int>()});
    out.push_back(std::move(frame));
  }
  return out;
}

std::vector<GestureEvent> read_events_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MetricsError("cannot open " + path);
  json doc;
  in >> doc;
  std::vector<GestureEvent> events;
  for (const json& e : doc)
    events.push_back({e.at("class").get<int>(), e.at("start").get<int>(),
                      e.at("end").get<int>()});
  return events;
}

void write_detections_jsonl(const std::string& path,
                            const FramePredictions& preds) {
  std::ofstream out(path);
  if (!out) throw MetricsError("cannot open " + path + " for writing");
  for (int f = 0; f < static_cast<int>(preds.size()); ++f) {
    json boxes = json::array();
    for (const Detection& det : preds[f])
      boxes.push_back({det.box.cx, det.box.cy, det.box.w, det.box.h,
                       det.class_id, det.confidence});
    json obj;
    obj["frame"] = f;
    obj["boxes"] = std::move(boxes);
    out << obj.dump() << "\n";
  }
}

}  // namespace ace::metrics
