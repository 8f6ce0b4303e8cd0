///////////////////////////////////////////////////////////////////////////////
// oracle.hpp: Detector oracle interface shared by the profiler, the ROI
// tracker, and the simulation harness. An oracle stands in for the real
// detector: it is invoked on a frame (optionally a sub-region) at a given
// input resolution and reports detections plus simulated cost.
///////////////////////////////////////////////////////////////////////////////

#pragma once

#include <optional>
#include <vector>

#include "ace/temporal_metrics.hpp"

namespace ace {

struct FrameSize {
  int width = 640;
  int height = 640;

  long long pixels() const {
    return static_cast<long long>(width) * height;
  }
};

struct Region {
  double x0 = 0, y0 = 0, width = 0, height = 0;

  double pixels() const { return width * height; }
  bool contains(double x, double y) const {
    return x >= x0 && x < x0 + width && y >= y0 && y < y0 + height;
  }
};

struct OracleResult {
  std::vector<metrics::Detection> detections;
  double latency_s = 0;
  double energy_j = 0;
};

class DetectorOracle {
 public:
  virtual ~DetectorOracle() = default;

  // Run on `frame` at input resolution `resolution`; `region` restricts the
  // query to a sub-region of the frame (full frame when absent). Detections
  // are reported in full-frame coordinates.
  virtual OracleResult detect(int frame, int resolution,
                              const std::optional<Region>& region) = 0;

  virtual FrameSize frame_size() const = 0;
};

}  // namespace ace
