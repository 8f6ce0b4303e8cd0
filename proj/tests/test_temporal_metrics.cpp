#include <doctest.h>

#include <cmath>
#include <random>

#include "ace/temporal_metrics.hpp"

using namespace ace::metrics;

TEST_CASE("iou") {
  const Box unit{0, 0, 2, 2};
  CHECK(iou(unit, unit) == doctest::Approx(1.0));
  CHECK(iou(unit, Box{10, 10, 2, 2}) == 0.0);
  // Two 2x2 boxes offset by 1 in x: intersection 2, union 6.
  CHECK(iou(Box{0, 0, 2, 2}, Box{1, 0, 2, 2}) == doctest::Approx(2.0 / 6.0));
  // Touching edges count as disjoint.
  CHECK(iou(Box{0, 0, 2, 2}, Box{2, 0, 2, 2}) == 0.0);
}

TEST_CASE("hold_last_impute") {
  Detection det;
  det.frame = 0;
  det.box = {100, 100, 50, 50};
  det.confidence = 0.9;

  SUBCASE("stride one is the identity") {
    const FramePredictions dense = hold_last_impute({det}, 1, 3, 0.2);
    CHECK(dense[0].size() == 1);
    CHECK(dense[1].empty());
    CHECK(dense[2].empty());
    CHECK(dense[0][0] == det);
  }

  SUBCASE("exponential decay on held frames") {
    const FramePredictions dense = hold_last_impute({det}, 3, 3, 0.2);
    REQUIRE(dense[1].size() == 1);
    REQUIRE(dense[2].size() == 1);
    CHECK(dense[1][0].confidence ==
          doctest::Approx(0.9 * std::exp(-0.2)).epsilon(1e-9));
    CHECK(dense[2][0].confidence ==
          doctest::Approx(0.9 * std::exp(-0.4)).epsilon(1e-9));
    CHECK(dense[1][0].box == det.box);
  }

  SUBCASE("gamma zero holds confidence flat") {
    const FramePredictions dense = hold_last_impute({det}, 3, 3, 0.0);
    CHECK(dense[1][0].confidence == 0.9);
    CHECK(dense[2][0].confidence == 0.9);
  }

  SUBCASE("frames before the first detection stay empty") {
    Detection late = det;
    late.frame = 4;
    const FramePredictions dense = hold_last_impute({late}, 2, 8, 0.1);
    for (int f = 0; f < 4; ++f) CHECK(dense[f].empty());
    CHECK(dense[4].size() == 1);
    CHECK(dense[5].size() == 1);
  }

  SUBCASE("imputed confidence is non-increasing within a hold window") {
    const FramePredictions dense = hold_last_impute({det}, 6, 6, 0.25);
    for (int f = 1; f < 6; ++f)
      CHECK(dense[f][0].confidence <= dense[f - 1][0].confidence);
  }

  SUBCASE("invalid stride") {
    CHECK_THROWS_AS(hold_last_impute({det}, 0, 3, 0.1), MetricsError);
  }
}

namespace {

FramePredictions from_list(const std::vector<Detection>& dets,
                           int total_frames) {
  FramePredictions preds(total_frames);
  for (const Detection& d : dets) preds[d.frame].push_back(d);
  return preds;
}

}  // namespace

TEST_CASE("frame_metrics") {
  const Box box{50, 50, 20, 20};

  SUBCASE("perfect predictions") {
    std::vector<GroundTruthFrame> gt;
    std::vector<Detection> dets;
    for (int f = 0; f < 4; ++f) {
      gt.push_back({f, {{box, 1}}});
      dets.push_back({f, box, 1, 0.9});
    }
    const FrameMetrics m = frame_metrics(from_list(dets, 4), gt);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
  }

  SUBCASE("empty predictions against nonempty ground truth") {
    const std::vector<GroundTruthFrame> gt = {{0, {{box, 1}}}};
    const FrameMetrics m = frame_metrics(FramePredictions(1), gt);
    CHECK(m.precision == 0.0);
    CHECK(m.recall == 0.0);
    CHECK(m.f1 == 0.0);
  }

  SUBCASE("three-frame counting example") {
    // frame 0: match; frame 1: match + spurious; frame 2: miss.
    std::vector<GroundTruthFrame> gt = {
        {0, {{box, 1}}}, {1, {{box, 1}}}, {2, {{box, 1}}}};
    std::vector<Detection> dets = {{0, box, 1, 0.9},
                                   {1, box, 1, 0.9},
                                   {1, Box{200, 200, 20, 20}, 1, 0.8}};
    const FrameCounts c = frame_counts(from_list(dets, 3), gt, 0.5, 0.25);
    CHECK(c.tp == 2);
    CHECK(c.fp == 1);
    CHECK(c.fn == 1);
    const FrameMetrics m = frame_metrics(from_list(dets, 3), gt);
    CHECK(m.precision == doctest::Approx(2.0 / 3.0));
    CHECK(m.recall == doctest::Approx(2.0 / 3.0));
    CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
  }

  SUBCASE("class mismatch never matches") {
    const std::vector<GroundTruthFrame> gt = {{0, {{box, 1}}}};
    const std::vector<Detection> dets = {{0, box, 2, 0.9}};
    const FrameCounts c = frame_counts(from_list(dets, 1), gt, 0.5, 0.25);
    CHECK(c.tp == 0);
    CHECK(c.fp == 1);
    CHECK(c.fn == 1);
  }

  SUBCASE("below-threshold predictions are ignored entirely") {
    const std::vector<GroundTruthFrame> gt = {{0, {{box, 1}}}};
    const std::vector<Detection> dets = {{0, box, 1, 0.1}};
    const FrameCounts c = frame_counts(from_list(dets, 1), gt, 0.5, 0.25);
    CHECK(c.tp == 0);
    CHECK(c.fp == 0);
    CHECK(c.fn == 1);
  }

  SUBCASE("permutation invariance within a frame") {
    std::mt19937_64 rng(3);
    std::vector<GroundTruthFrame> gt = {
        {0, {{box, 1}, {Box{120, 50, 20, 20}, 1}}}};
    std::vector<Detection> dets = {{0, box, 1, 0.9},
                                   {0, Box{120, 50, 20, 20}, 1, 0.7},
                                   {0, Box{80, 50, 20, 20}, 1, 0.8}};
    const FrameCounts base = frame_counts(from_list(dets, 1), gt, 0.5, 0.25);
    for (int trial = 0; trial < 10; ++trial) {
      std::shuffle(dets.begin(), dets.end(), rng);
      const FrameCounts c = frame_counts(from_list(dets, 1), gt, 0.5, 0.25);
      CHECK(c.tp == base.tp);
      CHECK(c.fp == base.fp);
      CHECK(c.fn == base.fn);
    }
  }
}

TEST_CASE("event_f1") {
  const Box box{50, 50, 20, 20};

  SUBCASE("fully covered event") {
    std::vector<Detection> dets;
    for (int f = 10; f <= 19; ++f) dets.push_back({f, box, 1, 0.9});
    CHECK(event_f1(from_list(dets, 30), {{1, 10, 19}}, 0.25) == 1.0);
  }

  SUBCASE("single in-span positive suffices") {
    const std::vector<Detection> dets = {{14, box, 1, 0.9}};
    const EventCounts c = event_counts(from_list(dets, 30), {{1, 10, 19}},
                                       0.25);
    CHECK(c.tp == 1);
    CHECK(c.fp == 0);
    CHECK(c.fn == 0);
    CHECK(event_f1(from_list(dets, 30), {{1, 10, 19}}, 0.25) == 1.0);
  }

  SUBCASE("wrong class only") {
    const std::vector<Detection> dets = {{14, box, 2, 0.9}};
    const EventCounts c = event_counts(from_list(dets, 30), {{1, 10, 19}},
                                       0.25);
    CHECK(c.tp == 0);
    CHECK(c.fn == 1);
    CHECK(c.fp == 1);  // the class-2 run matches no event
    CHECK(event_f1(from_list(dets, 30), {{1, 10, 19}}, 0.25) == 0.0);
  }

  SUBCASE("spurious run outside any event counts one FP") {
    const std::vector<Detection> dets = {{2, box, 1, 0.9},
                                         {3, box, 1, 0.9},
                                         {14, box, 1, 0.9}};
    const EventCounts c = event_counts(from_list(dets, 30), {{1, 10, 19}},
                                       0.25);
    CHECK(c.tp == 1);
    CHECK(c.fp == 1);
    CHECK(c.fn == 0);
  }

  SUBCASE("run straddling the event boundary is not an FP") {
    std::vector<Detection> dets;
    for (int f = 18; f <= 22; ++f) dets.push_back({f, box, 1, 0.9});
    const EventCounts c = event_counts(from_list(dets, 30), {{1, 10, 19}},
                                       0.25);
    CHECK(c.tp == 1);
    CHECK(c.fp == 0);
  }
}

TEST_CASE("blended_accuracy") {
  CHECK(blended_accuracy(0.9, 0.8, 0.6) == doctest::Approx(0.86));
  CHECK(blended_accuracy(0.7, 0.3, 1.0) == 0.7);
  CHECK(blended_accuracy(0.7, 0.3, 0.0) == 0.3);
  CHECK_THROWS_AS(blended_accuracy(0.5, 0.5, 1.5), MetricsError);
  // Monotone in both arguments.
  CHECK(blended_accuracy(0.8, 0.5) <= blended_accuracy(0.9, 0.5));
  CHECK(blended_accuracy(0.8, 0.5) <= blended_accuracy(0.8, 0.6));
}

TEST_CASE("metric outputs stay in [0,1] on random inputs") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> pos(0, 200);
  std::uniform_int_distribution<int> cls(0, 2);
  std::uniform_real_distribution<double> conf(0, 1);
  for (int trial = 0; trial < 40; ++trial) {
    const int frames = 20;
    std::vector<GroundTruthFrame> gt;
    std::vector<Detection> dets;
    for (int f = 0; f < frames; ++f) {
      if (rng() % 2)
        gt.push_back({f, {{Box{pos(rng), pos(rng), 20, 20}, cls(rng)}}});
      if (rng() % 2)
        dets.push_back(
            {f, Box{pos(rng), pos(rng), 20, 20}, cls(rng), conf(rng)});
    }
    const FrameMetrics m = frame_metrics(from_list(dets, frames), gt);
    CHECK(m.precision >= 0);
    CHECK(m.precision <= 1);
    CHECK(m.recall >= 0);
    CHECK(m.recall <= 1);
    CHECK(m.f1 >= 0);
    CHECK(m.f1 <= 1);
    const double ef1 =
        event_f1(from_list(dets, frames), {{0, 3, 8}, {1, 12, 15}}, 0.25);
    CHECK(ef1 >= 0);
    CHECK(ef1 <= 1);
  }
}
