#pragma once

#include <vector>

#include "hgo/losses.hpp"

namespace hgo {

struct Detection {
  Box box;
  int class_id = 0;
  double confidence = 0.0;
};

struct GtBox {
  Box box;
  int class_id = 0;
};

// plain IoU with guarded division (shared by matching and NMS)
double box_iou(const Box& a, const Box& b);

// Greedy matching for one image: detections are taken in descending
// confidence (ties by input index), each matching the highest-IoU unmatched
// same-class GT with IoU >= threshold. tp is aligned with the input order.
struct MatchResult {
  std::vector<bool> tp;
  int fn = 0;
};
MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<GtBox>& gts,
                             double iou_threshold);

// All-point AP: cumulative precision/recall, precision envelope made
// non-increasing right to left, area under the stepped curve.
// tp_by_conf must already be ordered by descending confidence.
// num_gt == 0 with no detections is undefined and returns NaN (callers skip
// such classes); num_gt == 0 with detections returns 0.
double average_precision(const std::vector<bool>& tp_by_conf, int num_gt);

struct MapSummary {
  double precision = 0.0;  // at pr_conf, matched at pr_iou
  double recall = 0.0;
  double map50 = 0.0;
  double map5095 = 0.0;
  std::vector<double> per_class_ap50;  // NaN for classes skipped in the mean
};

// dets/gts are per image, indices aligned. Classes with zero GT and zero
// detections are skipped in the mAP mean; 0.5:0.95 averages ten thresholds.
// pr_iou/pr_conf only affect the dataset precision/recall numbers.
MapSummary map_summary(const std::vector<std::vector<Detection>>& dets,
                       const std::vector<std::vector<GtBox>>& gts, int num_classes,
                       double pr_iou = 0.5, double pr_conf = 0.25);

}  // namespace hgo
