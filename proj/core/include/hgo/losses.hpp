#pragma once

#include <string>
#include <vector>

#include "hgo/heads.hpp"

namespace hgo {

// Axis-aligned box, image pixel frame, x2 >= x1 and y2 >= y1.
struct Box {
  float x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  float w() const { return x2 - x1; }
  float h() const { return y2 - y1; }
  float area() const { return w() * h(); }
  void validate() const;
};

// All five metrics of a pred/gt pair in one pass, double precision, no tape.
// `degenerate` marks a zero-area gt; every metric is then reported as 0.
struct IouValues {
  double iou = 0, diou = 0, ciou = 0, mpdiou = 0, inner_ciou = 0;
  bool degenerate = false;
};

IouValues iou_metrics(const Box& pred, const Box& gt, double image_w, double image_h,
                      double inner_ratio = 0.75);

// Trainable box-loss metrics from Table-5's comparison set.
enum class BoxLossKind { Diou, Ciou, Mpdiou, InnerCiou };

BoxLossKind box_loss_from_string(const std::string& s);
std::string to_string(BoxLossKind k);

// Taped metric graphs over rank-1 [4] xyxy tensors. Epsilon-guarded
// (1e-9 in every division), differentiable a.e.; double instantiations back
// the finite-difference suite.
template <typename T>
TensorPtr<T> iou_graph(const TensorPtr<T>& a, const TensorPtr<T>& b);
template <typename T>
TensorPtr<T> diou_graph(const TensorPtr<T>& a, const TensorPtr<T>& b);
template <typename T>
TensorPtr<T> ciou_graph(const TensorPtr<T>& a, const TensorPtr<T>& b);
template <typename T>
TensorPtr<T> mpdiou_graph(const TensorPtr<T>& a, const TensorPtr<T>& b, T image_w, T image_h);
template <typename T>
TensorPtr<T> inner_ciou_graph(const TensorPtr<T>& a, const TensorPtr<T>& b, T inner_ratio);

template <typename T>
TensorPtr<T> box_metric_graph(BoxLossKind kind, const TensorPtr<T>& a, const TensorPtr<T>& b,
                              T image_w, T image_h, T inner_ratio);

// DFL on one side's logits (rank-1 [bins]): target distance t in [0, bins-1]
// split between its two neighbouring integer bins.
template <typename T>
TensorPtr<T> dfl_loss(const TensorPtr<T>& side_logits, T t);

// Per-anchor assignment: candidates must contain the anchor center; the
// top-k per gt by decoded-prediction IoU (center distance before predictions
// exist) become positives; anchors claimed twice go to the higher-IoU gt.
struct Assignment {
  std::vector<int> gt_index;  // -1 for background
  std::vector<float> score;   // decoded-pred IoU vs assigned gt, 0 otherwise
  int num_pos = 0;
};

Assignment assign_targets(const Anchors& anchors, const std::vector<Box>& gt_boxes,
                          const std::vector<int>& gt_classes,
                          const std::vector<float>& decoded_xyxy,  // 4 per anchor; may be empty
                          int topk = 10);

struct LossWeights {
  float box = 7.5f, dfl = 1.5f, cls = 0.5f;
};

struct LossBundle {
  Tensor total;  // taped scalar: box*w_box + dfl*w_dfl + cls*w_cls
  float box_loss = 0, dfl_loss = 0, cls_loss = 0;  // unweighted component values
  LossWeights weights;
  int num_pos = 0;
};

// Assembled training loss over a batch of raw head maps. Box component is the
// mean over positives of (1 - metric); dfl decodes gt distances against the
// anchor grid; cls is BCE over every (anchor, class) cell with positives
// targeted at their decoded-prediction IoU, normalized by the score mass.
LossBundle detection_loss(const std::vector<Tensor>& head_maps,
                          const std::vector<std::vector<Box>>& gt_boxes,
                          const std::vector<std::vector<int>>& gt_classes,
                          const HeadConfig& cfg, int image_w, int image_h, BoxLossKind kind,
                          LossWeights weights = {}, double inner_ratio = 0.75);

}  // namespace hgo
