#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hgo/graph.hpp"
#include "hgo/image.hpp"
#include "hgo/metrics.hpp"

namespace hgo {

struct RunConfig {
  double conf_threshold = 0.25;
  double nms_iou = 0.45;
  int max_detections = 300;

  void validate() const;
};

// Greedy per-class suppression: keep the highest-confidence box, drop others
// overlapping it with IoU > nms_iou. Output sorted by descending confidence,
// capped at max_detections.
std::vector<Detection> nms(const std::vector<Detection>& dets, const RunConfig& cfg);

// (1,3,H,W) float in [0,1]
Tensor image_to_tensor(const Image& img);

// one image's raw head maps -> thresholded + suppressed detections in
// network-input (canvas) coordinates
std::vector<Detection> decode_detections(const std::vector<Tensor>& maps, const HeadConfig& hc,
                                         const RunConfig& cfg);

struct InferenceResult {
  std::vector<Detection> detections;  // original image coordinates, clamped
  Image annotated;
};

InferenceResult run_inference(ModelGraph& graph, const Image& image, const RunConfig& cfg);

// YOLO txt labels: "class cx cy w h", normalized floats, one object per line
std::vector<GtBox> read_labels(const std::string& path, int image_w, int image_h);
void write_labels(const std::string& path, const std::vector<GtBox>& boxes, int image_w,
                  int image_h);

struct SynthScene {
  Image image;
  std::vector<GtBox> boxes;  // pixel xyxy
};

// four classes of solid shapes on a flat background; every box fully inside
inline constexpr int kSynthClasses = 4;
SynthScene synth_scene(int size, Rng& rng);

// writes images/imNNNN.ppm, labels/imNNNN.txt and train/val/test manifests
// split 8:1:1 by round(0.8n)/round(0.1n)/rest
void generate_synth_dataset(const std::string& dir, int n_images, int image_size,
                            std::uint64_t seed);

struct Sample {
  std::string name;
  Image image;
  std::vector<GtBox> boxes;
};

// split: train | val | test | all
std::vector<Sample> load_dataset(const std::string& dir, const std::string& split);

struct TrainOptions {
  int steps = 300;
  int batch = 8;
  double lr = 0.01;
  double momentum = 0.9;
  BoxLossKind box_loss = BoxLossKind::Mpdiou;
  // short-schedule default: lean on the class term harder than the long-run
  // 7.5/1.5/0.5 split so four-way color discrimination converges in hundreds
  // of steps instead of epochs
  LossWeights weights{7.5f, 1.5f, 2.5f};
  double inner_ratio = 0.75;

  void validate() const;
};

struct TrainRecord {
  int step = 0;
  float total = 0, box = 0, dfl = 0, cls = 0;
  int num_pos = 0;
};

// plain SGD with momentum over detection_loss; throws on divergence (NaN)
std::vector<TrainRecord> train_toy(ModelGraph& graph, const std::vector<Sample>& data,
                                   const TrainOptions& opt, std::uint64_t seed,
                                   const std::function<void(const TrainRecord&)>& on_step = {});

struct BenchResult {
  int iters = 0;
  double total_seconds = 0;
  double ms_per_image = 0;
  double fps = 0;
};

BenchResult bench_forward(ModelGraph& graph, int iters = 100, int warmup = 10);

}  // namespace hgo
