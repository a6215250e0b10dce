#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hgo/blocks.hpp"

namespace hgo {

// Layer kind for the shared-head stack. The kind fixes the primitive: Conv is
// a dense 1x1 over the full hidden width, PConv is a 3x3 partial conv
// (ratio 0.25) whose untouched channels pass through.
enum class HeadLayer { Conv, PConv };

HeadLayer head_layer_from_string(const std::string& s);
std::string to_string(HeadLayer k);

struct HeadConfig {
  std::vector<int> channels;  // per-scale input widths, stride-8 first
  std::vector<int> strides;   // e.g. {8, 16, 32}
  int nc = 80;
  int reg_max = 16;

  void validate() const;
};

// Detection heads map per-scale neck features to raw maps of
// 4*reg_max + nc channels (reg logits first, then class logits).
class Head {
 public:
  virtual ~Head() = default;

  virtual std::vector<Tensor> forward(const std::vector<Tensor>& feats, bool training) = 0;
  virtual void collect_params(std::vector<NamedParam>& out) = 0;
  virtual void describe(const std::vector<FeatShape>& ins, std::vector<PrimOp>& prims) const = 0;
  virtual void init(std::uint64_t seed) = 0;

  const HeadConfig& config() const { return cfg_; }
  int out_channels() const { return 4 * cfg_.reg_max + cfg_.nc; }

 protected:
  explicit Head(HeadConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }
  HeadConfig cfg_;

  // class-prior logit: roughly 5 objects per reference image spread over the
  // grid cells of one scale, so day-one confidences start near zero recall
  static constexpr int kRefImg = 640;
  float cls_prior_bias(int stride) const;
  void ramp_reg_bias(const Tensor& bias) const;
};

// Per-scale decoupled branches, no sharing: two 3x3 convs + 1x1 predictor for
// regression and again for classification.
class DecoupledHead : public Head {
 public:
  explicit DecoupledHead(HeadConfig cfg);

  std::vector<Tensor> forward(const std::vector<Tensor>& feats, bool training) override;
  void collect_params(std::vector<NamedParam>& out) override;
  void describe(const std::vector<FeatShape>& ins, std::vector<PrimOp>& prims) const override;
  void init(std::uint64_t seed) override;

  int reg_width() const { return c2_; }
  int cls_width() const { return c3_; }

 private:
  struct ScaleBranch {
    ConvBNAct reg0, reg1, reg2;
    ConvBNAct cls0, cls1, cls2;
  };
  int c2_ = 0, c3_ = 0;
  std::vector<ScaleBranch> scales_;
};

struct SharedHeadOptions {
  int hidden = 0;  // 0: use channels[0]
  HeadLayer layer1 = HeadLayer::PConv;
  HeadLayer layer2 = HeadLayer::Conv;
  double partial_ratio = 0.25;
};

// Shared-parameter head: unshared 1x1 projections align every scale to a
// common hidden width, then one two-layer stack plus one reg and one cls
// 1x1 predictor are stored once and invoked per scale.
class SharedHead : public Head {
 public:
  SharedHead(HeadConfig cfg, SharedHeadOptions opt);

  std::vector<Tensor> forward(const std::vector<Tensor>& feats, bool training) override;
  void collect_params(std::vector<NamedParam>& out) override;
  void describe(const std::vector<FeatShape>& ins, std::vector<PrimOp>& prims) const override;
  void init(std::uint64_t seed) override;

  const SharedHeadOptions& options() const { return opt_; }
  Tensor shared_reg_weight() { return reg_.weight(); }

 private:
  // one weight-shared stack layer; PConv kind carries its own full-width BN
  struct StackLayer {
    HeadLayer kind;
    std::string name;
    std::unique_ptr<ConvBNAct> conv;
    std::unique_ptr<PConv> pconv;
    Tensor gamma, beta, rmean, rvar;

    Tensor forward(const Tensor& x, bool training);
    void collect(std::vector<NamedParam>& out);
    FeatShape describe(FeatShape in, std::vector<PrimOp>& prims, bool count_params) const;
    void init(std::uint64_t seed);
  };

  SharedHeadOptions opt_;
  std::vector<ConvBNAct> proj_;
  StackLayer l1_, l2_;
  ConvBNAct reg_, cls_;
};

// Flattened anchor table: one entry per cell, scale-major (stride-8 block
// first), row-major within a scale. Centers are in input-image pixels.
struct Anchors {
  std::vector<float> cx, cy;
  std::vector<float> stride;
  std::size_t count() const { return cx.size(); }
};

Anchors make_anchors(const std::vector<FeatShape>& feats, const std::vector<int>& strides);

// Data-level decode of one raw head map (no tape): DFL expectation over each
// side's bins, scaled by the stride, applied around the cell center. Returns
// xyxy boxes, 4 floats per cell, row-major.
std::vector<float> decode_boxes(const TensorT<float>& map, int reg_max, int stride,
                                int batch = 0);

// Sigmoid class scores, nc floats per cell, row-major.
std::vector<float> decode_scores(const TensorT<float>& map, int reg_max, int nc);

}  // namespace hgo
