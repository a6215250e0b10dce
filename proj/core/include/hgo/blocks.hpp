#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hgo/ops.hpp"

namespace hgo {

enum class Act { None, Relu, Silu };

struct NamedParam {
  std::string name;
  Tensor tensor;
  bool trainable = true;  // false for BN running statistics
};

// single-sample feature shape used by the analytic cost model
struct FeatShape {
  int c = 0, h = 0, w = 0;
};

// Primitive descriptor a block emits for cost accounting. Convolutions carry
// their full spec; other kinds only track shapes and elementwise work.
struct PrimOp {
  enum class Kind { Conv, Pool, Upsample, Concat, Eltwise, Pad, Norm };
  Kind kind = Kind::Conv;
  std::string name;
  ConvSpec conv;        // Kind::Conv only
  bool has_bn = false;  // Kind::Conv only
  Act act = Act::None;  // Kind::Conv only
  int pool_kernel = 0, pool_stride = 1, pool_padding = 0;
  FeatShape in, out;
  // false for repeat invocations of a weight-shared conv: MACs accrue per
  // call, the parameters are stored (and therefore counted) once
  bool count_params = true;
};

// Blocks own their weights, are immutable after construction + init, and
// expose three views: forward execution, parameter enumeration, and the
// primitive list the cost model consumes.
class Block {
 public:
  virtual ~Block() = default;
  virtual void init(std::uint64_t seed) = 0;
  virtual Tensor forward(const Tensor& x, bool training) = 0;
  virtual void collect_params(std::vector<NamedParam>& out) = 0;
  virtual FeatShape describe(FeatShape in, std::vector<PrimOp>& prims) const = 0;
  FeatShape out_shape(FeatShape in) const {
    std::vector<PrimOp> scratch;
    return describe(in, scratch);
  }
};

// Conv + optional BN + activation. BN runs in inference form (folded
// scale/shift from running stats) unless forward is called with training=true.
class ConvBNAct : public Block {
 public:
  ConvBNAct(std::string name, ConvSpec spec, Act act = Act::Silu, bool with_bn = true);

  void init(std::uint64_t seed) override;
  Tensor forward(const Tensor& x, bool training) override;
  void collect_params(std::vector<NamedParam>& out) override;
  FeatShape describe(FeatShape in, std::vector<PrimOp>& prims) const override;

  const std::string& name() const { return name_; }
  const ConvSpec& spec() const { return spec_; }
  Tensor weight() { return w_; }
  Tensor bias() { return b_; }

  static constexpr float kBnEps = 1e-3f;
  static constexpr float kBnMomentum = 0.03f;

 private:
  std::string name_;
  ConvSpec spec_;
  Act act_;
  bool with_bn_;
  Tensor w_, b_;              // b_ null unless spec.bias
  Tensor gamma_, beta_;       // null unless with_bn
  Tensor rmean_, rvar_;       // running stats, not trainable
};

// Eq-4 ghost module: 1x1 primary to n/s channels, d x d depthwise "cheap" conv
// over the condensed map, channel concat (condensed first).
struct GhostSpec {
  int in_channels = 0;   // c
  int out_channels = 0;  // n
  int ratio = 2;         // s
  int cheap_kernel = 3;  // d
  int primary_kernel = 1;

  void validate() const;
  int condensed() const { return out_channels / ratio; }  // m
};

class GhostConv : public Block {
 public:
  GhostConv(std::string name, GhostSpec spec, Act act = Act::Relu);

  void init(std::uint64_t seed) override;
  Tensor forward(const Tensor& x, bool training) override;
  void collect_params(std::vector<NamedParam>& out) override;
  FeatShape describe(FeatShape in, std::vector<PrimOp>& prims) const override;

  const GhostSpec& spec() const { return spec_; }

 private:
  GhostSpec spec_;
  ConvBNAct primary_, cheap_;
};

// Partial convolution: k x k conv over the first floor(c*r) channels, the rest
// pass through untouched. Raw (no BN/activation) so the pass-through identity
// holds bit-exactly.
class PConv : public Block {
 public:
  PConv(std::string name, int channels, double partial_ratio, int kernel);

  void init(std::uint64_t seed) override;
  Tensor forward(const Tensor& x, bool training) override;
  void collect_params(std::vector<NamedParam>& out) override;
  FeatShape describe(FeatShape in, std::vector<PrimOp>& prims) const override;

  int conv_channels() const { return cp_; }

 private:
  std::string name_;
  int channels_, cp_, kernel_;
  ConvBNAct conv_;
};

struct HGBlockSpec {
  int in_channels = 0;
  int mid_channels = 0;  // c_mid
  int out_channels = 0;
  int layer_num = 6;  // Layer_num
  int kernel = 3;
  bool use_ghost = false;
  bool shortcut = false;

  void validate() const;
};

// Eq-1 block: layer_num chained convs Y_0..Y_{L-1}, concat of the Y_i only
// (input excluded), 1x1 squeeze to out/2, 1x1 excite to out, optional residual.
class HGBlock : public Block {
 public:
  HGBlock(std::string name, HGBlockSpec spec);

  void init(std::uint64_t seed) override;
  Tensor forward(const Tensor& x, bool training) override;
  void collect_params(std::vector<NamedParam>& out) override;
  FeatShape describe(FeatShape in, std::vector<PrimOp>& prims) const override;

  const HGBlockSpec& spec() const { return spec_; }

 private:
  HGBlockSpec spec_;
  std::vector<std::unique_ptr<Block>> layers_;  // ConvBNAct or GhostConv
  ConvBNAct squeeze_, excite_;
};

// Stem with x4 total downsampling: 3x3 s2 conv, then parallel {2x2 conv,
// 2x2 s1 max pool} over the bottom/right zero-padded map, concat, 3x3 s2 conv,
// 1x1 conv.
class HGStem : public Block {
 public:
  HGStem(std::string name, int in_channels, int mid_channels, int out_channels);

  void init(std::uint64_t seed) override;
  Tensor forward(const Tensor& x, bool training) override;
  void collect_params(std::vector<NamedParam>& out) override;
  FeatShape describe(FeatShape in, std::vector<PrimOp>& prims) const override;

 private:
  std::string name_;
  int mid_;
  ConvBNAct stem1_, stem2_, stem3_, stem4_;
};

// 1x1 to c/2, three chained maxpool(5,1,2), concat of the four stages, 1x1
// back to c. Channel count in == out by contract.
class SPPF : public Block {
 public:
  SPPF(std::string name, int channels, int pool_kernel = 5);

  void init(std::uint64_t seed) override;
  Tensor forward(const Tensor& x, bool training) override;
  void collect_params(std::vector<NamedParam>& out) override;
  FeatShape describe(FeatShape in, std::vector<PrimOp>& prims) const override;

 private:
  std::string name_;
  int channels_, pool_k_;
  ConvBNAct cv1_, cv2_;
};

class C2f : public Block {
 public:
  C2f(std::string name, int in_channels, int out_channels, int n_bottlenecks, bool shortcut);

  void init(std::uint64_t seed) override;
  Tensor forward(const Tensor& x, bool training) override;
  void collect_params(std::vector<NamedParam>& out) override;
  FeatShape describe(FeatShape in, std::vector<PrimOp>& prims) const override;

 private:
  struct Bottleneck {
    ConvBNAct cv1, cv2;
    bool add;
  };
  std::string name_;
  int in_, out_, half_;
  bool shortcut_;
  ConvBNAct cv1_, cv2_;
  std::vector<Bottleneck> m_;
};

}  // namespace hgo
