#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hgo/cost.hpp"
#include "hgo/heads.hpp"

namespace hgo {

// Family-wide compound scaling: depth multiplies repeat counts, width
// multiplies channel counts (rounded up to a multiple of 8), max_channels
// caps the widest stage.
struct ScaleSpec {
  double depth = 0.33;
  double width = 0.25;
  int max_channels = 1024;
};

ScaleSpec scale_spec(const std::string& scale);  // n|s|m|l|x

// The hgnetv2 backbone keeps a wider stage-4 cap at the small scales and a
// tighter one at l/x so parameters stay below the baseline everywhere.
int hgo_max_channels(const std::string& scale);

struct ModelConfig {
  std::string scale = "n";            // n|s|m|l|x
  std::string backbone = "hgnetv2";   // hgnetv2 | c2f-baseline
  std::string head = "auto";          // auto | shared | decoupled
  int num_classes = 80;
  int input_size = 640;
  int reg_max = 16;
  std::vector<bool> ghost_stages = {false, false, true, true};  // hgnetv2 only
  HeadLayer head_layer1 = HeadLayer::PConv;
  HeadLayer head_layer2 = HeadLayer::Conv;
  double head_partial_ratio = 0.25;

  void validate() const;
  bool shared_head() const;  // resolves "auto": hgnetv2 -> shared
};

// Immutable network: a topologically ordered node list (blocks plus
// upsample/concat glue) ending in three feature scales, with the detection
// head attached. Inference-mode forwards never mutate state and can run
// concurrently; training-mode forwards update BN running stats and must not.
class ModelGraph {
 public:
  ModelGraph(ModelGraph&&) = default;
  ModelGraph& operator=(ModelGraph&&) = default;

  // raw head maps, one per scale (channels = 4*reg_max + nc)
  std::vector<Tensor> forward(const Tensor& image, bool training = false);

  std::vector<NamedParam> params();

  CostReport cost() const;
  std::vector<PrimOp> prims() const;

  const ModelConfig& model_config() const { return cfg_; }
  const HeadConfig& head_config() const { return head_->config(); }
  Head& head() { return *head_; }

  // head input shapes at the configured input size (anchor generation)
  std::vector<FeatShape> scale_shapes() const;

  struct LayerRow {
    std::string name;
    std::string kind;
    FeatShape out;
  };
  std::vector<LayerRow> layers() const;

 private:
  friend ModelGraph build_model(const ModelConfig& cfg, std::uint64_t seed);
  ModelGraph() = default;

  enum class NodeKind { Input, Block, Upsample, Concat };
  struct Node {
    NodeKind kind;
    std::string name;
    std::unique_ptr<Block> block;  // NodeKind::Block only
    std::vector<int> inputs;
    FeatShape out;  // at the configured input size
  };

  ModelConfig cfg_;
  std::vector<Node> nodes_;
  std::vector<int> feats_;  // indices of the stride-8/16/32 outputs
  std::unique_ptr<Head> head_;
};

// Deterministic pure build: same (config, seed) gives bit-identical weights.
// Shape inconsistencies surface as build errors naming the offending edge.
ModelGraph build_model(const ModelConfig& cfg, std::uint64_t seed);

// Weight serialization. Trainable parameters and BN running statistics are
// stored by slot name; weight-shared slots appear exactly once. f16 narrows
// storage via round-to-nearest-even.
void save_weights(ModelGraph& graph, const std::string& path, bool f16 = false);
void load_weights(ModelGraph& graph, const std::string& path);

}  // namespace hgo
