#pragma once

#include <boost/rational.hpp>
#include <cstdint>
#include <string>
#include <vector>

#include "hgo/blocks.hpp"

namespace hgo {

// Per-primitive analytic cost. MACs follow the dense-conv convention
// n * h' * w' * (c/g) * k^2; everything that is not a multiply-accumulate
// (bias, BN, activations, pooling compares, copies) lands in `elementwise`
// so the MAC totals stay comparable across architectures.
struct OpCost {
  std::string name;
  std::int64_t macs = 0;
  std::int64_t params = 0;  // trainable only; running stats excluded
  std::int64_t elementwise = 0;
};

struct CostReport {
  std::vector<OpCost> items;

  std::int64_t total_macs() const;
  std::int64_t total_params() const;
  std::int64_t total_elementwise() const;

  double gflops() const { return 2.0 * static_cast<double>(total_macs()) / 1e9; }
  double params_mb_f32() const { return 4.0 * static_cast<double>(total_params()) / 1e6; }
  double params_mb_f16() const { return 2.0 * static_cast<double>(total_params()) / 1e6; }

  void append(const CostReport& other);
};

using Ratio = boost::rational<long long>;

// Closed forms for a single convolution at the given output resolution.
std::int64_t conv_macs(const ConvSpec& spec, int out_h, int out_w);
std::int64_t conv_params(const ConvSpec& spec, bool with_bn);

// Ghost module closed forms (primary 1x1-to-m plus depthwise cheap conv).
std::int64_t ghost_macs(const GhostSpec& spec, int out_h, int out_w);
std::int64_t ghost_params(const GhostSpec& spec, bool with_bn);

// Theoretical speedup of a ghost module over a dense conv with the same
// (c, n, k): s*c*k^2 / (c*k^2 + (s-1)*d^2), exact. Reduces to
// s*c / (s + c - 1) when k == d.
Ratio ghost_speedup_exact(const GhostSpec& spec, int dense_kernel);

// Parameter compression of the same substitution (resolution-independent).
Ratio ghost_compression_exact(const GhostSpec& spec, int dense_kernel);

// Cost of a primitive list as emitted by Block::describe.
CostReport cost_of_prims(const std::vector<PrimOp>& prims);

// Convenience: describe + cost in one step.
CostReport cost_of_block(const Block& block, FeatShape in);

}  // namespace hgo
