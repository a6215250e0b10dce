#pragma once

#include <vector>

#include "hgo/tensor.hpp"

namespace hgo {

// Eq-2 style convolution descriptor. Weight layout (n, c/groups, k, k).
struct ConvSpec {
  int in_channels = 0;   // c
  int out_channels = 0;  // n
  int kernel = 1;        // k, square
  int stride = 1;
  int padding = 0;
  int groups = 1;
  bool bias = false;

  void validate() const;
  int out_extent(int in_extent) const {
    return (in_extent + 2 * padding - kernel) / stride + 1;
  }
};

namespace ops {

// All ops propagate the tape: the output requires_grad iff any input does, in
// which case a backward closure is recorded. Inputs are never mutated.

template <typename T>
TensorPtr<T> conv2d(const TensorPtr<T>& x, const ConvSpec& spec, const TensorPtr<T>& w,
                    const TensorPtr<T>& b /* null when spec.bias is false */);

template <typename T>
TensorPtr<T> maxpool2d(const TensorPtr<T>& x, int kernel, int stride, int padding);

template <typename T>
TensorPtr<T> concat_channels(const std::vector<TensorPtr<T>>& xs);

template <typename T>
std::vector<TensorPtr<T>> split_channels(const TensorPtr<T>& x, const std::vector<int>& sizes);

template <typename T>
TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b);

template <typename T>
TensorPtr<T> relu(const TensorPtr<T>& x);  // subgradient at 0 is 0

template <typename T>
TensorPtr<T> silu(const TensorPtr<T>& x);

template <typename T>
TensorPtr<T> sigmoid(const TensorPtr<T>& x);

template <typename T>
TensorPtr<T> upsample_nearest2(const TensorPtr<T>& x);

// zero padding on the spatial dims
template <typename T>
TensorPtr<T> pad2d(const TensorPtr<T>& x, int top, int bottom, int left, int right);

// Inference-form batch norm: y[n,c,h,w] = x[n,c,h,w] * scale[c] + shift[c].
// Differentiable in all three arguments.
template <typename T>
TensorPtr<T> channel_affine(const TensorPtr<T>& x, const TensorPtr<T>& scale,
                            const TensorPtr<T>& shift);

// Training-form batch norm over (N,H,W) per channel. Updates running stats in
// place: r = (1-momentum)*r + momentum*batch_stat. gamma/beta are rank-1 [C].
template <typename T>
TensorPtr<T> batchnorm_train(const TensorPtr<T>& x, const TensorPtr<T>& gamma,
                             const TensorPtr<T>& beta, std::vector<T>& running_mean,
                             std::vector<T>& running_var, T momentum, T eps);

// Softmax over each run of `group` consecutive channels, independently at
// every (n, y, x). group must divide C.
template <typename T>
TensorPtr<T> softmax_channel_groups(const TensorPtr<T>& x, int group);

// DFL expectation: x is (N, 4*bins, H, W) side logits; output (N, 4, H, W)
// holds sum_i i * softmax(side)_i per side. Fused softmax+expectation with the
// closed-form gradient d/dz_j = p_j * (j - E).
template <typename T>
TensorPtr<T> dfl_expectation(const TensorPtr<T>& x, int bins);

// ---- reductions and scalar-graph plumbing ----

template <typename T>
TensorPtr<T> sum_all(const TensorPtr<T>& x);

// 1-element view of x[flat_index] (copy with gradient routing)
template <typename T>
TensorPtr<T> select(const TensorPtr<T>& x, std::int64_t flat_index);

// rank-1 [k] tensor assembled from k scalar tensors, grads routed back
template <typename T>
TensorPtr<T> stack_scalars(const std::vector<TensorPtr<T>>& xs);

template <typename T>
TensorPtr<T> sub(const TensorPtr<T>& a, const TensorPtr<T>& b);

template <typename T>
TensorPtr<T> mul(const TensorPtr<T>& a, const TensorPtr<T>& b);

template <typename T>
TensorPtr<T> div(const TensorPtr<T>& a, const TensorPtr<T>& b);

template <typename T>
TensorPtr<T> maximum(const TensorPtr<T>& a, const TensorPtr<T>& b);  // ties route grad to a

template <typename T>
TensorPtr<T> minimum(const TensorPtr<T>& a, const TensorPtr<T>& b);

template <typename T>
TensorPtr<T> add_const(const TensorPtr<T>& x, T c);

template <typename T>
TensorPtr<T> mul_const(const TensorPtr<T>& x, T c);

template <typename T>
TensorPtr<T> clamp(const TensorPtr<T>& x, T lo, T hi);  // zero gradient outside [lo, hi]

template <typename T>
TensorPtr<T> log(const TensorPtr<T>& x);

template <typename T>
TensorPtr<T> atan(const TensorPtr<T>& x);

template <typename T>
TensorPtr<T> square(const TensorPtr<T>& x);

// ---- fused loss kernels ----

// sum over elements of weight * (softplus(z) - z*y) with the numerically
// stable formulation; targets and weights are constants (no grad through them)
template <typename T>
TensorPtr<T> bce_with_logits_sum(const TensorPtr<T>& logits, const std::vector<T>& targets,
                                 const std::vector<T>& weights);

// DFL over a (N, 4*bins, H, W) logit map. For every (n, side, y, x) with
// weight > 0: target distance t in [0, bins-1] is split between floor(t) and
// ceil(t); contribution is -w * ((ceil(t)-t) log p_lo + (t-floor(t)) log p_hi).
// target_dist / weights are indexed (n, side, y, x) flattened row-major.
template <typename T>
TensorPtr<T> dfl_loss_map(const TensorPtr<T>& reg_logits, const std::vector<T>& target_dist,
                          const std::vector<T>& weights, int bins);

}  // namespace ops
}  // namespace hgo
