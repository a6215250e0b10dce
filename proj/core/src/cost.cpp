#include "hgo/cost.hpp"

#include <numeric>

namespace hgo {

namespace {

std::int64_t i64(int v) { return static_cast<std::int64_t>(v); }

std::int64_t plane(const FeatShape& s) { return i64(s.c) * s.h * s.w; }

}  // namespace

std::int64_t CostReport::total_macs() const {
  return std::accumulate(items.begin(), items.end(), std::int64_t{0},
                         [](std::int64_t a, const OpCost& c) { return a + c.macs; });
}

std::int64_t CostReport::total_params() const {
  return std::accumulate(items.begin(), items.end(), std::int64_t{0},
                         [](std::int64_t a, const OpCost& c) { return a + c.params; });
}

std::int64_t CostReport::total_elementwise() const {
  return std::accumulate(items.begin(), items.end(), std::int64_t{0},
                         [](std::int64_t a, const OpCost& c) { return a + c.elementwise; });
}

void CostReport::append(const CostReport& other) {
  items.insert(items.end(), other.items.begin(), other.items.end());
}

std::int64_t conv_macs(const ConvSpec& spec, int out_h, int out_w) {
  spec.validate();
  return i64(spec.out_channels) * out_h * out_w * (spec.in_channels / spec.groups) *
         spec.kernel * spec.kernel;
}

std::int64_t conv_params(const ConvSpec& spec, bool with_bn) {
  spec.validate();
  std::int64_t p = i64(spec.out_channels) * (spec.in_channels / spec.groups) * spec.kernel *
                   spec.kernel;
  if (spec.bias) p += spec.out_channels;
  if (with_bn) p += 2 * i64(spec.out_channels);  // gamma + beta
  return p;
}

std::int64_t ghost_macs(const GhostSpec& spec, int out_h, int out_w) {
  spec.validate();
  const int m = spec.condensed();
  const std::int64_t hw = i64(out_h) * out_w;
  const std::int64_t primary =
      i64(m) * hw * spec.in_channels * spec.primary_kernel * spec.primary_kernel;
  const std::int64_t cheap =
      i64(spec.ratio - 1) * m * hw * spec.cheap_kernel * spec.cheap_kernel;  // depthwise
  return primary + cheap;
}

std::int64_t ghost_params(const GhostSpec& spec, bool with_bn) {
  spec.validate();
  const int m = spec.condensed();
  std::int64_t p = i64(m) * spec.in_channels * spec.primary_kernel * spec.primary_kernel +
                   i64(spec.ratio - 1) * m * spec.cheap_kernel * spec.cheap_kernel;
  if (with_bn) p += 2 * i64(spec.out_channels);
  return p;
}

Ratio ghost_speedup_exact(const GhostSpec& spec, int dense_kernel) {
  spec.validate();
  const long long s = spec.ratio;
  const long long c = spec.in_channels;
  const long long k2 = static_cast<long long>(dense_kernel) * dense_kernel;
  const long long d2 = static_cast<long long>(spec.cheap_kernel) * spec.cheap_kernel;
  // dense: n*h*w*c*k^2; ghost: (n/s)*h*w*c*k2 + (s-1)*(n/s)*h*w*d2
  return Ratio(s * c * k2, c * k2 + (s - 1) * d2);
}

Ratio ghost_compression_exact(const GhostSpec& spec, int dense_kernel) {
  spec.validate();
  const long long s = spec.ratio;
  const long long c = spec.in_channels;
  const long long k2 = static_cast<long long>(dense_kernel) * dense_kernel;
  const long long d2 = static_cast<long long>(spec.cheap_kernel) * spec.cheap_kernel;
  // dense params n*c*k^2 vs (n/s)*c*k2 + (s-1)*(n/s)*d2 -- same shape as the
  // speedup, so the k == d case collapses to s*c/(s+c-1) as well
  return Ratio(s * c * k2, c * k2 + (s - 1) * d2);
}

CostReport cost_of_prims(const std::vector<PrimOp>& prims) {
  CostReport report;
  report.items.reserve(prims.size());
  for (const auto& p : prims) {
    OpCost c;
    c.name = p.name;
    switch (p.kind) {
      case PrimOp::Kind::Conv: {
        c.macs = conv_macs(p.conv, p.out.h, p.out.w);
        if (p.count_params) c.params = conv_params(p.conv, p.has_bn);
        const std::int64_t out_elems = plane(p.out);
        if (p.conv.bias) c.elementwise += out_elems;
        if (p.has_bn) c.elementwise += 2 * out_elems;  // scale + shift
        if (p.act != Act::None) c.elementwise += out_elems;
        break;
      }
      case PrimOp::Kind::Pool:
        c.elementwise = plane(p.out) * (i64(p.pool_kernel) * p.pool_kernel - 1);
        break;
      case PrimOp::Kind::Norm:
        // standalone BN (+ activation when tagged): gamma/beta only
        if (p.count_params) c.params = 2 * i64(p.out.c);
        c.elementwise = plane(p.out) * (p.act != Act::None ? 3 : 2);
        break;
      case PrimOp::Kind::Upsample:
      case PrimOp::Kind::Concat:
      case PrimOp::Kind::Eltwise:
      case PrimOp::Kind::Pad:
        c.elementwise = plane(p.out);
        break;
    }
    report.items.push_back(std::move(c));
  }
  return report;
}

CostReport cost_of_block(const Block& block, FeatShape in) {
  std::vector<PrimOp> prims;
  block.describe(in, prims);
  return cost_of_prims(prims);
}

}  // namespace hgo
