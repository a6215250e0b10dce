#include "hgo/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hgo {

void ConvSpec::validate() const {
  HGO_CHECK(in_channels >= 1, "conv in_channels " << in_channels << " must be >= 1");
  HGO_CHECK(out_channels >= 1, "conv out_channels " << out_channels << " must be >= 1");
  HGO_CHECK(kernel >= 1, "conv kernel " << kernel << " must be >= 1");
  HGO_CHECK(stride >= 1, "conv stride " << stride << " must be >= 1");
  HGO_CHECK(padding >= 0, "conv padding " << padding << " must be >= 0");
  HGO_CHECK(groups >= 1, "conv groups " << groups << " must be >= 1");
  HGO_CHECK(in_channels % groups == 0,
            "conv in_channels " << in_channels << " not divisible by groups " << groups);
  HGO_CHECK(out_channels % groups == 0,
            "conv out_channels " << out_channels << " not divisible by groups " << groups);
}

namespace ops {
namespace {

template <typename T>
bool any_taped(const std::vector<TensorPtr<T>>& xs) {
  for (const auto& x : xs)
    if (x && x->requires_grad) return true;
  return false;
}

template <typename T>
void accum(TensorPtr<T>& t, std::size_t i, T v) {
  t->ensure_grad();
  t->grad[i] += v;
}

inline int ceil_div_pos(int a, int b) { return (a + b - 1) / b; }

// valid output range for one kernel tap: o*stride + tap - pad must land in
// [0, extent)
inline void tap_range(int tap, int pad, int stride, int extent, int out_extent, int* lo, int* hi) {
  int l = pad - tap;
  *lo = l > 0 ? ceil_div_pos(l, stride) : 0;
  int last = extent - 1 - tap + pad;
  *hi = last < 0 ? 0 : std::min(out_extent, last / stride + 1);
}

}  // namespace

template <typename T>
TensorPtr<T> conv2d(const TensorPtr<T>& x, const ConvSpec& spec, const TensorPtr<T>& w,
                    const TensorPtr<T>& b) {
  spec.validate();
  HGO_CHECK(x && x->rank() == 4, "conv2d input must be rank 4");
  const int N = x->n(), C = x->c(), H = x->h(), W = x->w();
  HGO_CHECK(C == spec.in_channels,
            "conv2d input channels " << C << " != spec.in_channels " << spec.in_channels);
  const int OC = spec.out_channels, K = spec.kernel, S = spec.stride, P = spec.padding,
            G = spec.groups;
  const int ICG = C / G, OCG = OC / G;
  HGO_CHECK(w && (w->shape == Shape{OC, ICG, K, K}),
            "conv2d weight shape " << (w ? shape_str(w->shape) : std::string("null"))
                                   << " != expected " << shape_str(Shape{OC, ICG, K, K}));
  if (spec.bias) {
    HGO_CHECK(b && (b->shape == Shape{OC}),
              "conv2d bias shape " << (b ? shape_str(b->shape) : std::string("null"))
                                   << " != expected (" << OC << ")");
  } else {
    HGO_CHECK(!b, "conv2d bias tensor given but spec.bias is false");
  }
  const int OH = spec.out_extent(H), OW = spec.out_extent(W);
  HGO_CHECK(OH >= 1 && OW >= 1, "conv2d output extent " << OH << "x" << OW
                                                        << " collapsed for input " << H << "x" << W
                                                        << " kernel " << K << " stride " << S);

  auto out = make_tensor<T>({N, OC, OH, OW});
  const std::int64_t iplane = static_cast<std::int64_t>(H) * W;
  const std::int64_t oplane = static_cast<std::int64_t>(OH) * OW;

  for (int n = 0; n < N; ++n) {
    const T* xb = x->data.data() + static_cast<std::int64_t>(n) * C * iplane;
    T* ob = out->data.data() + static_cast<std::int64_t>(n) * OC * oplane;
    for (int g = 0; g < G; ++g) {
      for (int ol = 0; ol < OCG; ++ol) {
        const int oc = g * OCG + ol;
        T* op = ob + oc * oplane;
        if (spec.bias) {
          const T bv = b->data[static_cast<std::size_t>(oc)];
          std::fill(op, op + oplane, bv);
        }
        for (int il = 0; il < ICG; ++il) {
          const int ic = g * ICG + il;
          const T* ip = xb + ic * iplane;
          const T* wp = w->data.data() + ((static_cast<std::int64_t>(oc) * ICG + il) * K) * K;
          for (int ky = 0; ky < K; ++ky) {
            int oy_lo, oy_hi;
            tap_range(ky, P, S, H, OH, &oy_lo, &oy_hi);
            for (int kx = 0; kx < K; ++kx) {
              const T wv = wp[ky * K + kx];
              if (wv == T(0)) continue;
              int ox_lo, ox_hi;
              tap_range(kx, P, S, W, OW, &ox_lo, &ox_hi);
              for (int oy = oy_lo; oy < oy_hi; ++oy) {
                const T* irow = ip + static_cast<std::int64_t>(oy * S + ky - P) * W;
                T* orow = op + static_cast<std::int64_t>(oy) * OW;
                if (S == 1) {
                  const T* ir = irow + (kx - P);
                  for (int ox = ox_lo; ox < ox_hi; ++ox) orow[ox] += wv * ir[ox];
                } else {
                  for (int ox = ox_lo; ox < ox_hi; ++ox)
                    orow[ox] += wv * irow[ox * S + kx - P];
                }
              }
            }
          }
        }
      }
    }
  }

  std::vector<TensorPtr<T>> parents{x, w};
  if (b) parents.push_back(b);
  if (any_taped(parents)) {
    out->requires_grad = true;
    out->parents = parents;
    out->backward_fn = [o = out.get(), x, w, b, spec]() {
      const int N = x->n(), C = x->c(), H = x->h(), W = x->w();
      const int OC = spec.out_channels, K = spec.kernel, S = spec.stride, P = spec.padding,
                G = spec.groups;
      const int ICG = C / G, OCG = OC / G;
      const int OH = o->h(), OW = o->w();
      const std::int64_t iplane = static_cast<std::int64_t>(H) * W;
      const std::int64_t oplane = static_cast<std::int64_t>(OH) * OW;
      const bool need_dx = x->requires_grad, need_dw = w->requires_grad;
      if (need_dx) x->ensure_grad();
      if (need_dw) w->ensure_grad();
      if (b && b->requires_grad) b->ensure_grad();

      for (int n = 0; n < N; ++n) {
        const T* xb = x->data.data() + static_cast<std::int64_t>(n) * C * iplane;
        T* dxb = need_dx ? x->grad.data() + static_cast<std::int64_t>(n) * C * iplane : nullptr;
        const T* gb = o->grad.data() + static_cast<std::int64_t>(n) * OC * oplane;
        for (int g = 0; g < G; ++g) {
          for (int ol = 0; ol < OCG; ++ol) {
            const int oc = g * OCG + ol;
            const T* gp = gb + oc * oplane;
            if (b && b->requires_grad) {
              T s = 0;
              for (std::int64_t i = 0; i < oplane; ++i) s += gp[i];
              b->grad[static_cast<std::size_t>(oc)] += s;
            }
            for (int il = 0; il < ICG; ++il) {
              const int ic = g * ICG + il;
              const T* ip = xb + ic * iplane;
              T* dxp = need_dx ? dxb + ic * iplane : nullptr;
              const std::int64_t wbase = ((static_cast<std::int64_t>(oc) * ICG + il) * K) * K;
              for (int ky = 0; ky < K; ++ky) {
                int oy_lo, oy_hi;
                tap_range(ky, P, S, H, OH, &oy_lo, &oy_hi);
                for (int kx = 0; kx < K; ++kx) {
                  int ox_lo, ox_hi;
                  tap_range(kx, P, S, W, OW, &ox_lo, &ox_hi);
                  const T wv = w->data[static_cast<std::size_t>(wbase + ky * K + kx)];
                  T dw_acc = 0;
                  for (int oy = oy_lo; oy < oy_hi; ++oy) {
                    const std::int64_t iy = oy * S + ky - P;
                    const T* grow = gp + static_cast<std::int64_t>(oy) * OW;
                    const T* irow = ip + iy * W;
                    if (need_dw) {
                      if (S == 1) {
                        const T* ir = irow + (kx - P);
                        for (int ox = ox_lo; ox < ox_hi; ++ox) dw_acc += grow[ox] * ir[ox];
                      } else {
                        for (int ox = ox_lo; ox < ox_hi; ++ox)
                          dw_acc += grow[ox] * irow[ox * S + kx - P];
                      }
                    }
                    if (need_dx) {
                      T* dxrow = dxp + iy * W;
                      if (S == 1) {
                        T* dr = dxrow + (kx - P);
                        for (int ox = ox_lo; ox < ox_hi; ++ox) dr[ox] += wv * grow[ox];
                      } else {
                        for (int ox = ox_lo; ox < ox_hi; ++ox)
                          dxrow[ox * S + kx - P] += wv * grow[ox];
                      }
                    }
                  }
                  if (need_dw) w->grad[static_cast<std::size_t>(wbase + ky * K + kx)] += dw_acc;
                }
              }
            }
          }
        }
      }
    };
  }
  return out;
}

template <typename T>
TensorPtr<T> maxpool2d(const TensorPtr<T>& x, int kernel, int stride, int padding) {
  HGO_CHECK(x && x->rank() == 4, "maxpool2d input must be rank 4");
  HGO_CHECK(kernel >= 1, "maxpool2d kernel " << kernel << " must be >= 1");
  HGO_CHECK(stride >= 1, "maxpool2d stride " << stride << " must be >= 1");
  HGO_CHECK(padding >= 0 && padding < kernel,
            "maxpool2d padding " << padding << " must be in [0, kernel)");
  const int N = x->n(), C = x->c(), H = x->h(), W = x->w();
  HGO_CHECK(kernel <= H + 2 * padding && kernel <= W + 2 * padding,
            "maxpool2d window " << kernel << " larger than padded input " << (H + 2 * padding)
                                << "x" << (W + 2 * padding));
  const int OH = (H + 2 * padding - kernel) / stride + 1;
  const int OW = (W + 2 * padding - kernel) / stride + 1;

  auto out = make_tensor<T>({N, C, OH, OW});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(out->data.size());

  std::int64_t oi = 0;
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const T* ip = &x->at(n, c, 0, 0);
      for (int oy = 0; oy < OH; ++oy) {
        const int y0 = oy * stride - padding;
        for (int ox = 0; ox < OW; ++ox, ++oi) {
          const int x0 = ox * stride - padding;
          T best = -std::numeric_limits<T>::infinity();
          std::int64_t best_i = -1;
          for (int ky = 0; ky < kernel; ++ky) {
            const int iy = y0 + ky;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < kernel; ++kx) {
              const int ix = x0 + kx;
              if (ix < 0 || ix >= W) continue;
              const T v = ip[static_cast<std::int64_t>(iy) * W + ix];
              if (v > best) {
                best = v;
                best_i = x->index(n, c, iy, ix);
              }
            }
          }
          out->data[static_cast<std::size_t>(oi)] = best;
          (*argmax)[static_cast<std::size_t>(oi)] = best_i;
        }
      }
    }
  }

  if (x->requires_grad) {
    out->requires_grad = true;
    out->parents = {x};
    out->backward_fn = [o = out.get(), x, argmax]() {
      x->ensure_grad();
      for (std::size_t i = 0; i < o->grad.size(); ++i)
        x->grad[static_cast<std::size_t>((*argmax)[i])] += o->grad[i];
    };
  }
  return out;
}

template <typename T>
TensorPtr<T> concat_channels(const std::vector<TensorPtr<T>>& xs) {
  HGO_CHECK(!xs.empty(), "concat_channels needs at least one input");
  const int N = xs[0]->n(), H = xs[0]->h(), W = xs[0]->w();
  int C = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    HGO_CHECK(xs[i] && xs[i]->rank() == 4, "concat_channels input " << i << " must be rank 4");
    HGO_CHECK(xs[i]->n() == N && xs[i]->h() == H && xs[i]->w() == W,
              "concat_channels input " << i << " shape " << shape_str(xs[i]->shape)
                                       << " mismatches input 0 " << shape_str(xs[0]->shape));
    C += xs[i]->c();
  }
  auto out = make_tensor<T>({N, C, H, W});
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  for (int n = 0; n < N; ++n) {
    std::int64_t coff = 0;
    for (const auto& xi : xs) {
      const std::int64_t count = static_cast<std::int64_t>(xi->c()) * plane;
      std::copy_n(xi->data.data() + static_cast<std::int64_t>(n) * count, count,
                  out->data.data() + (static_cast<std::int64_t>(n) * C + coff) * plane);
      coff += xi->c();
    }
  }
  if (any_taped(xs)) {
    out->requires_grad = true;
    out->parents = xs;
    out->backward_fn = [o = out.get(), xs, plane, C]() {
      const int N = o->n();
      for (int n = 0; n < N; ++n) {
        std::int64_t coff = 0;
        for (const auto& xi : xs) {
          const std::int64_t count = static_cast<std::int64_t>(xi->c()) * plane;
          if (xi->requires_grad) {
            xi->ensure_grad();
            const T* src = o->grad.data() + (static_cast<std::int64_t>(n) * C + coff) * plane;
            T* dst = xi->grad.data() + static_cast<std::int64_t>(n) * count;
            for (std::int64_t i = 0; i < count; ++i) dst[i] += src[i];
          }
          coff += xi->c();
        }
      }
    };
  }
  return out;
}

template <typename T>
std::vector<TensorPtr<T>> split_channels(const TensorPtr<T>& x, const std::vector<int>& sizes) {
  HGO_CHECK(x && x->rank() == 4, "split_channels input must be rank 4");
  int total = 0;
  for (int s : sizes) {
    HGO_CHECK(s >= 1, "split_channels size " << s << " must be >= 1");
    total += s;
  }
  HGO_CHECK(total == x->c(),
            "split sizes sum " << total << " != input channels " << x->c());
  const int N = x->n(), H = x->h(), W = x->w();
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;

  std::vector<TensorPtr<T>> outs;
  int coff = 0;
  for (int s : sizes) {
    auto out = make_tensor<T>({N, s, H, W});
    for (int n = 0; n < N; ++n) {
      std::copy_n(x->data.data() + (static_cast<std::int64_t>(n) * x->c() + coff) * plane,
                  static_cast<std::int64_t>(s) * plane,
                  out->data.data() + static_cast<std::int64_t>(n) * s * plane);
    }
    if (x->requires_grad) {
      out->requires_grad = true;
      out->parents = {x};
      out->backward_fn = [o = out.get(), x, coff, s, plane]() {
        x->ensure_grad();
        const int N = x->n();
        for (int n = 0; n < N; ++n) {
          const T* src = o->grad.data() + static_cast<std::int64_t>(n) * s * plane;
          T* dst = x->grad.data() + (static_cast<std::int64_t>(n) * x->c() + coff) * plane;
          for (std::int64_t i = 0; i < static_cast<std::int64_t>(s) * plane; ++i) dst[i] += src[i];
        }
      };
    }
    outs.push_back(std::move(out));
    coff += s;
  }
  return outs;
}

template <typename T>
TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  HGO_CHECK(a && b && a->shape == b->shape,
            "add shape mismatch " << shape_str(a->shape) << " vs " << shape_str(b->shape));
  auto out = make_tensor<T>(a->shape);
  for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
  if (a->requires_grad || b->requires_grad) {
    out->requires_grad = true;
    out->parents = {a, b};
    out->backward_fn = [o = out.get(), a, b]() {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i) a->grad[i] += o->grad[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < o->grad.size(); ++i) b->grad[i] += o->grad[i];
      }
    };
  }
  return out;
}

namespace {

// shared scaffold for elementwise unary ops
template <typename T, typename Fwd, typename Bwd>
TensorPtr<T> unary_op(const TensorPtr<T>& x, Fwd fwd, Bwd bwd) {
  HGO_CHECK(x != nullptr, "null input to elementwise op");
  auto out = make_tensor<T>(x->shape);
  for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = fwd(x->data[i]);
  if (x->requires_grad) {
    out->requires_grad = true;
    out->parents = {x};
    out->backward_fn = [o = out.get(), x, bwd]() {
      x->ensure_grad();
      for (std::size_t i = 0; i < o->grad.size(); ++i)
        x->grad[i] += o->grad[i] * bwd(x->data[i], o->data[i]);
    };
  }
  return out;
}

template <typename T>
T sigmoid_val(T v) {
  return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
}

}  // namespace

template <typename T>
TensorPtr<T> relu(const TensorPtr<T>& x) {
  return unary_op<T>(
      x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
TensorPtr<T> silu(const TensorPtr<T>& x) {
  return unary_op<T>(
      x, [](T v) { return v * sigmoid_val(v); },
      [](T v, T) {
        const T s = sigmoid_val(v);
        return s * (T(1) + v * (T(1) - s));
      });
}

template <typename T>
TensorPtr<T> sigmoid(const TensorPtr<T>& x) {
  return unary_op<T>(
      x, [](T v) { return sigmoid_val(v); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
TensorPtr<T> upsample_nearest2(const TensorPtr<T>& x) {
  HGO_CHECK(x && x->rank() == 4, "upsample input must be rank 4");
  const int N = x->n(), C = x->c(), H = x->h(), W = x->w();
  auto out = make_tensor<T>({N, C, 2 * H, 2 * W});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y) {
        const T* irow = &x->at(n, c, y, 0);
        T* orow0 = &out->at(n, c, 2 * y, 0);
        T* orow1 = &out->at(n, c, 2 * y + 1, 0);
        for (int xx = 0; xx < W; ++xx) {
          const T v = irow[xx];
          orow0[2 * xx] = v;
          orow0[2 * xx + 1] = v;
          orow1[2 * xx] = v;
          orow1[2 * xx + 1] = v;
        }
      }
  if (x->requires_grad) {
    out->requires_grad = true;
    out->parents = {x};
    out->backward_fn = [o = out.get(), x]() {
      x->ensure_grad();
      const int N = x->n(), C = x->c(), H = x->h(), W = x->w();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
          for (int y = 0; y < H; ++y) {
            T* drow = &x->grad[static_cast<std::size_t>(x->index(n, c, y, 0))];
            const T* g0 = &o->grad[static_cast<std::size_t>(o->index(n, c, 2 * y, 0))];
            const T* g1 = &o->grad[static_cast<std::size_t>(o->index(n, c, 2 * y + 1, 0))];
            for (int xx = 0; xx < W; ++xx)
              drow[xx] += g0[2 * xx] + g0[2 * xx + 1] + g1[2 * xx] + g1[2 * xx + 1];
          }
    };
  }
  return out;
}

template <typename T>
TensorPtr<T> pad2d(const TensorPtr<T>& x, int top, int bottom, int left, int right) {
  HGO_CHECK(x && x->rank() == 4, "pad2d input must be rank 4");
  HGO_CHECK(top >= 0 && bottom >= 0 && left >= 0 && right >= 0, "pad2d amounts must be >= 0");
  const int N = x->n(), C = x->c(), H = x->h(), W = x->w();
  const int OH = H + top + bottom, OW = W + left + right;
  auto out = make_tensor<T>({N, C, OH, OW});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y)
        std::copy_n(&x->at(n, c, y, 0), W, &out->at(n, c, y + top, left));
  if (x->requires_grad) {
    out->requires_grad = true;
    out->parents = {x};
    out->backward_fn = [o = out.get(), x, top, left]() {
      x->ensure_grad();
      const int N = x->n(), C = x->c(), H = x->h(), W = x->w();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
          for (int y = 0; y < H; ++y) {
            const T* g = &o->grad[static_cast<std::size_t>(o->index(n, c, y + top, left))];
            T* d = &x->grad[static_cast<std::size_t>(x->index(n, c, y, 0))];
            for (int xx = 0; xx < W; ++xx) d[xx] += g[xx];
          }
    };
  }
  return out;
}

template <typename T>
TensorPtr<T> channel_affine(const TensorPtr<T>& x, const TensorPtr<T>& scale,
                            const TensorPtr<T>& shift) {
  HGO_CHECK(x && x->rank() == 4, "channel_affine input must be rank 4");
  const int C = x->c();
  HGO_CHECK(scale && scale->shape == Shape{C},
            "channel_affine scale shape must be (" << C << ")");
  HGO_CHECK(shift && shift->shape == Shape{C},
            "channel_affine shift shape must be (" << C << ")");
  const int N = x->n();
  const std::int64_t plane = static_cast<std::int64_t>(x->h()) * x->w();
  auto out = make_tensor<T>(x->shape);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T s = scale->data[static_cast<std::size_t>(c)];
      const T b = shift->data[static_cast<std::size_t>(c)];
      const T* ip = x->data.data() + (static_cast<std::int64_t>(n) * C + c) * plane;
      T* op = out->data.data() + (static_cast<std::int64_t>(n) * C + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) op[i] = ip[i] * s + b;
    }
  if (x->requires_grad || scale->requires_grad || shift->requires_grad) {
    out->requires_grad = true;
    out->parents = {x, scale, shift};
    out->backward_fn = [o = out.get(), x, scale, shift, plane]() {
      const int N = x->n(), C = x->c();
      if (x->requires_grad) x->ensure_grad();
      if (scale->requires_grad) scale->ensure_grad();
      if (shift->requires_grad) shift->ensure_grad();
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
          const std::int64_t base = (static_cast<std::int64_t>(n) * C + c) * plane;
          const T* gp = o->grad.data() + base;
          const T* ip = x->data.data() + base;
          if (x->requires_grad) {
            const T s = scale->data[static_cast<std::size_t>(c)];
            T* dx = x->grad.data() + base;
            for (std::int64_t i = 0; i < plane; ++i) dx[i] += gp[i] * s;
          }
          if (scale->requires_grad) {
            T acc = 0;
            for (std::int64_t i = 0; i < plane; ++i) acc += gp[i] * ip[i];
            scale->grad[static_cast<std::size_t>(c)] += acc;
          }
          if (shift->requires_grad) {
            T acc = 0;
            for (std::int64_t i = 0; i < plane; ++i) acc += gp[i];
            shift->grad[static_cast<std::size_t>(c)] += acc;
          }
        }
    };
  }
  return out;
}

template <typename T>
TensorPtr<T> batchnorm_train(const TensorPtr<T>& x, const TensorPtr<T>& gamma,
                             const TensorPtr<T>& beta, std::vector<T>& running_mean,
                             std::vector<T>& running_var, T momentum, T eps) {
  HGO_CHECK(x && x->rank() == 4, "batchnorm input must be rank 4");
  const int N = x->n(), C = x->c();
  HGO_CHECK(gamma && gamma->shape == Shape{C}, "batchnorm gamma shape must be (" << C << ")");
  HGO_CHECK(beta && beta->shape == Shape{C}, "batchnorm beta shape must be (" << C << ")");
  HGO_CHECK(static_cast<int>(running_mean.size()) == C && static_cast<int>(running_var.size()) == C,
            "batchnorm running stats must have " << C << " entries");
  const std::int64_t plane = static_cast<std::int64_t>(x->h()) * x->w();
  const std::int64_t M = static_cast<std::int64_t>(N) * plane;
  HGO_CHECK(M >= 1, "batchnorm needs at least one value per channel");

  auto mean = std::make_shared<std::vector<T>>(static_cast<std::size_t>(C), T(0));
  auto invstd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(C), T(0));

  for (int c = 0; c < C; ++c) {
    T m = 0;
    for (int n = 0; n < N; ++n) {
      const T* ip = x->data.data() + (static_cast<std::int64_t>(n) * C + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) m += ip[i];
    }
    m /= static_cast<T>(M);
    T v = 0;
    for (int n = 0; n < N; ++n) {
      const T* ip = x->data.data() + (static_cast<std::int64_t>(n) * C + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        const T d = ip[i] - m;
        v += d * d;
      }
    }
    v /= static_cast<T>(M);
    (*mean)[static_cast<std::size_t>(c)] = m;
    (*invstd)[static_cast<std::size_t>(c)] = T(1) / std::sqrt(v + eps);
    running_mean[static_cast<std::size_t>(c)] =
        (T(1) - momentum) * running_mean[static_cast<std::size_t>(c)] + momentum * m;
    running_var[static_cast<std::size_t>(c)] =
        (T(1) - momentum) * running_var[static_cast<std::size_t>(c)] + momentum * v;
  }

  auto out = make_tensor<T>(x->shape);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T m = (*mean)[static_cast<std::size_t>(c)];
      const T is = (*invstd)[static_cast<std::size_t>(c)];
      const T g = gamma->data[static_cast<std::size_t>(c)];
      const T bb = beta->data[static_cast<std::size_t>(c)];
      const std::int64_t base = (static_cast<std::int64_t>(n) * C + c) * plane;
      const T* ip = x->data.data() + base;
      T* op = out->data.data() + base;
      for (std::int64_t i = 0; i < plane; ++i) op[i] = (ip[i] - m) * is * g + bb;
    }

  if (x->requires_grad || gamma->requires_grad || beta->requires_grad) {
    out->requires_grad = true;
    out->parents = {x, gamma, beta};
    out->backward_fn = [o = out.get(), x, gamma, beta, mean, invstd, plane, M]() {
      const int N = x->n(), C = x->c();
      if (x->requires_grad) x->ensure_grad();
      if (gamma->requires_grad) gamma->ensure_grad();
      if (beta->requires_grad) beta->ensure_grad();
      for (int c = 0; c < C; ++c) {
        const T m = (*mean)[static_cast<std::size_t>(c)];
        const T is = (*invstd)[static_cast<std::size_t>(c)];
        const T g = gamma->data[static_cast<std::size_t>(c)];
        // first pass: reductions over the channel
        T sum_gy = 0, sum_gy_xhat = 0;
        for (int n = 0; n < N; ++n) {
          const std::int64_t base = (static_cast<std::int64_t>(n) * C + c) * plane;
          const T* gp = o->grad.data() + base;
          const T* ip = x->data.data() + base;
          for (std::int64_t i = 0; i < plane; ++i) {
            sum_gy += gp[i];
            sum_gy_xhat += gp[i] * (ip[i] - m) * is;
          }
        }
        if (beta->requires_grad) beta->grad[static_cast<std::size_t>(c)] += sum_gy;
        if (gamma->requires_grad) gamma->grad[static_cast<std::size_t>(c)] += sum_gy_xhat;
        if (x->requires_grad) {
          // dx = (g*is/M) * (M*gy - sum_gy - xhat * sum_gy_xhat)
          const T k = g * is / static_cast<T>(M);
          for (int n = 0; n < N; ++n) {
            const std::int64_t base = (static_cast<std::int64_t>(n) * C + c) * plane;
            const T* gp = o->grad.data() + base;
            const T* ip = x->data.data() + base;
            T* dx = x->grad.data() + base;
            for (std::int64_t i = 0; i < plane; ++i) {
              const T xhat = (ip[i] - m) * is;
              dx[i] += k * (static_cast<T>(M) * gp[i] - sum_gy - xhat * sum_gy_xhat);
            }
          }
        }
      }
    };
  }
  return out;
}

template <typename T>
TensorPtr<T> softmax_channel_groups(const TensorPtr<T>& x, int group) {
  HGO_CHECK(x && x->rank() == 4, "softmax input must be rank 4");
  HGO_CHECK(group >= 1 && x->c() % group == 0,
            "softmax group " << group << " must divide channels " << x->c());
  const int N = x->n(), C = x->c(), H = x->h(), W = x->w();
  const int NG = C / group;
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  auto out = make_tensor<T>(x->shape);
  for (int n = 0; n < N; ++n)
    for (int gidx = 0; gidx < NG; ++gidx)
      for (std::int64_t p = 0; p < plane; ++p) {
        const std::int64_t base =
            (static_cast<std::int64_t>(n) * C + static_cast<std::int64_t>(gidx) * group) * plane + p;
        T mx = -std::numeric_limits<T>::infinity();
        for (int i = 0; i < group; ++i) mx = std::max(mx, x->data[static_cast<std::size_t>(base + i * plane)]);
        T denom = 0;
        for (int i = 0; i < group; ++i) {
          const T e = std::exp(x->data[static_cast<std::size_t>(base + i * plane)] - mx);
          out->data[static_cast<std::size_t>(base + i * plane)] = e;
          denom += e;
        }
        for (int i = 0; i < group; ++i) out->data[static_cast<std::size_t>(base + i * plane)] /= denom;
      }
  if (x->requires_grad) {
    out->requires_grad = true;
    out->parents = {x};
    out->backward_fn = [o = out.get(), x, group, plane]() {
      x->ensure_grad();
      const int N = x->n(), C = x->c();
      const int NG = C / group;
      for (int n = 0; n < N; ++n)
        for (int gidx = 0; gidx < NG; ++gidx)
          for (std::int64_t p = 0; p < plane; ++p) {
            const std::int64_t base =
                (static_cast<std::int64_t>(n) * C + static_cast<std::int64_t>(gidx) * group) * plane +
                p;
            T dot = 0;
            for (int i = 0; i < group; ++i) {
              const std::size_t idx = static_cast<std::size_t>(base + i * plane);
              dot += o->grad[idx] * o->data[idx];
            }
            for (int i = 0; i < group; ++i) {
              const std::size_t idx = static_cast<std::size_t>(base + i * plane);
              x->grad[idx] += o->data[idx] * (o->grad[idx] - dot);
            }
          }
    };
  }
  return out;
}

template <typename T>
TensorPtr<T> dfl_expectation(const TensorPtr<T>& x, int bins) {
  HGO_CHECK(x && x->rank() == 4, "dfl_expectation input must be rank 4");
  HGO_CHECK(bins >= 2, "dfl_expectation bins " << bins << " must be >= 2");
  HGO_CHECK(x->c() == 4 * bins,
            "dfl_expectation channels " << x->c() << " != 4*bins (" << 4 * bins << ")");
  const int N = x->n(), H = x->h(), W = x->w();
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  auto out = make_tensor<T>({N, 4, H, W});
  // keep the probabilities for the backward pass
  auto probs = std::make_shared<std::vector<T>>(x->data.size());
  for (int n = 0; n < N; ++n)
    for (int side = 0; side < 4; ++side)
      for (std::int64_t p = 0; p < plane; ++p) {
        const std::int64_t base =
            (static_cast<std::int64_t>(n) * 4 * bins + static_cast<std::int64_t>(side) * bins) * plane +
            p;
        T mx = -std::numeric_limits<T>::infinity();
        for (int i = 0; i < bins; ++i) mx = std::max(mx, x->data[static_cast<std::size_t>(base + i * plane)]);
        T denom = 0;
        for (int i = 0; i < bins; ++i) {
          const T e = std::exp(x->data[static_cast<std::size_t>(base + i * plane)] - mx);
          (*probs)[static_cast<std::size_t>(base + i * plane)] = e;
          denom += e;
        }
        T expect = 0;
        for (int i = 0; i < bins; ++i) {
          T& pe = (*probs)[static_cast<std::size_t>(base + i * plane)];
          pe /= denom;
          expect += static_cast<T>(i) * pe;
        }
        out->data[static_cast<std::size_t>(
            (static_cast<std::int64_t>(n) * 4 + side) * plane + p)] = expect;
      }
  if (x->requires_grad) {
    out->requires_grad = true;
    out->parents = {x};
    out->backward_fn = [o = out.get(), x, probs, bins, plane]() {
      x->ensure_grad();
      const int N = x->n();
      for (int n = 0; n < N; ++n)
        for (int side = 0; side < 4; ++side)
          for (std::int64_t p = 0; p < plane; ++p) {
            const std::size_t oidx =
                static_cast<std::size_t>((static_cast<std::int64_t>(n) * 4 + side) * plane + p);
            const T g = o->grad[oidx];
            if (g == T(0)) continue;
            const T e = o->data[oidx];
            const std::int64_t base = (static_cast<std::int64_t>(n) * 4 * bins +
                                       static_cast<std::int64_t>(side) * bins) *
                                          plane +
                                      p;
            for (int i = 0; i < bins; ++i) {
              const std::size_t idx = static_cast<std::size_t>(base + i * plane);
              x->grad[idx] += g * (*probs)[idx] * (static_cast<T>(i) - e);
            }
          }
    };
  }
  return out;
}

template <typename T>
TensorPtr<T> sum_all(const TensorPtr<T>& x) {
  HGO_CHECK(x != nullptr, "sum_all on null tensor");
  T s = 0;
  for (T v : x->data) s += v;
  auto out = scalar_tensor<T>(s);
  if (x->requires_grad) {
    out->requires_grad = true;
    out->parents = {x};
    out->backward_fn = [o = out.get(), x]() {
      x->ensure_grad();
      const T g = o->grad[0];
      for (auto& gv : x->grad) gv += g;
    };
  }
  return out;
}

template <typename T>
TensorPtr<T> select(const TensorPtr<T>& x, std::int64_t flat_index) {
  HGO_CHECK(x && flat_index >= 0 && flat_index < x->numel(),
            "select index " << flat_index << " out of range for " << (x ? x->numel() : 0)
                            << " elements");
  auto out = scalar_tensor<T>(x->data[static_cast<std::size_t>(flat_index)]);
  if (x->requires_grad) {
    out->requires_grad = true;
    out->parents = {x};
    out->backward_fn = [o = out.get(), x, flat_index]() {
      x->ensure_grad();
      x->grad[static_cast<std::size_t>(flat_index)] += o->grad[0];
    };
  }
  return out;
}

template <typename T>
TensorPtr<T> stack_scalars(const std::vector<TensorPtr<T>>& xs) {
  HGO_CHECK(!xs.empty(), "stack_scalars needs at least one input");
  auto out = make_tensor<T>(Shape{static_cast<int>(xs.size())});
  bool any_grad = false;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    HGO_CHECK(xs[i] && xs[i]->numel() == 1, "stack_scalars input " << i << " is not scalar");
    out->data[i] = xs[i]->data[0];
    any_grad = any_grad || xs[i]->requires_grad;
  }
  if (any_grad) {
    out->requires_grad = true;
    out->parents = xs;
    out->backward_fn = [o = out.get(), xs]() {
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!xs[i]->requires_grad) continue;
        xs[i]->ensure_grad();
        xs[i]->grad[0] += o->grad[i];
      }
    };
  }
  return out;
}

namespace {

template <typename T, typename Fwd, typename BwdA, typename BwdB>
TensorPtr<T> binary_op(const TensorPtr<T>& a, const TensorPtr<T>& b, Fwd fwd, BwdA ba, BwdB bb) {
  HGO_CHECK(a && b && a->shape == b->shape,
            "elementwise shape mismatch " << shape_str(a->shape) << " vs " << shape_str(b->shape));
  auto out = make_tensor<T>(a->shape);
  for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] = fwd(a->data[i], b->data[i]);
  if (a->requires_grad || b->requires_grad) {
    out->requires_grad = true;
    out->parents = {a, b};
    out->backward_fn = [o = out.get(), a, b, ba, bb]() {
      if (a->requires_grad) a->ensure_grad();
      if (b->requires_grad) b->ensure_grad();
      for (std::size_t i = 0; i < o->grad.size(); ++i) {
        const T g = o->grad[i];
        if (a->requires_grad) a->grad[i] += g * ba(a->data[i], b->data[i]);
        if (b->requires_grad) b->grad[i] += g * bb(a->data[i], b->data[i]);
      }
    };
  }
  return out;
}

}  // namespace

template <typename T>
TensorPtr<T> sub(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  return binary_op<T>(
      a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <typename T>
TensorPtr<T> mul(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  return binary_op<T>(
      a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <typename T>
TensorPtr<T> div(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  return binary_op<T>(
      a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
      [](T x, T y) { return -x / (y * y); });
}

template <typename T>
TensorPtr<T> maximum(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  return binary_op<T>(
      a, b, [](T x, T y) { return x >= y ? x : y; }, [](T x, T y) { return x >= y ? T(1) : T(0); },
      [](T x, T y) { return x >= y ? T(0) : T(1); });
}

template <typename T>
TensorPtr<T> minimum(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  return binary_op<T>(
      a, b, [](T x, T y) { return x <= y ? x : y; }, [](T x, T y) { return x <= y ? T(1) : T(0); },
      [](T x, T y) { return x <= y ? T(0) : T(1); });
}

template <typename T>
TensorPtr<T> add_const(const TensorPtr<T>& x, T c) {
  return unary_op<T>(
      x, [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

template <typename T>
TensorPtr<T> mul_const(const TensorPtr<T>& x, T c) {
  return unary_op<T>(
      x, [c](T v) { return v * c; }, [c](T, T) { return c; });
}

template <typename T>
TensorPtr<T> clamp(const TensorPtr<T>& x, T lo, T hi) {
  return unary_op<T>(
      x, [lo, hi](T v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
TensorPtr<T> log(const TensorPtr<T>& x) {
  return unary_op<T>(
      x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
TensorPtr<T> atan(const TensorPtr<T>& x) {
  return unary_op<T>(
      x, [](T v) { return std::atan(v); }, [](T v, T) { return T(1) / (T(1) + v * v); });
}

template <typename T>
TensorPtr<T> square(const TensorPtr<T>& x) {
  return unary_op<T>(
      x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
TensorPtr<T> bce_with_logits_sum(const TensorPtr<T>& logits, const std::vector<T>& targets,
                                 const std::vector<T>& weights) {
  HGO_CHECK(logits != nullptr, "bce on null tensor");
  HGO_CHECK(targets.size() == logits->data.size() && weights.size() == logits->data.size(),
            "bce target/weight count " << targets.size() << "/" << weights.size()
                                       << " != logit count " << logits->data.size());
  T total = 0;
  for (std::size_t i = 0; i < logits->data.size(); ++i) {
    const T w = weights[i];
    if (w == T(0)) continue;
    const T z = logits->data[i];
    const T y = targets[i];
    // max(z,0) - z*y + log(1 + exp(-|z|))
    total += w * ((z > T(0) ? z : T(0)) - z * y + std::log1p(std::exp(-std::abs(z))));
  }
  auto out = scalar_tensor<T>(total);
  if (logits->requires_grad) {
    out->requires_grad = true;
    out->parents = {logits};
    // shared_ptr copies keep the constant vectors alive with the closure
    auto tgt = std::make_shared<std::vector<T>>(targets);
    auto wgt = std::make_shared<std::vector<T>>(weights);
    out->backward_fn = [o = out.get(), logits, tgt, wgt]() {
      logits->ensure_grad();
      const T g = o->grad[0];
      for (std::size_t i = 0; i < logits->data.size(); ++i) {
        const T w = (*wgt)[i];
        if (w == T(0)) continue;
        logits->grad[i] += g * w * (sigmoid_val(logits->data[i]) - (*tgt)[i]);
      }
    };
  }
  return out;
}

template <typename T>
TensorPtr<T> dfl_loss_map(const TensorPtr<T>& reg_logits, const std::vector<T>& target_dist,
                          const std::vector<T>& weights, int bins) {
  HGO_CHECK(reg_logits && reg_logits->rank() == 4, "dfl_loss_map input must be rank 4");
  HGO_CHECK(reg_logits->c() == 4 * bins,
            "dfl_loss_map channels " << reg_logits->c() << " != 4*bins " << 4 * bins);
  const int N = reg_logits->n(), H = reg_logits->h(), W = reg_logits->w();
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  const std::size_t slots = static_cast<std::size_t>(N) * 4 * static_cast<std::size_t>(plane);
  HGO_CHECK(target_dist.size() == slots && weights.size() == slots,
            "dfl_loss_map target/weight count " << target_dist.size() << "/" << weights.size()
                                                << " != anchor-side count " << slots);

  T total = 0;
  for (int n = 0; n < N; ++n)
    for (int side = 0; side < 4; ++side)
      for (std::int64_t p = 0; p < plane; ++p) {
        const std::size_t slot =
            static_cast<std::size_t>((static_cast<std::int64_t>(n) * 4 + side) * plane + p);
        const T w = weights[slot];
        if (w == T(0)) continue;
        T t = target_dist[slot];
        t = std::min(std::max(t, T(0)), static_cast<T>(bins - 1));
        const int lo = std::min(static_cast<int>(t), bins - 2);
        const int hi = lo + 1;
        const T wr = t - static_cast<T>(lo);
        const T wl = T(1) - wr;
        const std::int64_t base = (static_cast<std::int64_t>(n) * 4 * bins +
                                   static_cast<std::int64_t>(side) * bins) *
                                      plane +
                                  p;
        // log-softmax at the two straddling bins
        T mx = -std::numeric_limits<T>::infinity();
        for (int i = 0; i < bins; ++i)
          mx = std::max(mx, reg_logits->data[static_cast<std::size_t>(base + i * plane)]);
        T denom = 0;
        for (int i = 0; i < bins; ++i)
          denom += std::exp(reg_logits->data[static_cast<std::size_t>(base + i * plane)] - mx);
        const T logz = mx + std::log(denom);
        const T log_plo = reg_logits->data[static_cast<std::size_t>(base + lo * plane)] - logz;
        const T log_phi = reg_logits->data[static_cast<std::size_t>(base + hi * plane)] - logz;
        total += -w * (wl * log_plo + wr * log_phi);
      }

  auto out = scalar_tensor<T>(total);
  if (reg_logits->requires_grad) {
    out->requires_grad = true;
    out->parents = {reg_logits};
    auto tgt = std::make_shared<std::vector<T>>(target_dist);
    auto wgt = std::make_shared<std::vector<T>>(weights);
    out->backward_fn = [o = out.get(), reg_logits, tgt, wgt, bins, plane]() {
      reg_logits->ensure_grad();
      const T g = o->grad[0];
      const int N = reg_logits->n();
      for (int n = 0; n < N; ++n)
        for (int side = 0; side < 4; ++side)
          for (std::int64_t p = 0; p < plane; ++p) {
            const std::size_t slot =
                static_cast<std::size_t>((static_cast<std::int64_t>(n) * 4 + side) * plane + p);
            const T w = (*wgt)[slot];
            if (w == T(0)) continue;
            T t = (*tgt)[slot];
            t = std::min(std::max(t, T(0)), static_cast<T>(bins - 1));
            const int lo = std::min(static_cast<int>(t), bins - 2);
            const int hi = lo + 1;
            const T wr = t - static_cast<T>(lo);
            const T wl = T(1) - wr;
            const std::int64_t base = (static_cast<std::int64_t>(n) * 4 * bins +
                                       static_cast<std::int64_t>(side) * bins) *
                                          plane +
                                      p;
            T mx = -std::numeric_limits<T>::infinity();
            for (int i = 0; i < bins; ++i)
              mx = std::max(mx, reg_logits->data[static_cast<std::size_t>(base + i * plane)]);
            T denom = 0;
            for (int i = 0; i < bins; ++i)
              denom += std::exp(reg_logits->data[static_cast<std::size_t>(base + i * plane)] - mx);
            for (int i = 0; i < bins; ++i) {
              const std::size_t idx = static_cast<std::size_t>(base + i * plane);
              const T pi = std::exp(reg_logits->data[idx] - mx) / denom;
              T d = pi;
              if (i == lo) d -= wl;
              if (i == hi) d -= wr;
              reg_logits->grad[idx] += g * w * d;
            }
          }
    };
  }
  return out;
}

// explicit instantiations: float is the production path, double the oracle one
#define HGO_INSTANTIATE_OPS(T)                                                                  \
  template TensorPtr<T> conv2d<T>(const TensorPtr<T>&, const ConvSpec&, const TensorPtr<T>&,   \
                                  const TensorPtr<T>&);                                         \
  template TensorPtr<T> maxpool2d<T>(const TensorPtr<T>&, int, int, int);                      \
  template TensorPtr<T> concat_channels<T>(const std::vector<TensorPtr<T>>&);                  \
  template std::vector<TensorPtr<T>> split_channels<T>(const TensorPtr<T>&,                    \
                                                       const std::vector<int>&);               \
  template TensorPtr<T> add<T>(const TensorPtr<T>&, const TensorPtr<T>&);                      \
  template TensorPtr<T> relu<T>(const TensorPtr<T>&);                                          \
  template TensorPtr<T> silu<T>(const TensorPtr<T>&);                                          \
  template TensorPtr<T> sigmoid<T>(const TensorPtr<T>&);                                       \
  template TensorPtr<T> upsample_nearest2<T>(const TensorPtr<T>&);                             \
  template TensorPtr<T> pad2d<T>(const TensorPtr<T>&, int, int, int, int);                     \
  template TensorPtr<T> channel_affine<T>(const TensorPtr<T>&, const TensorPtr<T>&,           \
                                          const TensorPtr<T>&);                                \
  template TensorPtr<T> batchnorm_train<T>(const TensorPtr<T>&, const TensorPtr<T>&,          \
                                           const TensorPtr<T>&, std::vector<T>&,               \
                                           std::vector<T>&, T, T);                             \
  template TensorPtr<T> softmax_channel_groups<T>(const TensorPtr<T>&, int);                   \
  template TensorPtr<T> dfl_expectation<T>(const TensorPtr<T>&, int);                          \
  template TensorPtr<T> sum_all<T>(const TensorPtr<T>&);                                       \
  template TensorPtr<T> select<T>(const TensorPtr<T>&, std::int64_t);                          \
  template TensorPtr<T> stack_scalars<T>(const std::vector<TensorPtr<T>>&);                    \
  template TensorPtr<T> sub<T>(const TensorPtr<T>&, const TensorPtr<T>&);                      \
  template TensorPtr<T> mul<T>(const TensorPtr<T>&, const TensorPtr<T>&);                      \
  template TensorPtr<T> div<T>(const TensorPtr<T>&, const TensorPtr<T>&);                      \
  template TensorPtr<T> maximum<T>(const TensorPtr<T>&, const TensorPtr<T>&);                  \
  template TensorPtr<T> minimum<T>(const TensorPtr<T>&, const TensorPtr<T>&);                  \
  template TensorPtr<T> add_const<T>(const TensorPtr<T>&, T);                                  \
  template TensorPtr<T> mul_const<T>(const TensorPtr<T>&, T);                                  \
  template TensorPtr<T> clamp<T>(const TensorPtr<T>&, T, T);                                   \
  template TensorPtr<T> log<T>(const TensorPtr<T>&);                                           \
  template TensorPtr<T> atan<T>(const TensorPtr<T>&);                                          \
  template TensorPtr<T> square<T>(const TensorPtr<T>&);                                        \
  template TensorPtr<T> bce_with_logits_sum<T>(const TensorPtr<T>&, const std::vector<T>&,    \
                                               const std::vector<T>&);                         \
  template TensorPtr<T> dfl_loss_map<T>(const TensorPtr<T>&, const std::vector<T>&,           \
                                        const std::vector<T>&, int);

HGO_INSTANTIATE_OPS(float)
HGO_INSTANTIATE_OPS(double)

#undef HGO_INSTANTIATE_OPS

}  // namespace ops
}  // namespace hgo
