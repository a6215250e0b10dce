#include "hgo/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hgo {

namespace {

constexpr double kEps = 1e-9;

double plain_iou(const Box& a, const Box& b) {
  const double iw = std::max(0.0, static_cast<double>(std::min(a.x2, b.x2)) -
                                      std::max(a.x1, b.x1));
  const double ih = std::max(0.0, static_cast<double>(std::min(a.y2, b.y2)) -
                                      std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = static_cast<double>(a.area()) + b.area() - inter;
  return inter / std::max(uni, kEps);
}

}  // namespace

void Box::validate() const {
  HGO_CHECK(std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2),
            "box has non-finite coordinate");
  HGO_CHECK(x2 >= x1 && y2 >= y1,
            "box corners out of order (" << x1 << "," << y1 << "," << x2 << "," << y2 << ")");
}

IouValues iou_metrics(const Box& pred, const Box& gt, double image_w, double image_h,
                      double inner_ratio) {
  pred.validate();
  gt.validate();
  HGO_CHECK(image_w > 0 && image_h > 0, "image dims must be positive");
  IouValues v;
  if (static_cast<double>(gt.area()) <= 0.0) {
    v.degenerate = true;  // metrics pinned to 0 rather than NaN
    return v;
  }

  const double ax1 = pred.x1, ay1 = pred.y1, ax2 = pred.x2, ay2 = pred.y2;
  const double bx1 = gt.x1, by1 = gt.y1, bx2 = gt.x2, by2 = gt.y2;

  const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = iw * ih;
  const double uni = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter;
  v.iou = inter / std::max(uni, kEps);

  const double acx = 0.5 * (ax1 + ax2), acy = 0.5 * (ay1 + ay2);
  const double bcx = 0.5 * (bx1 + bx2), bcy = 0.5 * (by1 + by2);
  const double rho2 = (acx - bcx) * (acx - bcx) + (acy - bcy) * (acy - bcy);
  const double ex = std::max(ax2, bx2) - std::min(ax1, bx1);
  const double ey = std::max(ay2, by2) - std::min(ay1, by1);
  const double c2 = ex * ex + ey * ey;
  v.diou = v.iou - rho2 / std::max(c2, kEps);

  const double aw = ax2 - ax1, ah = ay2 - ay1;
  const double bw = bx2 - bx1, bh = by2 - by1;
  const double pi2 = M_PI * M_PI;
  const double dv = std::atan(bw / (bh + kEps)) - std::atan(aw / (ah + kEps));
  const double vterm = 4.0 / pi2 * dv * dv;
  const double alpha = vterm / ((1.0 - v.iou) + vterm + kEps);
  v.ciou = v.diou - alpha * vterm;

  const double norm = image_w * image_w + image_h * image_h;
  const double d1 = (ax1 - bx1) * (ax1 - bx1) + (ay1 - by1) * (ay1 - by1);
  const double d2 = (ax2 - bx2) * (ax2 - bx2) + (ay2 - by2) * (ay2 - by2);
  v.mpdiou = v.iou - d1 / norm - d2 / norm;

  const double r = inner_ratio;
  const double iax1 = acx - aw * r * 0.5, iax2 = acx + aw * r * 0.5;
  const double iay1 = acy - ah * r * 0.5, iay2 = acy + ah * r * 0.5;
  const double ibx1 = bcx - bw * r * 0.5, ibx2 = bcx + bw * r * 0.5;
  const double iby1 = bcy - bh * r * 0.5, iby2 = bcy + bh * r * 0.5;
  const double iiw = std::max(0.0, std::min(iax2, ibx2) - std::max(iax1, ibx1));
  const double iih = std::max(0.0, std::min(iay2, iby2) - std::max(iay1, iby1));
  const double iinter = iiw * iih;
  const double iuni =
      (iax2 - iax1) * (iay2 - iay1) + (ibx2 - ibx1) * (iby2 - iby1) - iinter;
  const double inner_iou = iinter / std::max(iuni, kEps);
  v.inner_ciou = v.ciou - v.iou + inner_iou;
  return v;
}

BoxLossKind box_loss_from_string(const std::string& s) {
  if (s == "diou") return BoxLossKind::Diou;
  if (s == "ciou") return BoxLossKind::Ciou;
  if (s == "mpdiou") return BoxLossKind::Mpdiou;
  if (s == "inner_ciou") return BoxLossKind::InnerCiou;
  throw Error("unknown box loss '" + s + "' (expected diou|ciou|mpdiou|inner_ciou)");
}

std::string to_string(BoxLossKind k) {
  switch (k) {
    case BoxLossKind::Diou:
      return "diou";
    case BoxLossKind::Ciou:
      return "ciou";
    case BoxLossKind::Mpdiou:
      return "mpdiou";
    case BoxLossKind::InnerCiou:
      return "inner_ciou";
  }
  return "?";
}

// ------------------------------------------------------- taped metric graphs

namespace {

template <typename T>
struct BoxG {
  TensorPtr<T> x1, y1, x2, y2;
};

template <typename T>
BoxG<T> unpack(const TensorPtr<T>& b) {
  HGO_CHECK(b && b->numel() == 4, "metric input must be a 4-element box tensor");
  return {ops::select(b, 0), ops::select(b, 1), ops::select(b, 2), ops::select(b, 3)};
}

template <typename T>
TensorPtr<T> cst(T v) {
  return scalar_tensor<T>(v);
}

// max(0, min(a2,b2) - max(a1,b1))
template <typename T>
TensorPtr<T> overlap1d(const TensorPtr<T>& a1, const TensorPtr<T>& a2, const TensorPtr<T>& b1,
                       const TensorPtr<T>& b2) {
  return ops::maximum(ops::sub(ops::minimum(a2, b2), ops::maximum(a1, b1)), cst<T>(0));
}

template <typename T>
TensorPtr<T> guarded_div(const TensorPtr<T>& num, const TensorPtr<T>& den) {
  // denominators are clamped from below so exact rationals stay exact
  return ops::div(num, ops::maximum(den, cst<T>(static_cast<T>(kEps))));
}

template <typename T>
TensorPtr<T> area_g(const BoxG<T>& b) {
  return ops::mul(ops::sub(b.x2, b.x1), ops::sub(b.y2, b.y1));
}

template <typename T>
TensorPtr<T> iou_g(const BoxG<T>& a, const BoxG<T>& b) {
  auto inter = ops::mul(overlap1d(a.x1, a.x2, b.x1, b.x2), overlap1d(a.y1, a.y2, b.y1, b.y2));
  auto uni = ops::sub(ops::add(area_g(a), area_g(b)), inter);
  return guarded_div(inter, uni);
}

template <typename T>
TensorPtr<T> diou_g(const BoxG<T>& a, const BoxG<T>& b) {
  auto iou = iou_g(a, b);
  auto dx = ops::mul_const(ops::sub(ops::add(a.x1, a.x2), ops::add(b.x1, b.x2)), T(0.5));
  auto dy = ops::mul_const(ops::sub(ops::add(a.y1, a.y2), ops::add(b.y1, b.y2)), T(0.5));
  auto rho2 = ops::add(ops::square(dx), ops::square(dy));
  auto ex = ops::sub(ops::maximum(a.x2, b.x2), ops::minimum(a.x1, b.x1));
  auto ey = ops::sub(ops::maximum(a.y2, b.y2), ops::minimum(a.y1, b.y1));
  auto c2 = ops::add(ops::square(ex), ops::square(ey));
  return ops::sub(iou, guarded_div(rho2, c2));
}

template <typename T>
TensorPtr<T> ciou_g(const BoxG<T>& a, const BoxG<T>& b) {
  auto iou = iou_g(a, b);
  auto diou = diou_g(a, b);
  auto aw = ops::sub(a.x2, a.x1), ah = ops::sub(a.y2, a.y1);
  auto bw = ops::sub(b.x2, b.x1), bh = ops::sub(b.y2, b.y1);
  auto dv = ops::sub(ops::atan(ops::div(bw, ops::add_const(bh, static_cast<T>(kEps)))),
                     ops::atan(ops::div(aw, ops::add_const(ah, static_cast<T>(kEps)))));
  auto v = ops::mul_const(ops::square(dv), static_cast<T>(4.0 / (M_PI * M_PI)));
  // alpha kept on the tape (no detach)
  auto alpha = ops::div(
      v, ops::add_const(ops::add(ops::sub(cst<T>(1), iou), v), static_cast<T>(kEps)));
  return ops::sub(diou, ops::mul(alpha, v));
}

template <typename T>
BoxG<T> shrink(const BoxG<T>& b, T ratio) {
  auto cx = ops::mul_const(ops::add(b.x1, b.x2), T(0.5));
  auto cy = ops::mul_const(ops::add(b.y1, b.y2), T(0.5));
  auto hw = ops::mul_const(ops::sub(b.x2, b.x1), static_cast<T>(ratio * T(0.5)));
  auto hh = ops::mul_const(ops::sub(b.y2, b.y1), static_cast<T>(ratio * T(0.5)));
  return {ops::sub(cx, hw), ops::sub(cy, hh), ops::add(cx, hw), ops::add(cy, hh)};
}

}  // namespace

template <typename T>
TensorPtr<T> iou_graph(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  return iou_g(unpack(a), unpack(b));
}

template <typename T>
TensorPtr<T> diou_graph(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  return diou_g(unpack(a), unpack(b));
}

template <typename T>
TensorPtr<T> ciou_graph(const TensorPtr<T>& a, const TensorPtr<T>& b) {
  return ciou_g(unpack(a), unpack(b));
}

template <typename T>
TensorPtr<T> mpdiou_graph(const TensorPtr<T>& a, const TensorPtr<T>& b, T image_w, T image_h) {
  HGO_CHECK(image_w > 0 && image_h > 0, "image dims must be positive");
  auto A = unpack(a), B = unpack(b);
  auto iou = iou_g(A, B);
  auto d1 = ops::add(ops::square(ops::sub(A.x1, B.x1)), ops::square(ops::sub(A.y1, B.y1)));
  auto d2 = ops::add(ops::square(ops::sub(A.x2, B.x2)), ops::square(ops::sub(A.y2, B.y2)));
  const T inv = T(1) / (image_w * image_w + image_h * image_h);
  return ops::sub(ops::sub(iou, ops::mul_const(d1, inv)), ops::mul_const(d2, inv));
}

template <typename T>
TensorPtr<T> inner_ciou_graph(const TensorPtr<T>& a, const TensorPtr<T>& b, T inner_ratio) {
  HGO_CHECK(inner_ratio > 0, "inner_ratio must be positive");
  auto A = unpack(a), B = unpack(b);
  auto inner = iou_g(shrink(A, inner_ratio), shrink(B, inner_ratio));
  return ops::add(ops::sub(ciou_g(A, B), iou_g(A, B)), inner);
}

template <typename T>
TensorPtr<T> box_metric_graph(BoxLossKind kind, const TensorPtr<T>& a, const TensorPtr<T>& b,
                              T image_w, T image_h, T inner_ratio) {
  switch (kind) {
    case BoxLossKind::Diou:
      return diou_graph(a, b);
    case BoxLossKind::Ciou:
      return ciou_graph(a, b);
    case BoxLossKind::Mpdiou:
      return mpdiou_graph(a, b, image_w, image_h);
    case BoxLossKind::InnerCiou:
      return inner_ciou_graph(a, b, inner_ratio);
  }
  throw Error("unknown box loss kind");
}

// ----------------------------------------------------------------- dfl_loss

template <typename T>
TensorPtr<T> dfl_loss(const TensorPtr<T>& side_logits, T t) {
  HGO_CHECK(side_logits && side_logits->rank() == 1 && side_logits->numel() >= 2,
            "dfl_loss expects a rank-1 logit vector of >= 2 bins");
  const int bins = static_cast<int>(side_logits->numel());
  HGO_CHECK(t >= T(0) && t <= static_cast<T>(bins - 1),
            "dfl target " << t << " outside [0, " << bins - 1 << "]");
  const int lo = std::min(static_cast<int>(t), bins - 2);
  const T wr = t - static_cast<T>(lo);
  const T wl = T(1) - wr;

  // log-softmax, max-shifted
  T mx = side_logits->data[0];
  for (const T z : side_logits->data) mx = std::max(mx, z);
  T denom = T(0);
  std::vector<T> p(static_cast<std::size_t>(bins));
  for (int i = 0; i < bins; ++i) {
    p[static_cast<std::size_t>(i)] = std::exp(side_logits->data[static_cast<std::size_t>(i)] - mx);
    denom += p[static_cast<std::size_t>(i)];
  }
  for (auto& v : p) v /= denom;
  const T lse = std::log(denom) + mx;
  const T loss = -(wl * (side_logits->data[static_cast<std::size_t>(lo)] - lse) +
                   wr * (side_logits->data[static_cast<std::size_t>(lo + 1)] - lse));

  auto out = scalar_tensor<T>(loss);
  if (side_logits->requires_grad) {
    out->requires_grad = true;
    out->parents = {side_logits};
    out->backward_fn = [o = out.get(), side_logits, p = std::move(p), lo, wl, wr]() {
      side_logits->ensure_grad();
      const T g = o->grad[0];
      for (std::size_t i = 0; i < p.size(); ++i) {
        T d = p[i];
        if (static_cast<int>(i) == lo) d -= wl;
        if (static_cast<int>(i) == lo + 1) d -= wr;
        side_logits->grad[i] += g * d;
      }
    };
  }
  return out;
}

// ----------------------------------------------------------- target assigner

Assignment assign_targets(const Anchors& anchors, const std::vector<Box>& gt_boxes,
                          const std::vector<int>& gt_classes,
                          const std::vector<float>& decoded_xyxy, int topk) {
  const std::size_t A = anchors.count();
  HGO_CHECK(gt_boxes.size() == gt_classes.size(), "gt box/class count mismatch");
  HGO_CHECK(decoded_xyxy.empty() || decoded_xyxy.size() == 4 * A,
            "decoded box array size " << decoded_xyxy.size() << " != 4*" << A);
  HGO_CHECK(topk >= 1, "topk must be >= 1");
  const bool have_pred = !decoded_xyxy.empty();

  Assignment out;
  out.gt_index.assign(A, -1);
  out.score.assign(A, 0.0f);
  std::vector<double> best(A, -1e30);

  std::vector<std::size_t> cand;
  for (std::size_t g = 0; g < gt_boxes.size(); ++g) {
    const Box& gt = gt_boxes[g];
    gt.validate();
    cand.clear();
    for (std::size_t a = 0; a < A; ++a) {
      if (anchors.cx[a] >= gt.x1 && anchors.cx[a] <= gt.x2 && anchors.cy[a] >= gt.y1 &&
          anchors.cy[a] <= gt.y2)
        cand.push_back(a);
    }
    if (cand.empty()) continue;

    // ranking value: decoded-prediction IoU, or negative squared center
    // distance before any prediction exists
    std::vector<double> rank(cand.size());
    const double gcx = 0.5 * (gt.x1 + gt.x2), gcy = 0.5 * (gt.y1 + gt.y2);
    for (std::size_t i = 0; i < cand.size(); ++i) {
      const std::size_t a = cand[i];
      if (have_pred) {
        const Box pb{decoded_xyxy[4 * a + 0], decoded_xyxy[4 * a + 1], decoded_xyxy[4 * a + 2],
                     decoded_xyxy[4 * a + 3]};
        rank[i] = plain_iou(pb, gt);
      } else {
        const double dx = anchors.cx[a] - gcx, dy = anchors.cy[a] - gcy;
        rank[i] = -(dx * dx + dy * dy);
      }
    }
    std::vector<std::size_t> order(cand.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
      if (rank[l] != rank[r]) return rank[l] > rank[r];
      return cand[l] < cand[r];
    });
    const std::size_t take = std::min(static_cast<std::size_t>(topk), order.size());
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t a = cand[order[i]];
      const double v = rank[order[i]];
      if (v > best[a]) {  // conflicts: higher rank wins, earlier gt on ties
        best[a] = v;
        out.gt_index[a] = static_cast<int>(g);
        out.score[a] = have_pred ? static_cast<float>(std::max(0.0, v)) : 0.0f;
      }
    }
  }
  for (int gi : out.gt_index)
    if (gi >= 0) ++out.num_pos;
  return out;
}

// ------------------------------------------------------------ detection_loss

LossBundle detection_loss(const std::vector<Tensor>& head_maps,
                          const std::vector<std::vector<Box>>& gt_boxes,
                          const std::vector<std::vector<int>>& gt_classes,
                          const HeadConfig& cfg, int image_w, int image_h, BoxLossKind kind,
                          LossWeights weights, double inner_ratio) {
  cfg.validate();
  const int S = static_cast<int>(cfg.strides.size());
  HGO_CHECK(static_cast<int>(head_maps.size()) == S,
            "expected " << S << " head maps, got " << head_maps.size());
  const int rm = cfg.reg_max, nc = cfg.nc;
  const int N = head_maps[0]->n();
  HGO_CHECK(N >= 1, "empty batch");
  HGO_CHECK(gt_boxes.size() == static_cast<std::size_t>(N) && gt_classes.size() == gt_boxes.size(),
            "gt batch size mismatch");

  std::vector<FeatShape> shapes;
  for (int s = 0; s < S; ++s) {
    const Tensor& m = head_maps[s];
    HGO_CHECK(m->rank() == 4 && m->n() == N && m->c() == 4 * rm + nc,
              "head map " << s << " has shape " << shape_str(m->shape));
    shapes.push_back({m->c(), m->h(), m->w()});
  }
  Anchors anchors = make_anchors(shapes, cfg.strides);
  const std::size_t A = anchors.count();

  std::vector<std::size_t> scale_offset(static_cast<std::size_t>(S), 0);
  for (int s = 1; s < S; ++s)
    scale_offset[static_cast<std::size_t>(s)] =
        scale_offset[static_cast<std::size_t>(s - 1)] +
        static_cast<std::size_t>(shapes[static_cast<std::size_t>(s - 1)].h) *
            shapes[static_cast<std::size_t>(s - 1)].w;

  struct Pos {
    int n, scale, y, x, gt;
    float score;
  };
  std::vector<Pos> positives;
  double score_mass = 0.0;

  for (int n = 0; n < N; ++n) {
    for (const auto& b : gt_boxes[static_cast<std::size_t>(n)]) b.validate();
    for (int c : gt_classes[static_cast<std::size_t>(n)])
      HGO_CHECK(c >= 0 && c < nc, "gt class " << c << " outside [0, " << nc << ")");
    std::vector<float> decoded;
    decoded.reserve(4 * A);
    for (int s = 0; s < S; ++s) {
      auto db = decode_boxes(*head_maps[static_cast<std::size_t>(s)], rm,
                             cfg.strides[static_cast<std::size_t>(s)], n);
      decoded.insert(decoded.end(), db.begin(), db.end());
    }
    Assignment asn = assign_targets(anchors, gt_boxes[static_cast<std::size_t>(n)],
                                    gt_classes[static_cast<std::size_t>(n)], decoded);
    for (std::size_t a = 0; a < A; ++a) {
      if (asn.gt_index[a] < 0) continue;
      int s = S - 1;
      while (s > 0 && a < scale_offset[static_cast<std::size_t>(s)]) --s;
      const std::size_t cell = a - scale_offset[static_cast<std::size_t>(s)];
      const int W = shapes[static_cast<std::size_t>(s)].w;
      positives.push_back({n, s, static_cast<int>(cell) / W, static_cast<int>(cell) % W,
                           asn.gt_index[a], asn.score[a]});
      score_mass += asn.score[a];
    }
  }
  const int num_pos = static_cast<int>(positives.size());

  // split the maps once; reg logits feed dfl + box, cls logits feed bce
  std::vector<Tensor> reg_part(static_cast<std::size_t>(S)), cls_part(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) {
    auto parts = ops::split_channels(head_maps[static_cast<std::size_t>(s)], {4 * rm, nc});
    reg_part[static_cast<std::size_t>(s)] = parts[0];
    cls_part[static_cast<std::size_t>(s)] = parts[1];
  }

  // cls: BCE over everything, positives targeted at their decoded IoU
  Tensor cls_sum;
  for (int s = 0; s < S; ++s) {
    const int H = shapes[static_cast<std::size_t>(s)].h, W = shapes[static_cast<std::size_t>(s)].w;
    std::vector<float> targets(static_cast<std::size_t>(N) * nc * H * W, 0.0f);
    std::vector<float> ones(targets.size(), 1.0f);
    for (const auto& p : positives) {
      if (p.scale != s) continue;
      const int cls = gt_classes[static_cast<std::size_t>(p.n)][static_cast<std::size_t>(p.gt)];
      targets[((static_cast<std::size_t>(p.n) * nc + cls) * H + p.y) * W + p.x] = p.score;
    }
    Tensor term = ops::bce_with_logits_sum(cls_part[static_cast<std::size_t>(s)], targets, ones);
    cls_sum = cls_sum ? ops::add(cls_sum, term) : term;
  }
  Tensor cls_term = ops::mul_const(cls_sum, static_cast<float>(1.0 / std::max(1.0, score_mass)));

  // dfl: gt distances in stride units against positive cells
  Tensor dfl_term;
  if (num_pos > 0) {
    const float pw = 1.0f / (4.0f * static_cast<float>(num_pos));
    for (int s = 0; s < S; ++s) {
      const int H = shapes[static_cast<std::size_t>(s)].h,
                W = shapes[static_cast<std::size_t>(s)].w;
      const float stride = static_cast<float>(cfg.strides[static_cast<std::size_t>(s)]);
      std::vector<float> dist(static_cast<std::size_t>(N) * 4 * H * W, 0.0f);
      std::vector<float> wts(dist.size(), 0.0f);
      bool any = false;
      for (const auto& p : positives) {
        if (p.scale != s) continue;
        any = true;
        const Box& gt = gt_boxes[static_cast<std::size_t>(p.n)][static_cast<std::size_t>(p.gt)];
        const float cx = (static_cast<float>(p.x) + 0.5f) * stride;
        const float cy = (static_cast<float>(p.y) + 0.5f) * stride;
        const float d[4] = {(cx - gt.x1) / stride, (cy - gt.y1) / stride, (gt.x2 - cx) / stride,
                            (gt.y2 - cy) / stride};
        for (int side = 0; side < 4; ++side) {
          const std::size_t i = ((static_cast<std::size_t>(p.n) * 4 + side) * H + p.y) * W + p.x;
          dist[i] = d[side];
          wts[i] = pw;
        }
      }
      if (!any) continue;
      Tensor term = ops::dfl_loss_map(reg_part[static_cast<std::size_t>(s)], dist, wts, rm);
      dfl_term = dfl_term ? ops::add(dfl_term, term) : term;
    }
  }
  if (!dfl_term) dfl_term = scalar_tensor<float>(0.0f);

  // box: mean over positives of (1 - metric) through the dfl decode
  Tensor box_term;
  if (num_pos > 0) {
    std::vector<Tensor> expect(static_cast<std::size_t>(S));  // built on demand
    Tensor box_sum;
    for (const auto& p : positives) {
      const std::size_t s = static_cast<std::size_t>(p.scale);
      if (!expect[s]) expect[s] = ops::dfl_expectation(reg_part[s], rm);
      const int H = shapes[s].h, W = shapes[s].w;
      const float stride = static_cast<float>(cfg.strides[s]);
      const float cx = (static_cast<float>(p.x) + 0.5f) * stride;
      const float cy = (static_cast<float>(p.y) + 0.5f) * stride;
      auto side = [&](int k) {
        const std::int64_t idx =
            ((static_cast<std::int64_t>(p.n) * 4 + k) * H + p.y) * W + p.x;
        return ops::select(expect[s], idx);
      };
      Tensor px1 = ops::add_const(ops::mul_const(side(0), -stride), cx);
      Tensor py1 = ops::add_const(ops::mul_const(side(1), -stride), cy);
      Tensor px2 = ops::add_const(ops::mul_const(side(2), stride), cx);
      Tensor py2 = ops::add_const(ops::mul_const(side(3), stride), cy);
      Tensor pred = ops::stack_scalars<float>({px1, py1, px2, py2});
      const Box& gt = gt_boxes[static_cast<std::size_t>(p.n)][static_cast<std::size_t>(p.gt)];
      Tensor gtt = make_tensor<float>({4}, {gt.x1, gt.y1, gt.x2, gt.y2});
      Tensor metric = box_metric_graph(kind, pred, gtt, static_cast<float>(image_w),
                                       static_cast<float>(image_h),
                                       static_cast<float>(inner_ratio));
      Tensor one_minus = ops::sub(scalar_tensor<float>(1.0f), metric);
      box_sum = box_sum ? ops::add(box_sum, one_minus) : one_minus;
    }
    box_term = ops::mul_const(box_sum, 1.0f / static_cast<float>(num_pos));
  } else {
    box_term = scalar_tensor<float>(0.0f);
  }

  LossBundle out;
  out.weights = weights;
  out.num_pos = num_pos;
  out.box_loss = box_term->data[0];
  out.dfl_loss = dfl_term->data[0];
  out.cls_loss = cls_term->data[0];
  out.total = ops::add(ops::add(ops::mul_const(box_term, weights.box),
                                ops::mul_const(dfl_term, weights.dfl)),
                       ops::mul_const(cls_term, weights.cls));
  return out;
}

template TensorPtr<float> iou_graph<float>(const TensorPtr<float>&, const TensorPtr<float>&);
template TensorPtr<double> iou_graph<double>(const TensorPtr<double>&, const TensorPtr<double>&);
template TensorPtr<float> diou_graph<float>(const TensorPtr<float>&, const TensorPtr<float>&);
template TensorPtr<double> diou_graph<double>(const TensorPtr<double>&, const TensorPtr<double>&);
template TensorPtr<float> ciou_graph<float>(const TensorPtr<float>&, const TensorPtr<float>&);
template TensorPtr<double> ciou_graph<double>(const TensorPtr<double>&, const TensorPtr<double>&);
template TensorPtr<float> mpdiou_graph<float>(const TensorPtr<float>&, const TensorPtr<float>&,
                                              float, float);
template TensorPtr<double> mpdiou_graph<double>(const TensorPtr<double>&,
                                                const TensorPtr<double>&, double, double);
template TensorPtr<float> inner_ciou_graph<float>(const TensorPtr<float>&,
                                                  const TensorPtr<float>&, float);
template TensorPtr<double> inner_ciou_graph<double>(const TensorPtr<double>&,
                                                    const TensorPtr<double>&, double);
template TensorPtr<float> box_metric_graph<float>(BoxLossKind, const TensorPtr<float>&,
                                                  const TensorPtr<float>&, float, float, float);
template TensorPtr<double> box_metric_graph<double>(BoxLossKind, const TensorPtr<double>&,
                                                    const TensorPtr<double>&, double, double,
                                                    double);
template TensorPtr<float> dfl_loss<float>(const TensorPtr<float>&, float);
template TensorPtr<double> dfl_loss<double>(const TensorPtr<double>&, double);

}  // namespace hgo
