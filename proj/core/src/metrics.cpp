#include "hgo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hgo {

double box_iou(const Box& a, const Box& b) {
  const double ix =
      std::max(0.0, static_cast<double>(std::min(a.x2, b.x2)) - std::max(a.x1, b.x1));
  const double iy =
      std::max(0.0, static_cast<double>(std::min(a.y2, b.y2)) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = static_cast<double>(a.area()) + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<GtBox>& gts,
                             double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });

  MatchResult res;
  res.tp.assign(dets.size(), false);
  std::vector<bool> used(gts.size(), false);
  for (std::size_t oi : order) {
    const Detection& d = dets[oi];
    double best = -1.0;
    int best_gt = -1;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (used[gi] || gts[gi].class_id != d.class_id) continue;
      const double iou = box_iou(d.box, gts[gi].box);
      if (iou >= iou_threshold && iou > best) {
        best = iou;
        best_gt = static_cast<int>(gi);
      }
    }
    if (best_gt >= 0) {
      used[static_cast<std::size_t>(best_gt)] = true;
      res.tp[oi] = true;
    }
  }
  res.fn = static_cast<int>(std::count(used.begin(), used.end(), false));
  return res;
}

double average_precision(const std::vector<bool>& tp_by_conf, int num_gt) {
  if (num_gt <= 0)
    return tp_by_conf.empty() ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  if (tp_by_conf.empty()) return 0.0;

  const std::size_t n = tp_by_conf.size();
  std::vector<double> prec(n), rec(n);
  int tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (tp_by_conf[i]) ++tp;
    prec[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    rec[i] = static_cast<double>(tp) / num_gt;
  }
  for (std::size_t i = n - 1; i > 0; --i) prec[i - 1] = std::max(prec[i - 1], prec[i]);

  double ap = 0.0, prev_r = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (rec[i] > prev_r) {
      ap += (rec[i] - prev_r) * prec[i];
      prev_r = rec[i];
    }
  }
  return ap;
}

namespace {

struct Flagged {
  double conf;
  std::size_t image;
  std::size_t index;  // detection index within its image
  bool tp;
};

// AP for one class at one IoU threshold, matched per image then pooled.
double class_ap(const std::vector<std::vector<Detection>>& dets,
                const std::vector<std::vector<GtBox>>& gts, int cls, double thr, int num_gt) {
  std::vector<Flagged> pool;
  for (std::size_t img = 0; img < dets.size(); ++img) {
    std::vector<Detection> dc;
    std::vector<std::size_t> didx;
    for (std::size_t i = 0; i < dets[img].size(); ++i)
      if (dets[img][i].class_id == cls) {
        dc.push_back(dets[img][i]);
        didx.push_back(i);
      }
    std::vector<GtBox> gc;
    for (const auto& g : gts[img])
      if (g.class_id == cls) gc.push_back(g);
    const MatchResult m = match_detections(dc, gc, thr);
    for (std::size_t i = 0; i < dc.size(); ++i)
      pool.push_back({dc[i].confidence, img, didx[i], m.tp[i]});
  }
  std::stable_sort(pool.begin(), pool.end(), [](const Flagged& a, const Flagged& b) {
    if (a.conf != b.conf) return a.conf > b.conf;
    if (a.image != b.image) return a.image < b.image;
    return a.index < b.index;
  });
  std::vector<bool> flags(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) flags[i] = pool[i].tp;
  return average_precision(flags, num_gt);
}

}  // namespace

MapSummary map_summary(const std::vector<std::vector<Detection>>& dets,
                       const std::vector<std::vector<GtBox>>& gts, int num_classes,
                       double pr_iou, double pr_conf) {
  HGO_CHECK(dets.size() == gts.size(),
            "detection images " << dets.size() << " vs label images " << gts.size());
  HGO_CHECK(num_classes >= 1, "num_classes must be >= 1");
  HGO_CHECK(pr_iou > 0.0 && pr_iou < 1.0, "pr_iou " << pr_iou << " outside (0,1)");

  std::vector<int> gt_count(static_cast<std::size_t>(num_classes), 0);
  std::vector<int> det_count(static_cast<std::size_t>(num_classes), 0);
  for (const auto& img : gts)
    for (const auto& g : img) {
      HGO_CHECK(g.class_id >= 0 && g.class_id < num_classes,
                "gt class " << g.class_id << " outside [0," << num_classes << ")");
      ++gt_count[static_cast<std::size_t>(g.class_id)];
    }
  for (const auto& img : dets)
    for (const auto& d : img) {
      HGO_CHECK(d.class_id >= 0 && d.class_id < num_classes,
                "detection class " << d.class_id << " outside [0," << num_classes << ")");
      ++det_count[static_cast<std::size_t>(d.class_id)];
    }

  MapSummary out;
  out.per_class_ap50.assign(static_cast<std::size_t>(num_classes),
                            std::numeric_limits<double>::quiet_NaN());

  double sum5095 = 0.0;
  for (int t = 0; t < 10; ++t) {
    const double thr = 0.5 + 0.05 * t;
    double sum = 0.0;
    int counted = 0;
    for (int c = 0; c < num_classes; ++c) {
      const std::size_t cu = static_cast<std::size_t>(c);
      if (gt_count[cu] == 0 && det_count[cu] == 0) continue;
      const double ap = class_ap(dets, gts, c, thr, gt_count[cu]);
      if (t == 0) out.per_class_ap50[cu] = ap;
      sum += ap;
      ++counted;
    }
    const double map_t = counted > 0 ? sum / counted : 0.0;
    if (t == 0) out.map50 = map_t;
    sum5095 += map_t;
  }
  out.map5095 = sum5095 / 10.0;

  long tp = 0, fp = 0, total_gt = 0;
  for (const auto& img : gts) total_gt += static_cast<long>(img.size());
  for (std::size_t img = 0; img < dets.size(); ++img) {
    std::vector<Detection> kept;
    for (const auto& d : dets[img])
      if (d.confidence >= pr_conf) kept.push_back(d);
    const MatchResult m = match_detections(kept, gts[img], pr_iou);
    for (bool f : m.tp) f ? ++tp : ++fp;
  }
  out.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  out.recall = total_gt > 0 ? static_cast<double>(tp) / static_cast<double>(total_gt) : 0.0;
  return out;
}

}  // namespace hgo
