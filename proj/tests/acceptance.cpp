// Acceptance gate: runs the eleven release criteria end to end and prints one
// PASS/FAIL line each. Exits nonzero if anything fails. Oracles come from
// testutil, which is written against first principles on purpose.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hgo/cost.hpp"
#include "hgo/graph.hpp"
#include "hgo/losses.hpp"
#include "hgo/metrics.hpp"
#include "hgo/pipeline.hpp"
#include "testutil.hpp"

using namespace hgo;
namespace fs = std::filesystem;

namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

ModelConfig model_at(const std::string& backbone, int nc, int input) {
  ModelConfig mc;
  mc.scale = "n";
  mc.backbone = backbone;
  mc.num_classes = nc;
  mc.input_size = input;
  return mc;
}

// ---------------------------------------------------------------- criterion 1

bool eq5_ratio(std::string& detail) {
  Rng rng(101);
  for (int i = 0; i < 200; ++i) {
    const int s = rng.uniform_int(2, 6);
    const int d = 2 * rng.uniform_int(1, 3) + 1;  // dense kernel k == cheap kernel d
    const long long c = rng.uniform_int(3, 384);
    const int out = s * rng.uniform_int(1, 48);
    GhostSpec spec{static_cast<int>(c), out, s, d, 1};
    const Ratio got = ghost_speedup_exact(spec, d);
    const Ratio want(s * c, s + c - 1);
    if (got != want) {
      std::ostringstream os;
      os << "spec c=" << c << " s=" << s << " d=" << d << " gave " << got.numerator() << "/"
         << got.denominator();
      detail = os.str();
      return false;
    }
  }
  for (int s = 2; s <= 6; ++s) {
    GhostSpec spec{4096, s * 64, s, 3, 1};
    const Ratio r = ghost_speedup_exact(spec, 3);
    const double v = boost::rational_cast<double>(r);
    if (std::abs(v - s) > 0.01 * s) {
      detail = "large-c limit off at s=" + std::to_string(s);
      return false;
    }
  }
  detail = "200 exact ratios, large-c limit within 1%";
  return true;
}

// ---------------------------------------------------------------- criterion 2

bool cost_oracle(std::string& detail) {
  Rng rng(202);
  int checked = 0;
  for (int i = 0; i < 50; ++i) {
    const int h = rng.uniform_int(3, 9);
    const int w = rng.uniform_int(3, 9);
    long long analytic = 0, instrumented = 0;
    std::string kind;
    switch (i % 6) {
      case 0: {
        kind = "conv2d";
        ConvSpec spec;
        spec.in_channels = rng.uniform_int(1, 12);
        spec.out_channels = rng.uniform_int(1, 12);
        spec.kernel = rng.uniform_int(1, 4);
        spec.stride = rng.uniform_int(1, 2);
        spec.padding = rng.uniform_int(0, spec.kernel - 1);
        spec.groups = 1;
        if (rng.coin() && spec.in_channels % 2 == 0 && spec.out_channels % 2 == 0)
          spec.groups = 2;
        spec.bias = rng.coin();
        if (h + 2 * spec.padding < spec.kernel) break;
        FeatShape in{spec.in_channels, h, w};
        analytic = conv_macs(spec, spec.out_extent(h), spec.out_extent(w));
        instrumented = tu::ref_conv_muls(in, spec);
        ++checked;
        break;
      }
      case 1: {
        kind = "ghost";
        const int s = rng.uniform_int(2, 4);
        GhostSpec spec{rng.uniform_int(1, 10), s * rng.uniform_int(1, 6), s,
                       2 * rng.uniform_int(0, 2) + 1, 2 * rng.uniform_int(0, 1) + 1};
        FeatShape in{spec.in_channels, h, w};
        GhostConv block("g", spec);
        analytic = cost_of_block(block, in).total_macs();
        instrumented = tu::ref_ghost_muls(in, spec);
        ++checked;
        break;
      }
      case 2: {
        kind = "pconv";
        const int c = rng.uniform_int(4, 16);
        const double r = rng.uniform(0.2, 1.0);
        const int k = 2 * rng.uniform_int(0, 2) + 1;
        PConv block("p", c, r, k);
        FeatShape in{c, h, w};
        analytic = cost_of_block(block, in).total_macs();
        instrumented = tu::ref_pconv_muls(in, c, r, k);
        ++checked;
        break;
      }
      case 3: {
        kind = "hg_block";
        HGBlockSpec spec;
        spec.in_channels = rng.uniform_int(2, 8);
        spec.mid_channels = 2 * rng.uniform_int(1, 4);
        spec.out_channels = 2 * rng.uniform_int(2, 8);
        spec.layer_num = rng.uniform_int(2, 4);
        spec.kernel = 3;
        spec.use_ghost = rng.coin();
        spec.shortcut = spec.in_channels == spec.out_channels;
        HGBlock block("h", spec);
        FeatShape in{spec.in_channels, h, w};
        analytic = cost_of_block(block, in).total_macs();
        instrumented = tu::ref_hgblock_muls(in, spec);
        ++checked;
        break;
      }
      case 4: {
        kind = "sppf";
        const int c = 2 * rng.uniform_int(1, 8);
        SPPF block("s", c);
        FeatShape in{c, h, w};
        analytic = cost_of_block(block, in).total_macs();
        instrumented = tu::ref_sppf_muls(in, c);
        ++checked;
        break;
      }
      default: {
        kind = "c2f";
        const int ic = rng.uniform_int(2, 10);
        const int oc = 2 * rng.uniform_int(1, 6);
        const int n = rng.uniform_int(1, 3);
        C2f block("c", ic, oc, n, rng.coin());
        FeatShape in{ic, h, w};
        analytic = cost_of_block(block, in).total_macs();
        instrumented = tu::ref_c2f_muls(in, ic, oc, n);
        ++checked;
        break;
      }
    }
    if (analytic != instrumented) {
      std::ostringstream os;
      os << kind << " spec " << i << ": analytic " << analytic << " != counted " << instrumented;
      detail = os.str();
      return false;
    }
  }
  detail = std::to_string(checked) + " specs, analytic == counted multiplies";
  return true;
}

// ------------------------------------------------------------- criteria 3-6

bool table1_gflops(std::string& detail) {
  const auto base = build_model(model_at("c2f-baseline", 4, 640), 1).cost();
  const auto hgo = build_model(model_at("hgnetv2", 4, 640), 1).cost();
  const double bg = base.gflops(), hg = hgo.gflops();
  const double drop = 1.0 - hg / bg;
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << "baseline " << bg << " GF, hgo " << hg << " GF, drop " << 100 * drop << "%";
  detail = os.str();
  return std::abs(bg - 8.9) <= 0.10 * 8.9 && std::abs(hg - 4.3) <= 0.15 * 4.3 && drop >= 0.45;
}

bool head_share(std::string& detail) {
  ModelGraph g = build_model(model_at("c2f-baseline", 80, 640), 1);
  std::int64_t head = 0, total = 0;
  for (const auto& p : g.prims()) {
    const auto c = cost_of_prims({p});
    total += c.total_macs();
    if (p.name.rfind("head.", 0) == 0) head += c.total_macs();
  }
  const double share = static_cast<double>(head) / static_cast<double>(total);
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << "decoupled head " << 100 * share << "% of baseline-n MACs";
  detail = os.str();
  return std::abs(share - 0.414) <= 0.05;
}

bool table1_sizes(std::string& detail) {
  const std::string bp = "/tmp/hgo_accept_base.hgow", hp = "/tmp/hgo_accept_hgo.hgow";
  {
    ModelGraph g = build_model(model_at("c2f-baseline", 4, 640), 1);
    save_weights(g, bp, true);
  }
  {
    ModelGraph g = build_model(model_at("hgnetv2", 4, 640), 1);
    save_weights(g, hp, true);
  }
  const double bmb = static_cast<double>(fs::file_size(bp)) / 1e6;
  const double hmb = static_cast<double>(fs::file_size(hp)) / 1e6;
  fs::remove(bp);
  fs::remove(hp);
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "f16 files: baseline " << bmb << " MB, hgo " << hmb << " MB";
  detail = os.str();
  return std::abs(bmb - 6.2) <= 0.62 && std::abs(hmb - 4.6) <= 0.46;
}

bool table3_ordering(std::string& detail) {
  HeadConfig hc;
  hc.channels = {64, 128, 256};  // hgo-n widths into the head
  hc.strides = {8, 16, 32};
  hc.nc = 4;
  std::vector<FeatShape> ins = {{64, 80, 80}, {128, 40, 40}, {256, 20, 20}};
  auto macs_of = [&](HeadLayer l1, HeadLayer l2) {
    SharedHeadOptions opt;
    opt.layer1 = l1;
    opt.layer2 = l2;
    SharedHead head(hc, opt);
    std::vector<PrimOp> prims;
    head.describe(ins, prims);
    return cost_of_prims(prims).total_macs();
  };
  const auto pp = macs_of(HeadLayer::PConv, HeadLayer::PConv);
  const auto cp = macs_of(HeadLayer::Conv, HeadLayer::PConv);
  const auto pc = macs_of(HeadLayer::PConv, HeadLayer::Conv);
  const auto cc = macs_of(HeadLayer::Conv, HeadLayer::Conv);
  std::ostringstream os;
  os << "MACs pp " << pp << " | cp " << cp << " | pc " << pc << " | cc " << cc;
  detail = os.str();
  return pp < cp && cp <= pc && pc <= cc;
}

// ---------------------------------------------------------------- criterion 7

bool gradient_suite(std::string& detail) {
  double worst = 0;
  std::string worst_name;
  int cases = 0;
  for (const auto& fc : tu::fd_cases()) {
    Rng rng(1000 + static_cast<std::uint64_t>(cases) * 17);
    for (int rep = 0; rep < 10; ++rep) {
      const double err = fc.run(rng);
      if (err > worst) {
        worst = err;
        worst_name = fc.name;
      }
      if (err >= 1e-4) {
        std::ostringstream os;
        os << fc.name << " rep " << rep << " rel err " << err;
        detail = os.str();
        return false;
      }
    }
    ++cases;
  }
  std::ostringstream os;
  os << cases << " ops x 10 points, worst rel err " << worst << " (" << worst_name << ")";
  detail = os.str();
  return true;
}

// ---------------------------------------------------------------- criterion 8

bool loss_identities(std::string& detail) {
  const Box same{3, 4, 11, 9};
  auto m = iou_metrics(same, same, 64, 64);
  if (std::abs(m.iou - 1) > 1e-12 || std::abs(m.diou - 1) > 1e-12 ||
      std::abs(m.ciou - 1) > 1e-12 || std::abs(m.mpdiou - 1) > 1e-12 ||
      std::abs(m.inner_ciou - 1) > 1e-12) {
    detail = "coincident boxes not at metric 1";
    return false;
  }

  Rng rng(808);
  for (int i = 0; i < 10000; ++i) {
    const Box a = tu::random_box(rng, 24.0f);
    const Box b = tu::random_box(rng, 24.0f);
    auto v = iou_metrics(a, b, 24, 24);
    if (v.degenerate) continue;
    if (v.mpdiou > v.iou + 1e-12 || v.diou > v.iou + 1e-12) {
      detail = "penalty inequality violated at pair " + std::to_string(i);
      return false;
    }
  }

  auto w = iou_metrics(Box{0, 0, 2, 2}, Box{1, 1, 3, 3}, 4, 4);
  if (std::abs(w.iou - 1.0 / 7) > 1e-12 || std::abs(w.diou - 2.0 / 63) > 1e-12 ||
      std::abs(w.mpdiou - 1.0 / 56) > 1e-12) {
    detail = "worked pair off";
    return false;
  }
  detail = "identities, 10000 pair inequalities, worked pair to 1e-12";
  return true;
}

// ---------------------------------------------------------------- criterion 9

bool metric_oracles(std::string& detail) {
  Rng rng(909);
  for (int inst = 0; inst < 100; ++inst) {
    std::vector<Detection> dets;
    std::vector<GtBox> gts;
    const int nd = rng.uniform_int(0, 14), ng = rng.uniform_int(0, 6);
    for (int i = 0; i < nd; ++i)
      dets.push_back({tu::random_box(rng, 20.0f), rng.uniform_int(0, 2), rng.uniform(0.05, 1.0)});
    for (int i = 0; i < ng; ++i)
      gts.push_back({tu::random_box(rng, 20.0f), rng.uniform_int(0, 2)});

    const double thr = rng.uniform(0.25, 0.7);
    const auto got = match_detections(dets, gts, thr);
    const auto want = tu::brute_match(dets, gts, thr);
    if (got.tp != want.tp || got.fn != want.fn) {
      detail = "match mismatch at instance " + std::to_string(inst);
      return false;
    }

    RunConfig cfg;
    cfg.nms_iou = rng.uniform(0.3, 0.7);
    cfg.max_detections = rng.uniform_int(3, 12);
    const auto kept = nms(dets, cfg);
    const auto bkept = tu::brute_nms(dets, cfg);
    if (kept.size() != bkept.size()) {
      detail = "nms size mismatch at instance " + std::to_string(inst);
      return false;
    }
    for (std::size_t i = 0; i < kept.size(); ++i)
      if (kept[i].class_id != bkept[i].class_id || kept[i].confidence != bkept[i].confidence ||
          kept[i].box.x1 != bkept[i].box.x1) {
        detail = "nms order mismatch at instance " + std::to_string(inst);
        return false;
      }
  }

  if (std::abs(average_precision({true, false, true}, 2) - 5.0 / 6.0) > 1e-12) {
    detail = "AP of (TP,FP,TP)/2GT not 5/6";
    return false;
  }

  Rng prng(910);
  std::vector<std::vector<Detection>> pdets(8);
  std::vector<std::vector<GtBox>> pgts(8);
  for (int i = 0; i < 8; ++i)
    for (int g = 0, ng = prng.uniform_int(1, 4); g < ng; ++g) {
      const Box b = tu::random_box(prng, 30.0f);
      const int cls = prng.uniform_int(0, 3);
      pgts[i].push_back({b, cls});
      pdets[i].push_back({b, cls, prng.uniform(0.3, 1.0)});
    }
  if (std::abs(map_summary(pdets, pgts, 4).map50 - 1.0) > 1e-9) {
    detail = "perfect detector below mAP 1.0";
    return false;
  }
  detail = "100 match + 100 nms instances, AP 5/6, perfect detector 1.0";
  return true;
}

// --------------------------------------------------------------- criterion 10

bool toy_training(std::string& detail) {
  const std::string dir = "/tmp/hgo_accept_ds";
  fs::remove_all(dir);
  generate_synth_dataset(dir, 80, 64, 7);
  const auto data = load_dataset(dir, "train");
  if (data.size() != 64) {
    detail = "train split is not 64 images";
    return false;
  }

  const ModelConfig mc = model_at("hgnetv2", 4, 64);
  double shipped_map = -1;
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);

  for (const auto kind : {BoxLossKind::Mpdiou, BoxLossKind::Diou, BoxLossKind::Ciou,
                          BoxLossKind::InnerCiou}) {
    ModelGraph g = build_model(mc, 11);
    TrainOptions opt;
    opt.box_loss = kind;
    std::vector<TrainRecord> recs;
    try {
      recs = train_toy(g, data, opt, 11);
    } catch (const std::exception& e) {
      detail = to_string(kind) + " diverged: " + e.what();
      return false;
    }
    std::vector<float> totals;
    for (const auto& r : recs) totals.push_back(r.total);
    const double head = tu::head_mean(totals, 20), tail = tu::tail_mean(totals, 20);
    os << to_string(kind) << " " << head << "->" << tail << "  ";
    if (!(tail <= 0.5 * head)) {
      detail = to_string(kind) + " smoothed loss only " + std::to_string(head) + " -> " +
               std::to_string(tail);
      return false;
    }

    if (kind == BoxLossKind::Mpdiou) {  // the shipped default gets the mAP gate
      RunConfig rc;
      rc.conf_threshold = 0.05;
      std::vector<std::vector<Detection>> dets;
      std::vector<std::vector<GtBox>> gts;
      for (const auto& s : data) {
        auto maps = g.forward(image_to_tensor(s.image), false);
        dets.push_back(decode_detections(maps, g.head_config(), rc));
        gts.push_back(s.boxes);
      }
      shipped_map = map_summary(dets, gts, 4).map50;
    }
  }
  fs::remove_all(dir);

  os.precision(3);
  os << "train mAP@0.5 " << shipped_map;
  detail = os.str();
  return shipped_map >= 0.8;
}

// --------------------------------------------------------------- criterion 11

bool determinism(std::string& detail) {
  auto file_bytes = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  };

  const ModelConfig mc = model_at("hgnetv2", 4, 64);
  const std::string p1 = "/tmp/hgo_accept_d1.hgow", p2 = "/tmp/hgo_accept_d2.hgow";

  // fresh builds from one seed serialize identically
  {
    ModelGraph g = build_model(mc, 23);
    save_weights(g, p1);
  }
  {
    ModelGraph g = build_model(mc, 23);
    save_weights(g, p2);
  }
  if (file_bytes(p1) != file_bytes(p2)) {
    detail = "same-seed builds serialize differently";
    return false;
  }

  // a short training run is reproducible too, including its detection lists
  Rng srng(31);
  std::vector<Sample> data;
  for (int i = 0; i < 8; ++i) {
    auto scene = synth_scene(64, srng);
    data.push_back({"s" + std::to_string(i), scene.image, scene.boxes});
  }
  TrainOptions opt;
  opt.steps = 10;
  opt.batch = 2;
  RunConfig rc;
  rc.conf_threshold = 0.01;

  std::vector<Detection> lists[2];
  for (int round = 0; round < 2; ++round) {
    ModelGraph g = build_model(mc, 11);
    train_toy(g, data, opt, 5);
    save_weights(g, round == 0 ? p1 : p2);
    auto maps = g.forward(image_to_tensor(data[0].image), false);
    lists[round] = decode_detections(maps, g.head_config(), rc);
  }
  if (file_bytes(p1) != file_bytes(p2)) {
    detail = "trained weight files differ between identical runs";
    return false;
  }
  if (lists[0].size() != lists[1].size()) {
    detail = "detection lists differ in length";
    return false;
  }
  for (std::size_t i = 0; i < lists[0].size(); ++i) {
    const auto& a = lists[0][i];
    const auto& b = lists[1][i];
    if (a.class_id != b.class_id || a.confidence != b.confidence || a.box.x1 != b.box.x1 ||
        a.box.y1 != b.box.y1 || a.box.x2 != b.box.x2 || a.box.y2 != b.box.y2) {
      detail = "detection lists differ at entry " + std::to_string(i);
      return false;
    }
  }

  // 32-bit save/load round trip is bit exact
  ModelGraph src = build_model(mc, 77);
  save_weights(src, p1);
  ModelGraph dst = build_model(mc, 1);
  load_weights(dst, p1);
  auto ps = src.params(), pd = dst.params();
  if (ps.size() != pd.size()) {
    detail = "param census changed across round trip";
    return false;
  }
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (std::size_t j = 0; j < ps[i].tensor->data.size(); ++j)
      if (ps[i].tensor->data[j] != pd[i].tensor->data[j]) {
        detail = "round-trip value drift in " + ps[i].name;
        return false;
      }
  fs::remove(p1);
  fs::remove(p2);
  detail = "builds, training runs and detection lists reproduce; round trip bit-exact";
  return true;
}

struct Criterion {
  int id;
  const char* label;
  bool (*fn)(std::string&);
  double budget_s;  // 0: no hard budget
};

}  // namespace

int main() {
  const Criterion table[] = {
      {1, "eq-5 speedup ratio", eq5_ratio, 1.0},
      {2, "cost model vs counted multiplies", cost_oracle, 60.0},
      {3, "table-1 gflops", table1_gflops, 5.0},
      {4, "decoupled head share", head_share, 0.0},
      {5, "table-1 f16 file sizes", table1_sizes, 0.0},
      {6, "table-3 stack ordering", table3_ordering, 0.0},
      {7, "finite-difference gradient suite", gradient_suite, 120.0},
      {8, "box metric identities", loss_identities, 0.0},
      {9, "matcher/nms/ap oracles", metric_oracles, 0.0},
      {10, "toy training convergence", toy_training, 0.0},
      {11, "determinism and round trip", determinism, 0.0},
  };

  int failures = 0;
  for (const auto& c : table) {
    const double t0 = now_s();
    std::string detail;
    bool ok = false;
    try {
      ok = c.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("threw: ") + e.what();
    }
    const double dt = now_s() - t0;
    if (ok && c.budget_s > 0 && dt > c.budget_s) {
      ok = false;
      detail += " [over " + std::to_string(c.budget_s) + "s budget]";
    }
    std::printf("[%s] criterion %2d  %-36s %s (%.1fs)\n", ok ? "PASS" : "FAIL", c.id, c.label,
                detail.c_str(), dt);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
