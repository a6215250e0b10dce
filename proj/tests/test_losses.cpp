#include <cmath>
#include <vector>

#include "doctest.h"
#include "hgo/losses.hpp"
#include "testutil.hpp"

using namespace hgo;

namespace {

TensorPtr<double> box_tensor(const Box& b) {
  auto t = make_tensor<double>({4});
  t->data = {b.x1, b.y1, b.x2, b.y2};
  return t;
}

double graph_value(BoxLossKind kind, const Box& a, const Box& b, double w = 64, double h = 64) {
  auto out = box_metric_graph<double>(kind, box_tensor(a), box_tensor(b), w, h, 0.75);
  return out->data[0];
}

}  // namespace

TEST_CASE("box validation and helpers") {
  Box b{1, 2, 4, 6};
  CHECK(b.w() == doctest::Approx(3));
  CHECK(b.h() == doctest::Approx(4));
  CHECK(b.area() == doctest::Approx(12));
  CHECK_NOTHROW(b.validate());
  CHECK_THROWS(Box{2, 0, 1, 1}.validate());
  CHECK_THROWS(Box{0, 3, 1, 1}.validate());
}

TEST_CASE("loss kind names round-trip") {
  for (auto k : {BoxLossKind::Diou, BoxLossKind::Ciou, BoxLossKind::Mpdiou,
                 BoxLossKind::InnerCiou})
    CHECK(box_loss_from_string(to_string(k)) == k);
  CHECK_THROWS(box_loss_from_string("giou"));
}

TEST_CASE("coincident boxes score perfectly") {
  const Box b{3, 4, 10, 12};
  auto m = iou_metrics(b, b, 64, 64);
  CHECK_FALSE(m.degenerate);
  CHECK(m.iou == doctest::Approx(1.0));
  CHECK(m.diou == doctest::Approx(1.0));
  CHECK(m.ciou == doctest::Approx(1.0));
  CHECK(m.mpdiou == doctest::Approx(1.0));
  CHECK(m.inner_ciou == doctest::Approx(1.0));

  for (auto k : {BoxLossKind::Diou, BoxLossKind::Ciou, BoxLossKind::Mpdiou,
                 BoxLossKind::InnerCiou})
    CHECK(1.0 - graph_value(k, b, b) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("zero-area gt is flagged degenerate") {
  auto m = iou_metrics(Box{0, 0, 2, 2}, Box{1, 1, 1, 3}, 64, 64);
  CHECK(m.degenerate);
  CHECK(m.iou == 0.0);
  CHECK(m.mpdiou == 0.0);
}

TEST_CASE("worked unit-overlap pair") {
  const Box a{0, 0, 2, 2}, b{1, 1, 3, 3};

  auto m = iou_metrics(a, b, 4, 4);
  CHECK(m.iou == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  // center distance^2 = 2, enclosing diagonal^2 = 18
  CHECK(m.diou == doctest::Approx(1.0 / 7.0 - 2.0 / 18.0).epsilon(1e-12));
  CHECK(m.diou == doctest::Approx(2.0 / 63.0).epsilon(1e-12));
  // corner distances^2 = 2 and 2, normalizer w^2 + h^2 = 32
  CHECK(m.mpdiou == doctest::Approx(1.0 / 7.0 - 2.0 / 32.0 - 2.0 / 32.0).epsilon(1e-12));
  CHECK(m.mpdiou == doctest::Approx(1.0 / 56.0).epsilon(1e-12));
  // equal aspect ratios: the ciou shape term vanishes
  CHECK(m.ciou == doctest::Approx(m.diou).epsilon(1e-9));

  // taped graphs agree with the data-level pass
  CHECK(graph_value(BoxLossKind::Diou, a, b) == doctest::Approx(m.diou).epsilon(1e-7));
  CHECK(graph_value(BoxLossKind::Mpdiou, a, b, 4, 4) == doctest::Approx(m.mpdiou).epsilon(1e-7));
}

TEST_CASE("metric inequalities on random pairs") {
  Rng rng(77);
  int disjoint = 0;
  for (int i = 0; i < 10000; ++i) {
    Box a = tu::random_box(rng, 32.0f);
    Box b = tu::random_box(rng, 32.0f);
    auto m = iou_metrics(a, b, 32, 32);
    if (m.degenerate) continue;
    CHECK(m.iou >= 0.0);
    CHECK(m.iou <= 1.0 + 1e-9);
    CHECK(m.diou <= m.iou + 1e-9);
    CHECK(m.ciou <= m.diou + 1e-9);
    CHECK(m.mpdiou <= m.iou + 1e-9);
    if (m.iou == 0.0) ++disjoint;

    // symmetry of plain iou
    auto rev = iou_metrics(b, a, 32, 32);
    CHECK(rev.iou == doctest::Approx(m.iou).epsilon(1e-12));
  }
  CHECK(disjoint > 100);  // the sampler actually produces separated pairs
}

TEST_CASE("inner variant tracks full ciou at ratio one") {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    auto [a, b] = tu::random_box_pair(rng);
    auto full = ciou_graph<double>(box_tensor(a), box_tensor(b));
    auto inner = inner_ciou_graph<double>(box_tensor(a), box_tensor(b), 1.0);
    CHECK(inner->data[0] == doctest::Approx(full->data[0]).epsilon(1e-9));
  }
}

TEST_CASE("dfl split between neighbouring bins") {
  auto logits = make_tensor<double>({8});
  auto loss = dfl_loss<double>(logits, 3.25);
  // uniform distribution: every bin carries probability 1/8
  CHECK(loss->data[0] == doctest::Approx(std::log(8.0)).epsilon(1e-9));

  auto peaked = make_tensor<double>({8});
  peaked->data[3] = 60.0;
  CHECK(dfl_loss<double>(peaked, 3.0)->data[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(dfl_loss<double>(peaked, 3.5)->data[0] > 1.0);
}

TEST_CASE("assigner matches the exhaustive oracle") {
  Rng rng(123);
  for (int inst = 0; inst < 60; ++inst) {
    const int gw = rng.uniform_int(2, 5);
    Anchors anchors = make_anchors({{8, gw, gw}}, {8});
    const float extent = 8.0f * gw;

    const int ng = rng.uniform_int(1, 4);
    std::vector<Box> gts;
    std::vector<int> cls;
    for (int g = 0; g < ng; ++g) {
      gts.push_back(tu::random_box(rng, extent, 3.0f));
      cls.push_back(rng.uniform_int(0, 3));
    }

    std::vector<float> decoded;
    if (inst % 3 != 0) {  // every third instance runs the no-prediction path
      for (std::size_t a = 0; a < anchors.count(); ++a) {
        Box d = tu::random_box(rng, extent, 2.0f);
        decoded.insert(decoded.end(), {d.x1, d.y1, d.x2, d.y2});
      }
    }

    const int topk = rng.uniform_int(1, 12);
    Assignment got = assign_targets(anchors, gts, cls, decoded, topk);
    Assignment want = tu::brute_assign(anchors, gts, decoded, topk);

    REQUIRE(got.gt_index.size() == anchors.count());
    CHECK(got.num_pos == want.num_pos);
    for (std::size_t a = 0; a < anchors.count(); ++a) {
      INFO("instance " << inst << " anchor " << a);
      CHECK(got.gt_index[a] == want.gt_index[a]);
      CHECK(got.score[a] == doctest::Approx(want.score[a]).epsilon(1e-6));
    }
  }
}

TEST_CASE("assigner edge cases") {
  Anchors anchors = make_anchors({{8, 2, 2}}, {8});  // centers 4 and 12

  SUBCASE("gt containing no center stays unassigned") {
    Assignment a = assign_targets(anchors, {Box{5, 5, 11, 11}}, {0}, {}, 10);
    CHECK(a.num_pos == 0);
    for (int gi : a.gt_index) CHECK(gi == -1);
  }

  SUBCASE("contested anchor goes to the higher metric") {
    // both gts contain every center; perfect decoded boxes for gt 1 only
    std::vector<Box> gts = {Box{0, 0, 16, 16}, Box{2, 2, 14, 14}};
    std::vector<float> decoded;
    for (int i = 0; i < 4; ++i) decoded.insert(decoded.end(), {2, 2, 14, 14});
    Assignment a = assign_targets(anchors, gts, {0, 1}, decoded, 10);
    CHECK(a.num_pos == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(a.gt_index[i] == 1);
      CHECK(a.score[i] == doctest::Approx(1.0f));
    }
  }

  SUBCASE("topk one keeps only the best candidate per gt") {
    std::vector<float> decoded = {
        0, 0, 15, 16,  // near-perfect for the big gt
        0, 0, 4,  4,   //
        0, 0, 4,  4,   //
        0, 0, 4,  4,
    };
    Assignment a = assign_targets(anchors, {Box{0, 0, 16, 16}}, {0}, decoded, 1);
    CHECK(a.num_pos == 1);
    CHECK(a.gt_index[0] == 0);
    CHECK(a.gt_index[1] == -1);
  }

  SUBCASE("no gts means all background") {
    Assignment a = assign_targets(anchors, {}, {}, {}, 10);
    CHECK(a.num_pos == 0);
    for (int gi : a.gt_index) CHECK(gi == -1);
  }
}

TEST_CASE("detection loss composition") {
  HeadConfig cfg;
  cfg.channels = {8, 8, 8};
  cfg.strides = {8, 16, 32};
  cfg.nc = 4;
  cfg.reg_max = 8;

  const int S = 32;
  Rng rng(9);
  std::vector<Tensor> maps;
  for (int stride : cfg.strides) {
    const int g = S / stride;
    maps.push_back(tu::rand_tensor({1, 4 * cfg.reg_max + cfg.nc, g, g}, rng, -0.5f, 0.5f));
  }

  SUBCASE("no positives leaves box and dfl at zero") {
    LossBundle b = detection_loss(maps, {{}}, {{}}, cfg, S, S, BoxLossKind::Ciou);
    CHECK(b.num_pos == 0);
    CHECK(b.box_loss == 0.0f);
    CHECK(b.dfl_loss == 0.0f);
    CHECK(b.cls_loss > 0.0f);
    CHECK(std::isfinite(b.total->data[0]));
  }

  SUBCASE("weighted total adds up") {
    std::vector<std::vector<Box>> gts = {{Box{4, 4, 28, 28}}};
    std::vector<std::vector<int>> cls = {{2}};
    LossWeights w;
    w.box = 2.0f;
    w.dfl = 3.0f;
    w.cls = 5.0f;
    LossBundle b = detection_loss(maps, gts, cls, cfg, S, S, BoxLossKind::Mpdiou, w);
    CHECK(b.num_pos > 0);
    const double expect = 2.0 * b.box_loss + 3.0 * b.dfl_loss + 5.0 * b.cls_loss;
    CHECK(b.total->data[0] == doctest::Approx(expect).epsilon(1e-4));
  }

  SUBCASE("every loss kind is finite and backpropagates") {
    std::vector<std::vector<Box>> gts = {{Box{2, 2, 20, 20}, Box{16, 10, 30, 30}}};
    std::vector<std::vector<int>> cls = {{0, 3}};
    for (auto kind : {BoxLossKind::Diou, BoxLossKind::Ciou, BoxLossKind::Mpdiou,
                      BoxLossKind::InnerCiou}) {
      for (auto& m : maps) {
        m->requires_grad = true;
        m->grad.assign(m->data.size(), 0.0f);
      }
      LossBundle b = detection_loss(maps, gts, cls, cfg, S, S, kind);
      CHECK(std::isfinite(b.total->data[0]));
      CHECK(b.total->data[0] > 0.0f);
      backward(b.total);
      double gsum = 0;
      for (auto& m : maps)
        for (float g : m->grad) gsum += std::abs(g);
      CHECK(gsum > 0.0);
      for (auto& m : maps) m->requires_grad = false;
    }
  }

  SUBCASE("batch of two pools both images") {
    std::vector<Tensor> wide;
    for (int stride : cfg.strides) {
      const int g = S / stride;
      wide.push_back(tu::rand_tensor({2, 4 * cfg.reg_max + cfg.nc, g, g}, rng, -0.5f, 0.5f));
    }
    std::vector<std::vector<Box>> gts = {{Box{4, 4, 28, 28}}, {}};
    std::vector<std::vector<int>> cls = {{1}, {}};
    LossBundle b = detection_loss(wide, gts, cls, cfg, S, S, BoxLossKind::Ciou);
    CHECK(b.num_pos > 0);
    CHECK(std::isfinite(b.total->data[0]));
  }
}
