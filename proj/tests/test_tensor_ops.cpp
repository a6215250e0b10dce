#include <cmath>

#include "doctest.h"
#include "hgo/ops.hpp"
#include "testutil.hpp"

using namespace hgo;
namespace op = hgo::ops;

TEST_CASE("tensor basics") {
  auto t = make_tensor<float>({2, 3});
  CHECK(t->numel() == 6);
  CHECK(t->rank() == 2);
  CHECK_THROWS_AS(make_tensor<float>({2, 2}, std::vector<float>{1.f, 2.f, 3.f}), Error);

  auto x = make_tensor<float>({1, 2, 2, 2});
  x->at(0, 1, 1, 0) = 7.0f;
  CHECK(x->data[6] == 7.0f);
  CHECK(x->index(0, 1, 1, 1) == 7);
}

TEST_CASE("backward requires scalar and accumulates") {
  auto x = make_tensor<float>({3}, {1.f, 2.f, 3.f}, true);
  auto y = op::mul(x, x);
  CHECK_THROWS_AS(backward(y), Error);  // non-scalar

  auto s = op::sum_all(y);
  backward(s);
  CHECK(x->grad[0] == doctest::Approx(2.0f));
  CHECK(x->grad[2] == doctest::Approx(6.0f));

  // second backward without zero_grad accumulates
  auto s2 = op::sum_all(op::mul(x, x));
  backward(s2);
  CHECK(x->grad[1] == doctest::Approx(8.0f));
  x->zero_grad();
  CHECK(x->grad[1] == 0.0f);
}

TEST_CASE("untaped output refuses backward") {
  auto x = make_tensor<float>({1}, {2.f}, false);
  auto y = op::square(x);
  CHECK(!y->requires_grad);
  CHECK_THROWS_AS(backward(y), Error);
}

TEST_CASE("conv2d hand values") {
  // 1x1 kernel is a per-pixel scale
  auto x = make_tensor<float>({1, 1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
  auto w = make_tensor<float>({1, 1, 1, 1}, std::vector<float>{2.f});
  auto y = op::conv2d(x, ConvSpec{1, 1, 1, 1, 0, 1, false}, w, Tensor{});
  CHECK(y->shape == Shape{1, 1, 2, 2});
  CHECK(y->data == std::vector<float>{2.f, 4.f, 6.f, 8.f});

  // 3x3 all-ones kernel over all-ones input, padding 1: counts valid taps
  auto x1 = make_tensor<float>({1, 1, 3, 3}, std::vector<float>(9, 1.f));
  auto w1 = make_tensor<float>({1, 1, 3, 3}, std::vector<float>(9, 1.f));
  auto y1 = op::conv2d(x1, ConvSpec{1, 1, 3, 1, 1, 1, false}, w1, Tensor{});
  CHECK(y1->data[4] == doctest::Approx(9.0f));  // center
  CHECK(y1->data[0] == doctest::Approx(4.0f));  // corner
  CHECK(y1->data[1] == doctest::Approx(6.0f));  // edge
}

TEST_CASE("conv2d validation") {
  auto x = make_tensor<float>({1, 4, 4, 4});
  auto w = make_tensor<float>({4, 2, 3, 3});
  CHECK_THROWS_AS(op::conv2d(x, ConvSpec{5, 4, 3, 1, 1, 2, false}, w, Tensor{}), Error);
  CHECK_THROWS_AS(op::conv2d(x, ConvSpec{4, 3, 3, 1, 1, 2, false}, w, Tensor{}), Error);  // g!|n
  ConvSpec bad{4, 4, 0, 1, 0, 1, false};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("conv2d matches nested-loop reference on random specs") {
  Rng rng(2024);
  for (int t = 0; t < 12; ++t) {
    const int g = (t % 3 == 0) ? 1 : rng.uniform_int(1, 3);
    const int cg = rng.uniform_int(1, 3), og = rng.uniform_int(1, 3);
    const int c = g * cg, n = g * og;
    const int k = 1 + 2 * rng.uniform_int(0, 1);
    ConvSpec spec{c, n, k, rng.uniform_int(1, 2), rng.uniform_int(0, k / 2), g,
                  rng.coin()};
    const int h = rng.uniform_int(k, 7), w = rng.uniform_int(k, 7);

    auto x = tu::rand_tensor({2, c, h, w}, rng);
    auto wt = tu::rand_tensor({n, cg, k, k}, rng);
    Tensor bt = spec.bias ? tu::rand_tensor({n}, rng) : nullptr;

    tu::RefMap rx{x->shape, x->data};
    long long muls = 0;
    auto ry = tu::ref_conv2d(rx, spec, wt->data, spec.bias ? bt->data : std::vector<float>{},
                             muls);

    auto y = op::conv2d(x, spec, wt, bt);
    REQUIRE(y->shape == ry.shape);
    for (std::size_t i = 0; i < y->data.size(); ++i)
      CHECK(y->data[i] == doctest::Approx(ry.data[i]).epsilon(1e-4));
  }
}

TEST_CASE("maxpool matches reference, padding excluded") {
  Rng rng(7);
  for (int t = 0; t < 8; ++t) {
    const int k = rng.uniform_int(2, 3), s = rng.uniform_int(1, 2), p = rng.uniform_int(0, k - 1);
    const int h = rng.uniform_int(k, 7), w = rng.uniform_int(k, 7);
    auto x = tu::rand_tensor({1, 2, h, w}, rng, -5.f, -1.f);  // all negative: padding must not win
    tu::RefMap rx{x->shape, x->data};
    auto ry = tu::ref_maxpool2d(rx, k, s, p);
    auto y = op::maxpool2d(x, k, s, p);
    REQUIRE(y->shape == ry.shape);
    for (std::size_t i = 0; i < y->data.size(); ++i) CHECK(y->data[i] == ry.data[i]);
    for (float v : y->data) CHECK(v < 0.0f);
  }
}

TEST_CASE("concat and split are inverse") {
  Rng rng(3);
  auto a = tu::rand_tensor({1, 2, 3, 3}, rng);
  auto b = tu::rand_tensor({1, 3, 3, 3}, rng);
  auto cat = op::concat_channels<float>({a, b});
  CHECK(cat->shape == Shape{1, 5, 3, 3});
  auto parts = op::split_channels(cat, {2, 3});
  CHECK(parts[0]->data == a->data);
  CHECK(parts[1]->data == b->data);
  CHECK_THROWS_AS(op::split_channels(cat, {2, 2}), Error);  // sizes must cover
}

TEST_CASE("softmax groups sum to one, dfl expectation of uniform is midpoint") {
  Rng rng(5);
  const int bins = 8;
  auto x = tu::rand_tensor({1, 4 * bins, 2, 2}, rng, -3.f, 3.f);
  auto sm = op::softmax_channel_groups(x, bins);
  for (int side = 0; side < 4; ++side)
    for (int p = 0; p < 4; ++p) {
      double s = 0;
      for (int j = 0; j < bins; ++j)
        s += sm->data[static_cast<std::size_t>((side * bins + j) * 4 + p)];
      CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
    }

  auto u = make_tensor<float>({1, 4 * 16, 1, 1}, std::vector<float>(64, 0.7f));
  auto e = op::dfl_expectation(u, 16);
  CHECK(e->shape == Shape{1, 4, 1, 1});
  for (float v : e->data) CHECK(v == doctest::Approx(7.5f).epsilon(1e-6));
}

TEST_CASE("upsample_nearest2 replicates blocks, pad2d zero-fills") {
  auto x = make_tensor<float>({1, 1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
  auto up = op::upsample_nearest2(x);
  CHECK(up->shape == Shape{1, 1, 4, 4});
  CHECK(up->data[0] == 1.f);
  CHECK(up->data[1] == 1.f);
  CHECK(up->data[5] == 1.f);
  CHECK(up->data[10] == 4.f);

  auto pd = op::pad2d(x, 0, 1, 1, 0);
  CHECK(pd->shape == Shape{1, 1, 3, 3});
  CHECK(pd->data[0] == 0.f);  // left pad
  CHECK(pd->data[1] == 1.f);
  CHECK(pd->data[8] == 0.f);  // bottom pad
}

TEST_CASE("relu subgradient at zero is zero; maximum ties route to first") {
  auto x = make_tensor<float>({3}, {-1.f, 0.f, 2.f}, true);
  backward(op::sum_all(op::relu(x)));
  CHECK(x->grad[0] == 0.f);
  CHECK(x->grad[1] == 0.f);
  CHECK(x->grad[2] == 1.f);

  auto a = make_tensor<float>({2}, {1.f, 5.f}, true);
  auto b = make_tensor<float>({2}, {1.f, 3.f}, true);
  backward(op::sum_all(op::maximum(a, b)));
  CHECK(a->grad[0] == 1.f);  // tie: a wins
  CHECK(b->grad[0] == 0.f);
  CHECK(a->grad[1] == 1.f);
  CHECK(b->grad[1] == 0.f);
}

TEST_CASE("clamp saturates and kills gradient outside") {
  auto x = make_tensor<float>({3}, {-2.f, 0.5f, 3.f}, true);
  auto y = op::clamp(x, -1.f, 1.f);
  CHECK(y->data == std::vector<float>{-1.f, 0.5f, 1.f});
  backward(op::sum_all(y));
  CHECK(x->grad[0] == 0.f);
  CHECK(x->grad[1] == 1.f);
  CHECK(x->grad[2] == 0.f);
}

TEST_CASE("bce_with_logits_sum hand value and weight masking") {
  auto z = make_tensor<float>({2}, {0.f, 100.f}, false);
  // logit 0 vs target 0.5: ln 2; the second cell is masked out
  auto l = op::bce_with_logits_sum(z, std::vector<float>{0.5f, 0.f}, std::vector<float>{1.f, 0.f});
  CHECK(l->data[0] == doctest::Approx(std::log(2.0)).epsilon(1e-6));

  // numerically safe at large magnitude logits
  auto z2 = make_tensor<float>({2}, {80.f, -80.f}, false);
  auto l2 = op::bce_with_logits_sum(z2, std::vector<float>{1.f, 0.f}, std::vector<float>{1.f, 1.f});
  CHECK(std::isfinite(l2->data[0]));
  CHECK(l2->data[0] == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("batchnorm_train normalizes batch and updates running stats") {
  Rng rng(11);
  auto x = tu::rand_tensor({2, 3, 4, 4}, rng, -2.f, 5.f);
  auto gamma = make_tensor<float>({3}, {1.f, 2.f, 0.5f}, false);
  auto beta = make_tensor<float>({3}, {0.f, -1.f, 3.f}, false);
  std::vector<float> rm(3, 0.f), rv(3, 1.f);
  auto y = op::batchnorm_train(x, gamma, beta, rm, rv, 0.03f, 1e-3f);

  const int per = 2 * 4 * 4;
  for (int c = 0; c < 3; ++c) {
    double mean = 0, var = 0, xmean = 0;
    for (int n = 0; n < 2; ++n)
      for (int i = 0; i < 16; ++i) {
        mean += y->at(n, c, i / 4, i % 4);
        xmean += x->at(n, c, i / 4, i % 4);
      }
    mean /= per;
    xmean /= per;
    for (int n = 0; n < 2; ++n)
      for (int i = 0; i < 16; ++i) {
        const double d = y->at(n, c, i / 4, i % 4) - mean;
        var += d * d;
      }
    var /= per;
    CHECK(mean == doctest::Approx(beta->data[c]).epsilon(1e-3));
    const double g = gamma->data[c];
    CHECK(var == doctest::Approx(g * g).epsilon(2e-2));  // eps shrinks it slightly
    // running mean moved 3% of the way toward the batch mean
    CHECK(rm[c] == doctest::Approx(0.03 * xmean).epsilon(1e-3));
  }
}

TEST_CASE("finite differences: every differentiable op and metric graph") {
  Rng rng(0xFD0);
  for (auto& c : tu::fd_cases()) {
    INFO("op: ", c.name);
    double worst = 0;
    for (int rep = 0; rep < 2; ++rep) worst = std::max(worst, c.run(rng));
    CHECK(worst < 1e-4);
  }
}
