#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "hgo/graph.hpp"
#include "testutil.hpp"

using namespace hgo;

namespace {

ModelConfig tiny_cfg(const std::string& backbone) {
  ModelConfig mc;
  mc.scale = "n";
  mc.backbone = backbone;
  mc.num_classes = 4;
  mc.input_size = 64;
  return mc;
}

std::string tmp_path(const std::string& stem) {
  return "/tmp/hgo_test_" + stem + ".hgow";
}

}  // namespace

TEST_CASE("scale table") {
  auto n = scale_spec("n");
  CHECK(n.depth == doctest::Approx(0.33));
  CHECK(n.width == doctest::Approx(0.25));
  CHECK(n.max_channels == 1024);
  auto s = scale_spec("s");
  CHECK(s.depth == doctest::Approx(0.33));
  CHECK(s.width == doctest::Approx(0.50));
  auto m = scale_spec("m");
  CHECK(m.depth == doctest::Approx(0.67));
  CHECK(m.width == doctest::Approx(0.75));
  CHECK(m.max_channels == 768);
  auto l = scale_spec("l");
  CHECK(l.depth == doctest::Approx(1.0));
  CHECK(l.max_channels == 512);
  auto x = scale_spec("x");
  CHECK(x.width == doctest::Approx(1.25));
  CHECK_THROWS(scale_spec("xl"));

  CHECK(hgo_max_channels("n") == 2048);
  CHECK(hgo_max_channels("s") == 1536);
  CHECK(hgo_max_channels("m") == 768);
  CHECK(hgo_max_channels("l") == 512);
  CHECK(hgo_max_channels("x") == 512);
}

TEST_CASE("model config validation") {
  ModelConfig mc = tiny_cfg("hgnetv2");
  CHECK_NOTHROW(mc.validate());
  CHECK(mc.shared_head());

  mc.backbone = "c2f-baseline";
  CHECK_FALSE(mc.shared_head());
  mc.head = "shared";
  CHECK(mc.shared_head());

  mc = tiny_cfg("hgnetv2");
  mc.backbone = "vgg";
  CHECK_THROWS(mc.validate());

  mc = tiny_cfg("hgnetv2");
  mc.input_size = 60;  // not divisible by 32
  CHECK_THROWS(mc.validate());

  mc = tiny_cfg("hgnetv2");
  mc.num_classes = 0;
  CHECK_THROWS(mc.validate());

  mc = tiny_cfg("hgnetv2");
  mc.ghost_stages = {true, true};
  CHECK_THROWS(mc.validate());

  mc = tiny_cfg("hgnetv2");
  mc.head = "fancy";
  CHECK_THROWS(mc.validate());
}

TEST_CASE("every scale builds with consistent shapes") {
  for (const std::string scale : {"n", "s", "m", "l", "x"}) {
    for (const std::string backbone : {"hgnetv2", "c2f-baseline"}) {
      INFO(backbone << "-" << scale);
      ModelConfig mc;
      mc.scale = scale;
      mc.backbone = backbone;
      mc.num_classes = 4;
      mc.input_size = 64;
      ModelGraph g = build_model(mc, 3);

      auto shapes = g.scale_shapes();
      REQUIRE(shapes.size() == 3);
      CHECK(shapes[0].h == 8);
      CHECK(shapes[1].h == 4);
      CHECK(shapes[2].h == 2);

      const auto& hc = g.head_config();
      CHECK(hc.strides == std::vector<int>{8, 16, 32});
      CHECK(hc.nc == 4);
      for (std::size_t i = 0; i < 3; ++i) CHECK(hc.channels[i] == shapes[i].c);

      CHECK(g.cost().total_params() > 0);
      CHECK_FALSE(g.layers().empty());
    }
  }
}

TEST_CASE("forward produces head maps and rejects bad input") {
  ModelGraph g = build_model(tiny_cfg("hgnetv2"), 7);
  Rng rng(1);
  auto x = tu::rand_tensor({1, 3, 64, 64}, rng, 0.0f, 1.0f);
  auto maps = g.forward(x, false);
  REQUIRE(maps.size() == 3);
  CHECK(maps[0]->shape == Shape{1, 68, 8, 8});
  CHECK(maps[1]->shape == Shape{1, 68, 4, 4});
  CHECK(maps[2]->shape == Shape{1, 68, 2, 2});
  for (const auto& m : maps)
    for (float v : m->data) CHECK(std::isfinite(v));

  auto batch = tu::rand_tensor({3, 3, 64, 64}, rng, 0.0f, 1.0f);
  CHECK(g.forward(batch, false)[0]->shape == Shape{3, 68, 8, 8});

  CHECK_THROWS(g.forward(tu::rand_tensor({1, 1, 64, 64}, rng), false));
  CHECK_THROWS(g.forward(tu::rand_tensor({1, 3, 32, 64}, rng), false));
  CHECK_THROWS(g.forward(tu::rand_tensor({1, 3, 32, 32}, rng), false));
}

TEST_CASE("build determinism") {
  ModelConfig mc = tiny_cfg("hgnetv2");
  ModelGraph a = build_model(mc, 42);
  ModelGraph b = build_model(mc, 42);
  ModelGraph c = build_model(mc, 43);

  auto pa = a.params();
  auto pb = b.params();
  auto pc = c.params();
  REQUIRE(pa.size() == pb.size());
  REQUIRE(pa.size() == pc.size());

  bool any_differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    REQUIRE(pa[i].tensor->data.size() == pb[i].tensor->data.size());
    for (std::size_t j = 0; j < pa[i].tensor->data.size(); ++j)
      CHECK(pa[i].tensor->data[j] == pb[i].tensor->data[j]);
    if (pa[i].tensor->data != pc[i].tensor->data) any_differs = true;
  }
  CHECK(any_differs);  // a different seed actually changes the weights
}

TEST_CASE("parameter names are unique and shared slots appear once") {
  ModelGraph g = build_model(tiny_cfg("hgnetv2"), 5);
  auto ps = g.params();
  std::set<std::string> names;
  std::set<const void*> tensors;
  for (const auto& p : ps) {
    names.insert(p.name);
    tensors.insert(p.tensor.get());
  }
  CHECK(names.size() == ps.size());
  CHECK(tensors.size() == ps.size());
}

TEST_CASE("weight round-trip is bit exact at 32 bit") {
  ModelGraph g = build_model(tiny_cfg("hgnetv2"), 17);
  const std::string path = tmp_path("rt32");
  save_weights(g, path);

  ModelGraph h = build_model(tiny_cfg("hgnetv2"), 99);
  load_weights(h, path);

  auto pg = g.params();
  auto ph = h.params();
  REQUIRE(pg.size() == ph.size());
  for (std::size_t i = 0; i < pg.size(); ++i) {
    INFO(pg[i].name);
    REQUIRE(pg[i].tensor->data.size() == ph[i].tensor->data.size());
    for (std::size_t j = 0; j < pg[i].tensor->data.size(); ++j)
      CHECK(pg[i].tensor->data[j] == ph[i].tensor->data[j]);
  }
  std::remove(path.c_str());
}

TEST_CASE("f16 round-trip stays within half precision") {
  ModelGraph g = build_model(tiny_cfg("c2f-baseline"), 17);
  const std::string path = tmp_path("rt16");
  save_weights(g, path, true);

  ModelGraph h = build_model(tiny_cfg("c2f-baseline"), 1);
  load_weights(h, path);

  auto pg = g.params();
  auto ph = h.params();
  REQUIRE(pg.size() == ph.size());
  for (std::size_t i = 0; i < pg.size(); ++i) {
    for (std::size_t j = 0; j < pg[i].tensor->data.size(); ++j) {
      const float a = pg[i].tensor->data[j];
      const float b = ph[i].tensor->data[j];
      CHECK(std::abs(a - b) <= std::max(1e-3f, std::abs(a) * 1e-3f));
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("save is deterministic byte for byte") {
  const std::string p1 = tmp_path("det1"), p2 = tmp_path("det2");
  {
    ModelGraph g = build_model(tiny_cfg("hgnetv2"), 23);
    save_weights(g, p1);
  }
  {
    ModelGraph g = build_model(tiny_cfg("hgnetv2"), 23);
    save_weights(g, p2);
  }
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK_FALSE(s1.empty());
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("loader rejects malformed files") {
  ModelGraph g = build_model(tiny_cfg("hgnetv2"), 29);
  const std::string path = tmp_path("mal");
  save_weights(g, path);

  std::string blob;
  {
    std::ifstream f(path, std::ios::binary);
    blob.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  }

  auto write_blob = [&](const std::string& data) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(data.data(), static_cast<std::streamsize>(data.size()));
  };

  SUBCASE("bad magic") {
    std::string bad = blob;
    bad[0] = 'X';
    write_blob(bad);
    CHECK_THROWS(load_weights(g, path));
  }

  SUBCASE("unsupported version") {
    std::string bad = blob;
    bad[4] = 9;
    write_blob(bad);
    CHECK_THROWS(load_weights(g, path));
  }

  SUBCASE("truncated payload") {
    write_blob(blob.substr(0, blob.size() - 7));
    CHECK_THROWS(load_weights(g, path));
  }

  SUBCASE("missing file") {
    std::remove(path.c_str());
    CHECK_THROWS(load_weights(g, path));
  }

  SUBCASE("shape mismatch against another architecture") {
    ModelGraph other = build_model(tiny_cfg("c2f-baseline"), 29);
    CHECK_THROWS(load_weights(other, path));
  }

  std::remove(path.c_str());
}

TEST_CASE("reference cost figures at full resolution") {
  auto at640 = [](const std::string& backbone, const std::string& scale, int nc) {
    ModelConfig mc;
    mc.scale = scale;
    mc.backbone = backbone;
    mc.num_classes = nc;
    mc.input_size = 640;
    return build_model(mc, 1).cost();
  };

  // the nano baseline at 80 classes
  auto b80 = at640("c2f-baseline", "n", 80);
  CHECK(b80.total_params() == 3157184);
  CHECK(b80.gflops() == doctest::Approx(8.743).epsilon(0.001));

  // four-class configurations used throughout the toy pipeline
  auto b4 = at640("c2f-baseline", "n", 4);
  CHECK(b4.total_params() == 3011612);
  CHECK(b4.gflops() == doctest::Approx(8.085).epsilon(0.001));
  CHECK(b4.params_mb_f16() == doctest::Approx(6.02).epsilon(0.01));

  auto h4 = at640("hgnetv2", "n", 4);
  CHECK(h4.total_params() == 2309420);
  CHECK(h4.gflops() == doctest::Approx(4.130).epsilon(0.001));
  CHECK(h4.params_mb_f16() == doctest::Approx(4.62).epsilon(0.01));

  const double drop = 1.0 - static_cast<double>(h4.total_params()) / b4.total_params();
  CHECK(drop > 0.20);
  CHECK(h4.gflops() / b4.gflops() < 0.55);
}

TEST_CASE("larger scales cost more") {
  auto params_of = [](const std::string& scale) {
    ModelConfig mc;
    mc.scale = scale;
    mc.backbone = "hgnetv2";
    mc.num_classes = 4;
    mc.input_size = 64;
    return build_model(mc, 1).cost().total_params();
  };
  const auto n = params_of("n"), s = params_of("s"), m = params_of("m"), l = params_of("l");
  CHECK(n < s);
  CHECK(s < m);
  CHECK(m < l);
}
