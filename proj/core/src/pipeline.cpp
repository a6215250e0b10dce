#include "hgo/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace fs = std::filesystem;

namespace hgo {

void RunConfig::validate() const {
  HGO_CHECK(conf_threshold > 0.0 && conf_threshold < 1.0,
            "conf_threshold " << conf_threshold << " outside (0,1)");
  HGO_CHECK(nms_iou > 0.0 && nms_iou < 1.0, "nms_iou " << nms_iou << " outside (0,1)");
  HGO_CHECK(max_detections >= 1, "max_detections must be >= 1");
}

std::vector<Detection> nms(const std::vector<Detection>& dets, const RunConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });

  std::vector<bool> dead(dets.size(), false);
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (dead[order[i]]) continue;
    const Detection& top = dets[order[i]];
    kept.push_back(top);
    if (static_cast<int>(kept.size()) >= cfg.max_detections) break;
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (dead[order[j]]) continue;
      const Detection& d = dets[order[j]];
      if (d.class_id == top.class_id && box_iou(top.box, d.box) > cfg.nms_iou)
        dead[order[j]] = true;
    }
  }
  return kept;
}

Tensor image_to_tensor(const Image& img) {
  HGO_CHECK(img.w > 0 && img.h > 0, "empty image");
  auto t = make_tensor<float>({1, 3, img.h, img.w});
  const std::size_t plane = static_cast<std::size_t>(img.w) * img.h;
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c)
        t->data[static_cast<std::size_t>(c) * plane + static_cast<std::size_t>(y) * img.w + x] =
            img.at(x, y, c) / 255.0f;
  return t;
}

std::vector<Detection> decode_detections(const std::vector<Tensor>& maps, const HeadConfig& hc,
                                         const RunConfig& cfg) {
  cfg.validate();
  HGO_CHECK(maps.size() == hc.strides.size(),
            "expected " << hc.strides.size() << " head maps, got " << maps.size());
  std::vector<Detection> cand;
  for (std::size_t s = 0; s < maps.size(); ++s) {
    const auto& m = *maps[s];
    HGO_CHECK(m.rank() == 4 && m.shape[0] == 1, "decode expects a single-image map");
    const auto boxes = decode_boxes(m, hc.reg_max, hc.strides[s]);
    const auto scores = decode_scores(m, hc.reg_max, hc.nc);
    const std::size_t cells = boxes.size() / 4;
    for (std::size_t i = 0; i < cells; ++i)
      for (int c = 0; c < hc.nc; ++c) {
        const double conf = scores[i * static_cast<std::size_t>(hc.nc) + c];
        if (conf < cfg.conf_threshold) continue;
        Detection d;
        d.box = {boxes[i * 4], boxes[i * 4 + 1], boxes[i * 4 + 2], boxes[i * 4 + 3]};
        d.class_id = c;
        d.confidence = conf;
        cand.push_back(d);
      }
  }
  return nms(cand, cfg);
}

namespace {

struct Rgb {
  std::uint8_t r, g, b;
};
constexpr Rgb kPalette[8] = {{220, 40, 40},  {40, 200, 40},  {50, 80, 230},  {230, 210, 40},
                             {220, 60, 220}, {40, 210, 210}, {240, 140, 40}, {150, 150, 150}};

}  // namespace

InferenceResult run_inference(ModelGraph& graph, const Image& image, const RunConfig& cfg) {
  const int S = graph.model_config().input_size;
  const Letterboxed lb = letterbox(image, S);
  const Tensor x = image_to_tensor(lb.image);
  const auto maps = graph.forward(x, false);
  auto dets = decode_detections(maps, graph.head_config(), cfg);
  for (auto& d : dets) d.box = lb.tf.to_original(d.box);

  InferenceResult out;
  out.annotated = image;
  for (const auto& d : dets) {
    const Rgb col = kPalette[static_cast<std::size_t>(d.class_id) % 8];
    draw_box(out.annotated, d.box, col.r, col.g, col.b);
    std::ostringstream label;
    label << d.class_id << ":" << static_cast<int>(std::lround(d.confidence * 100));
    const int ly = static_cast<int>(std::lround(d.box.y1)) - 12;
    draw_label(out.annotated, static_cast<int>(std::lround(d.box.x1)) + 2,
               ly >= 0 ? ly : static_cast<int>(std::lround(d.box.y1)) + 2, label.str(), col.r,
               col.g, col.b);
  }
  out.detections = std::move(dets);
  return out;
}

std::vector<GtBox> read_labels(const std::string& path, int image_w, int image_h) {
  std::ifstream f(path);
  HGO_CHECK(f, "cannot open '" << path << "'");
  std::vector<GtBox> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    int cls = -1;
    double cx, cy, w, h;
    HGO_CHECK(ss >> cls >> cx >> cy >> w >> h,
              "'" << path << "' line " << lineno << ": want 'class cx cy w h'");
    HGO_CHECK(cls >= 0, "'" << path << "' line " << lineno << ": negative class");
    HGO_CHECK(w > 0 && h > 0 && cx >= 0 && cy >= 0 && cx <= 1 && cy <= 1 && w <= 1 && h <= 1,
              "'" << path << "' line " << lineno << ": coordinates outside [0,1]");
    GtBox g;
    g.class_id = cls;
    g.box = {static_cast<float>((cx - w / 2) * image_w), static_cast<float>((cy - h / 2) * image_h),
             static_cast<float>((cx + w / 2) * image_w), static_cast<float>((cy + h / 2) * image_h)};
    out.push_back(g);
  }
  return out;
}

void write_labels(const std::string& path, const std::vector<GtBox>& boxes, int image_w,
                  int image_h) {
  std::ofstream f(path, std::ios::trunc);
  HGO_CHECK(f, "cannot open '" << path << "' for writing");
  f << std::setprecision(9);
  for (const auto& g : boxes) {
    const double cx = (g.box.x1 + g.box.x2) / 2.0 / image_w;
    const double cy = (g.box.y1 + g.box.y2) / 2.0 / image_h;
    const double w = (g.box.x2 - g.box.x1) / static_cast<double>(image_w);
    const double h = (g.box.y2 - g.box.y1) / static_cast<double>(image_h);
    f << g.class_id << " " << cx << " " << cy << " " << w << " " << h << "\n";
  }
  HGO_CHECK(f.good(), "write failed for '" << path << "'");
}

SynthScene synth_scene(int size, Rng& rng) {
  HGO_CHECK(size >= 32, "scene size " << size << " too small");
  SynthScene scene;
  const int bg = rng.uniform_int(100, 150);
  scene.image = make_image(size, size, static_cast<std::uint8_t>(bg),
                           static_cast<std::uint8_t>(bg), static_cast<std::uint8_t>(bg));

  // class-coded solid shapes: 0/1 rectangles, 2/3 discs
  constexpr Rgb kClassColor[kSynthClasses] = {
      {210, 40, 40}, {40, 200, 50}, {45, 70, 225}, {235, 215, 30}};

  const int n_obj = rng.coin(0.2) ? 2 : 1;
  for (int obj = 0; obj < n_obj; ++obj) {
    for (int attempt = 0; attempt < 12; ++attempt) {
      const int cls = rng.uniform_int(0, kSynthClasses - 1);
      const bool disc = cls >= 2;
      const int w = rng.uniform_int(size * 7 / 16, size * 3 / 4);
      const int h = disc ? w : rng.uniform_int(size * 7 / 16, size * 3 / 4);
      if (w >= size - 2 || h >= size - 2) continue;
      const int x1 = rng.uniform_int(1, size - w - 1);
      const int y1 = rng.uniform_int(1, size - h - 1);
      const Box box{static_cast<float>(x1), static_cast<float>(y1), static_cast<float>(x1 + w),
                    static_cast<float>(y1 + h)};
      bool clash = false;
      for (const auto& g : scene.boxes)
        if (box_iou(box, g.box) > 0.01) clash = true;
      if (clash) continue;

      const Rgb base = kClassColor[cls];
      auto jit = [&](int v) {
        return static_cast<std::uint8_t>(std::clamp(v + rng.uniform_int(-8, 8), 0, 255));
      };
      const std::uint8_t r = jit(base.r), g = jit(base.g), b = jit(base.b);
      if (disc) {
        const double cx = x1 + w / 2.0, cy = y1 + h / 2.0, rad = w / 2.0;
        for (int y = y1; y < y1 + h; ++y)
          for (int x = x1; x < x1 + w; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            if (dx * dx + dy * dy <= rad * rad) {
              scene.image.at(x, y, 0) = r;
              scene.image.at(x, y, 1) = g;
              scene.image.at(x, y, 2) = b;
            }
          }
      } else {
        for (int y = y1; y < y1 + h; ++y)
          for (int x = x1; x < x1 + w; ++x) {
            scene.image.at(x, y, 0) = r;
            scene.image.at(x, y, 1) = g;
            scene.image.at(x, y, 2) = b;
          }
      }
      scene.boxes.push_back({box, cls});
      break;
    }
  }

  // per-pixel speckle keeps channel variance alive on every image, which in
  // turn keeps folded batch-norm statistics well conditioned at tiny sizes
  for (auto& v : scene.image.pixels)
    v = static_cast<std::uint8_t>(std::clamp(static_cast<int>(v) + rng.uniform_int(-12, 12),
                                             0, 255));
  return scene;
}

void generate_synth_dataset(const std::string& dir, int n_images, int image_size,
                            std::uint64_t seed) {
  HGO_CHECK(n_images >= 1, "need at least one image");
  std::error_code ec;
  fs::create_directories(dir + "/images", ec);
  fs::create_directories(dir + "/labels", ec);
  HGO_CHECK(fs::is_directory(dir + "/images") && fs::is_directory(dir + "/labels"),
            "cannot create dataset directories under '" << dir << "'");

  Rng rng(seed);
  std::vector<std::string> names;
  for (int i = 0; i < n_images; ++i) {
    std::ostringstream name;
    name << "im" << std::setw(4) << std::setfill('0') << i;
    const SynthScene scene = synth_scene(image_size, rng);
    write_ppm(scene.image, dir + "/images/" + name.str() + ".ppm");
    write_labels(dir + "/labels/" + name.str() + ".txt", scene.boxes, image_size, image_size);
    names.push_back(name.str());
  }

  const int n_train = static_cast<int>(std::lround(0.8 * n_images));
  const int n_val = static_cast<int>(std::lround(0.1 * n_images));
  auto write_split = [&](const std::string& split, int from, int to) {
    std::ofstream f(dir + "/" + split + ".txt", std::ios::trunc);
    HGO_CHECK(f, "cannot write split manifest '" << split << "'");
    for (int i = from; i < to; ++i) f << names[static_cast<std::size_t>(i)] << "\n";
  };
  write_split("train", 0, n_train);
  write_split("val", n_train, n_train + n_val);
  write_split("test", n_train + n_val, n_images);
}

std::vector<Sample> load_dataset(const std::string& dir, const std::string& split) {
  std::vector<std::string> names;
  auto read_split = [&](const std::string& s) {
    std::ifstream f(dir + "/" + s + ".txt");
    HGO_CHECK(f, "cannot open split manifest '" << dir << "/" << s << ".txt'");
    std::string line;
    while (std::getline(f, line))
      if (!line.empty()) names.push_back(line);
  };
  if (split == "all") {
    read_split("train");
    read_split("val");
    read_split("test");
  } else {
    HGO_CHECK(split == "train" || split == "val" || split == "test",
              "unknown split '" << split << "' (want train|val|test|all)");
    read_split(split);
  }

  std::vector<Sample> out;
  for (const auto& name : names) {
    Sample s;
    s.name = name;
    s.image = read_image(dir + "/images/" + name + ".ppm");
    s.boxes = read_labels(dir + "/labels/" + name + ".txt", s.image.w, s.image.h);
    out.push_back(std::move(s));
  }
  return out;
}

void TrainOptions::validate() const {
  HGO_CHECK(steps >= 1, "steps must be >= 1");
  HGO_CHECK(batch >= 1, "batch must be >= 1");
  HGO_CHECK(lr >= 0.0, "negative learning rate");
  HGO_CHECK(momentum >= 0.0 && momentum < 1.0, "momentum " << momentum << " outside [0,1)");
}

std::vector<TrainRecord> train_toy(ModelGraph& graph, const std::vector<Sample>& data,
                                   const TrainOptions& opt, std::uint64_t seed,
                                   const std::function<void(const TrainRecord&)>& on_step) {
  opt.validate();
  HGO_CHECK(!data.empty(), "empty training set");
  const int S = graph.model_config().input_size;
  for (const auto& s : data)
    HGO_CHECK(s.image.w == S && s.image.h == S,
              "training image '" << s.name << "' is " << s.image.w << "x" << s.image.h
                                 << " but the model wants " << S << "x" << S);

  auto params = graph.params();
  std::vector<Tensor> weights;
  for (auto& p : params)
    if (p.trainable) weights.push_back(p.tensor);
  std::vector<std::vector<float>> velocity(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i)
    velocity[i].assign(weights[i]->data.size(), 0.0f);

  Rng rng(seed);
  const HeadConfig& hc = graph.head_config();
  std::vector<TrainRecord> records;

  // One forward per step over a true (B,3,S,S) batch. Batch statistics are
  // what batch-norm normalizes with in training mode, so per-image forwards
  // would let the net lean on instance statistics and fall apart when eval
  // switches to the folded running stats.
  const int B = opt.batch;
  const std::int64_t plane = static_cast<std::int64_t>(3) * S * S;
  auto pick = [&]() -> const Sample& {
    return data[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(data.size()) - 1))];
  };
  auto fill_image = [&](Tensor& xb, int b, const Image& img) {
    float* dst = xb->data.data() + static_cast<std::size_t>(b) * plane;
    const std::int64_t hw = static_cast<std::int64_t>(S) * S;
    for (int ch = 0; ch < 3; ++ch)
      for (std::int64_t i = 0; i < hw; ++i)
        dst[ch * hw + i] = static_cast<float>(img.pixels[static_cast<std::size_t>(i * 3 + ch)]) / 255.0f;
  };

  for (int step = 1; step <= opt.steps; ++step) {
    for (auto& w : weights) w->zero_grad();
    auto xb = make_tensor<float>({B, 3, S, S});
    std::vector<std::vector<Box>> gt_boxes(static_cast<std::size_t>(B));
    std::vector<std::vector<int>> gt_classes(static_cast<std::size_t>(B));
    for (int b = 0; b < B; ++b) {
      const auto& sample = pick();
      fill_image(xb, b, sample.image);
      for (const auto& g : sample.boxes) {
        gt_boxes[static_cast<std::size_t>(b)].push_back(g.box);
        gt_classes[static_cast<std::size_t>(b)].push_back(g.class_id);
      }
    }
    const auto maps = graph.forward(xb, true);
    LossBundle bundle =
        detection_loss(maps, gt_boxes, gt_classes, hc, S, S, opt.box_loss, opt.weights,
                       opt.inner_ratio);
    backward(bundle.total);

    TrainRecord rec;
    rec.step = step;
    rec.total = bundle.total->data[0];
    rec.box = bundle.box_loss;
    rec.dfl = bundle.dfl_loss;
    rec.cls = bundle.cls_loss;
    rec.num_pos = bundle.num_pos;
    HGO_CHECK(std::isfinite(rec.total),
              "training diverged at step " << step << " (loss " << rec.total << ")");

    for (std::size_t i = 0; i < weights.size(); ++i) {
      auto& w = weights[i];
      if (w->grad.empty()) continue;
      auto& v = velocity[i];
      for (std::size_t j = 0; j < v.size(); ++j) {
        v[j] = static_cast<float>(opt.momentum) * v[j] + w->grad[j];
        w->data[j] -= static_cast<float>(opt.lr) * v[j];
      }
    }
    records.push_back(rec);
    if (on_step) on_step(rec);
  }

  // Settle the BN running averages on the final weights: forward-only passes
  // in training mode, fixed order. Momentum 0.03 over a few sweeps moves the
  // stats most of the way to the statistics the eval-mode fold will use.
  if (opt.lr > 0.0) {
    const int sweeps = 4;
    for (int sweep = 0; sweep < sweeps; ++sweep) {
      for (std::size_t start = 0; start + 1 <= data.size(); start += static_cast<std::size_t>(B)) {
        auto xb = make_tensor<float>({B, 3, S, S});
        for (int b = 0; b < B; ++b)
          fill_image(xb, b, data[(start + static_cast<std::size_t>(b)) % data.size()].image);
        graph.forward(xb, true);
      }
    }
  }
  return records;
}

BenchResult bench_forward(ModelGraph& graph, int iters, int warmup) {
  HGO_CHECK(iters >= 1, "iters must be >= 1");
  const int S = graph.model_config().input_size;
  auto x = make_tensor<float>({1, 3, S, S});
  Rng rng(12345);
  for (auto& v : x->data) v = static_cast<float>(rng.uniform());

  for (int i = 0; i < warmup; ++i) (void)graph.forward(x, false);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < iters; ++i) (void)graph.forward(x, false);
  const auto t1 = std::chrono::steady_clock::now();

  BenchResult r;
  r.iters = iters;
  r.total_seconds = std::chrono::duration<double>(t1 - t0).count();
  r.ms_per_image = r.total_seconds * 1000.0 / iters;
  r.fps = r.total_seconds > 0 ? iters / r.total_seconds : 0.0;
  return r;
}

}  // namespace hgo
