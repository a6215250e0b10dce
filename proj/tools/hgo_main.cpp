// hgo: build, inspect, train and run the detector family from the command line.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hgo/config.hpp"
#include "hgo/pipeline.hpp"

namespace fs = std::filesystem;
using hgo::AppConfig;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::uint64_t seed = 0;
};

// per-subcommand model overrides; only flags the user actually passed win
struct ModelFlags {
  CLI::Option* scale = nullptr;
  CLI::Option* backbone = nullptr;
  CLI::Option* head = nullptr;
  CLI::Option* classes = nullptr;
  CLI::Option* input = nullptr;
  std::string scale_v, backbone_v, head_v;
  int classes_v = 0, input_v = 0;

  void attach(CLI::App* cmd) {
    scale = cmd->add_option("--scale", scale_v, "model scale: n|s|m|l|x");
    backbone = cmd->add_option("--backbone", backbone_v, "hgnetv2 | c2f-baseline");
    head = cmd->add_option("--head", head_v, "auto | shared | decoupled");
    classes = cmd->add_option("--classes", classes_v, "number of classes");
    input = cmd->add_option("--input", input_v, "square input size (multiple of 32)");
  }
  void apply(hgo::ModelConfig& m) const {
    if (scale->count()) m.scale = scale_v;
    if (backbone->count()) m.backbone = backbone_v;
    if (head->count()) m.head = head_v;
    if (classes->count()) m.num_classes = classes_v;
    if (input->count()) m.input_size = input_v;
  }
};

AppConfig base_config(const GlobalArgs& g) {
  if (!g.config_path.empty()) return hgo::load_config(g.config_path);
  return {};
}

std::string fmt_params(std::int64_t p) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(3) << p / 1e6 << "M";
  return ss.str();
}

int cmd_summary(const GlobalArgs& g, const ModelFlags& mf) {
  AppConfig cfg = base_config(g);
  mf.apply(cfg.model);
  hgo::ModelGraph graph = hgo::build_model(cfg.model, g.seed);

  std::cout << "model: backbone=" << cfg.model.backbone << " scale=" << cfg.model.scale
            << " head=" << (cfg.model.shared_head() ? "shared" : "decoupled")
            << " classes=" << cfg.model.num_classes << " input=" << cfg.model.input_size
            << "\n\n";
  std::cout << std::left << std::setw(22) << "layer" << std::setw(10) << "kind"
            << "output (c,h,w)\n";
  for (const auto& row : graph.layers()) {
    std::ostringstream shape;
    shape << row.out.c << "x" << row.out.h << "x" << row.out.w;
    std::cout << std::left << std::setw(22) << row.name << std::setw(10) << row.kind
              << shape.str() << "\n";
  }
  const hgo::CostReport rep = graph.cost();
  std::cout << "\nparams:  " << fmt_params(rep.total_params()) << "\n";
  std::cout << "gflops:  " << std::fixed << std::setprecision(2) << rep.gflops() << " (at "
            << cfg.model.input_size << "x" << cfg.model.input_size << ")\n";
  std::cout << "size:    " << std::setprecision(2) << rep.params_mb_f32() << " MB f32, "
            << rep.params_mb_f16() << " MB f16\n";
  return 0;
}

int cmd_cost(const GlobalArgs& g, const ModelFlags& mf, const std::string& json_out) {
  AppConfig cfg = base_config(g);
  mf.apply(cfg.model);
  hgo::ModelGraph graph = hgo::build_model(cfg.model, g.seed);
  const hgo::CostReport rep = graph.cost();

  std::cout << std::left << std::setw(30) << "op" << std::right << std::setw(14) << "MACs"
            << std::setw(12) << "params" << std::setw(12) << "eltwise" << "\n";
  for (const auto& it : rep.items)
    std::cout << std::left << std::setw(30) << it.name << std::right << std::setw(14) << it.macs
              << std::setw(12) << it.params << std::setw(12) << it.elementwise << "\n";
  std::cout << "\ntotal MACs:   " << rep.total_macs() << "\n";
  std::cout << "total params: " << rep.total_params() << " (" << fmt_params(rep.total_params())
            << ")\n";
  std::cout << "gflops:       " << std::fixed << std::setprecision(3) << rep.gflops()
            << "  (2 x MACs)\n";
  std::cout << "file size:    " << std::setprecision(2) << rep.params_mb_f32() << " MB f32, "
            << rep.params_mb_f16() << " MB f16\n";

  if (!json_out.empty()) {
    nlohmann::json j;
    j["total_macs"] = rep.total_macs();
    j["total_params"] = rep.total_params();
    j["gflops"] = rep.gflops();
    j["params_mb_f32"] = rep.params_mb_f32();
    j["params_mb_f16"] = rep.params_mb_f16();
    for (const auto& it : rep.items)
      j["items"].push_back({{"name", it.name},
                            {"macs", it.macs},
                            {"params", it.params},
                            {"elementwise", it.elementwise}});
    std::ofstream f(json_out, std::ios::trunc);
    HGO_CHECK(f, "cannot write '" << json_out << "'");
    f << j.dump(2) << "\n";
    std::cout << "wrote " << json_out << "\n";
  }
  return 0;
}

int cmd_infer(const GlobalArgs& g, const ModelFlags& mf, const std::string& weights,
              const std::string& image_path, const std::string& out_path, double conf,
              double nms_iou) {
  AppConfig cfg = base_config(g);
  mf.apply(cfg.model);
  if (conf > 0) cfg.run.conf_threshold = conf;
  if (nms_iou > 0) cfg.run.nms_iou = nms_iou;

  hgo::ModelGraph graph = hgo::build_model(cfg.model, g.seed);
  if (!weights.empty()) hgo::load_weights(graph, weights);

  const hgo::Image img = hgo::read_image(image_path);
  const hgo::InferenceResult res = hgo::run_inference(graph, img, cfg.run);

  std::cout << res.detections.size() << " detection(s)\n";
  for (const auto& d : res.detections)
    std::cout << "  class " << d.class_id << "  conf " << std::fixed << std::setprecision(3)
              << d.confidence << "  box [" << std::setprecision(1) << d.box.x1 << ", " << d.box.y1
              << ", " << d.box.x2 << ", " << d.box.y2 << "]\n";
  if (!out_path.empty()) {
    hgo::write_ppm(res.annotated, out_path);
    std::cout << "annotated image written to " << out_path << "\n";
  }
  return 0;
}

int cmd_train(const GlobalArgs& g, const std::string& data_dir, const std::string& out_weights,
              const std::string& curve_path, CLI::Option* steps_opt, int steps, int batch,
              double lr, const std::string& loss_name) {
  AppConfig cfg = base_config(g);
  if (g.config_path.empty()) {
    // toy defaults: tiny model over the synthetic 4-class set
    cfg.model.scale = "n";
    cfg.model.input_size = 64;
    cfg.model.num_classes = hgo::kSynthClasses;
  }
  if (steps_opt->count()) cfg.train.steps = steps;
  if (batch > 0) cfg.train.batch = batch;
  if (lr > 0) cfg.train.lr = lr;
  if (!loss_name.empty()) cfg.train.box_loss = hgo::box_loss_from_string(loss_name);

  hgo::ModelGraph graph = hgo::build_model(cfg.model, g.seed);
  const auto data = hgo::load_dataset(data_dir, "train");
  std::cout << "training " << cfg.model.backbone << "-" << cfg.model.scale << " on "
            << data.size() << " images, " << cfg.train.steps << " steps, box loss "
            << hgo::to_string(cfg.train.box_loss) << "\n";

  std::ofstream curve;
  if (!curve_path.empty()) {
    curve.open(curve_path, std::ios::trunc);
    HGO_CHECK(curve, "cannot write '" << curve_path << "'");
    curve << "step,total,box,dfl,cls,num_pos\n";
  }
  const auto records = hgo::train_toy(
      graph, data, cfg.train, g.seed, [&](const hgo::TrainRecord& r) {
        if (curve.is_open())
          curve << r.step << "," << r.total << "," << r.box << "," << r.dfl << "," << r.cls << ","
                << r.num_pos << "\n";
        if (r.step == 1 || r.step % 25 == 0)
          std::cout << "  step " << std::setw(4) << r.step << "  loss " << std::fixed
                    << std::setprecision(4) << r.total << "  (box " << r.box << " dfl " << r.dfl
                    << " cls " << r.cls << ")\n";
      });

  hgo::save_weights(graph, out_weights);
  std::cout << "weights written to " << out_weights << "\n";
  if (!curve_path.empty()) std::cout << "loss curve written to " << curve_path << "\n";
  const auto& last = records.back();
  std::cout << "final loss " << std::fixed << std::setprecision(4) << last.total << "\n";
  return 0;
}

std::vector<hgo::Detection> read_preds(const std::string& path, int w, int h) {
  std::ifstream f(path);
  HGO_CHECK(f, "cannot open '" << path << "'");
  std::vector<hgo::Detection> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    int cls;
    double conf, cx, cy, bw, bh;
    HGO_CHECK(ss >> cls >> conf >> cx >> cy >> bw >> bh,
              "'" << path << "' line " << lineno << ": want 'class conf cx cy w h'");
    hgo::Detection d;
    d.class_id = cls;
    d.confidence = conf;
    d.box = {static_cast<float>((cx - bw / 2) * w), static_cast<float>((cy - bh / 2) * h),
             static_cast<float>((cx + bw / 2) * w), static_cast<float>((cy + bh / 2) * h)};
    out.push_back(d);
  }
  return out;
}

void write_preds(const std::string& path, const std::vector<hgo::Detection>& dets, int w, int h) {
  std::ofstream f(path, std::ios::trunc);
  HGO_CHECK(f, "cannot write '" << path << "'");
  f << std::setprecision(9);
  for (const auto& d : dets) {
    const double cx = (d.box.x1 + d.box.x2) / 2.0 / w;
    const double cy = (d.box.y1 + d.box.y2) / 2.0 / h;
    const double bw = (d.box.x2 - d.box.x1) / static_cast<double>(w);
    const double bh = (d.box.y2 - d.box.y1) / static_cast<double>(h);
    f << d.class_id << " " << d.confidence << " " << cx << " " << cy << " " << bw << " " << bh
      << "\n";
  }
}

int cmd_eval(const GlobalArgs& g, const ModelFlags& mf, const std::string& labels_dir,
             const std::string& preds_dir, const std::string& weights, const std::string& data_dir,
             const std::string& split, const std::string& save_preds, const std::string& json_out,
             double pr_iou) {
  AppConfig cfg = base_config(g);
  mf.apply(cfg.model);

  std::vector<std::vector<hgo::Detection>> dets;
  std::vector<std::vector<hgo::GtBox>> gts;
  int nc = cfg.model.num_classes;

  if (!weights.empty() || !data_dir.empty()) {
    // run the model over a dataset split
    HGO_CHECK(!data_dir.empty(), "--data is required when evaluating a model");
    if (g.config_path.empty()) {
      cfg.model.scale = "n";
      cfg.model.input_size = 64;
      cfg.model.num_classes = hgo::kSynthClasses;
      mf.apply(cfg.model);
    }
    nc = cfg.model.num_classes;
    hgo::ModelGraph graph = hgo::build_model(cfg.model, g.seed);
    if (!weights.empty()) hgo::load_weights(graph, weights);
    const auto data = hgo::load_dataset(data_dir, split);
    HGO_CHECK(!data.empty(), "split '" << split << "' of '" << data_dir << "' is empty");
    hgo::RunConfig rc = cfg.run;
    rc.conf_threshold = 0.001;  // dense PR curve; precision/recall still read at 0.25
    if (!save_preds.empty()) fs::create_directories(save_preds);
    for (const auto& s : data) {
      const auto res = hgo::run_inference(graph, s.image, rc);
      dets.push_back(res.detections);
      gts.push_back(s.boxes);
      if (!save_preds.empty())
        write_preds(save_preds + "/" + s.name + ".txt", res.detections, s.image.w, s.image.h);
    }
  } else {
    HGO_CHECK(!labels_dir.empty() && !preds_dir.empty(),
              "need either --weights/--data or --labels/--preds");
    // normalized coordinates: evaluate on the unit square
    int max_cls = 0;
    for (const auto& entry : fs::directory_iterator(labels_dir)) {
      if (entry.path().extension() != ".txt") continue;
      const std::string stem = entry.path().stem().string();
      gts.push_back(hgo::read_labels(entry.path().string(), 1, 1));
      const std::string pred_path = preds_dir + "/" + stem + ".txt";
      dets.push_back(fs::exists(pred_path) ? read_preds(pred_path, 1, 1)
                                           : std::vector<hgo::Detection>{});
      for (const auto& gt : gts.back()) max_cls = std::max(max_cls, gt.class_id);
      for (const auto& d : dets.back()) max_cls = std::max(max_cls, d.class_id);
    }
    HGO_CHECK(!gts.empty(), "no .txt labels found in '" << labels_dir << "'");
    nc = max_cls + 1;
  }

  const hgo::MapSummary sum = hgo::map_summary(dets, gts, nc, pr_iou);
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "images:        " << gts.size() << "\n";
  std::cout << "precision:     " << sum.precision << "   (conf 0.25, IoU " << pr_iou << ")\n";
  std::cout << "recall:        " << sum.recall << "\n";
  std::cout << "mAP@0.5:       " << sum.map50 << "\n";
  std::cout << "mAP@0.5:0.95:  " << sum.map5095 << "\n";
  std::cout << "per-class AP@0.5:\n";
  for (std::size_t c = 0; c < sum.per_class_ap50.size(); ++c) {
    std::cout << "  class " << c << ": ";
    if (std::isnan(sum.per_class_ap50[c]))
      std::cout << "- (no gt, no dets)\n";
    else
      std::cout << sum.per_class_ap50[c] << "\n";
  }

  if (!json_out.empty()) {
    nlohmann::json j;
    j["images"] = gts.size();
    j["precision"] = sum.precision;
    j["recall"] = sum.recall;
    j["map50"] = sum.map50;
    j["map50_95"] = sum.map5095;
    for (double ap : sum.per_class_ap50)
      j["per_class_ap50"].push_back(std::isnan(ap) ? nlohmann::json(nullptr)
                                                   : nlohmann::json(ap));
    std::ofstream f(json_out, std::ios::trunc);
    HGO_CHECK(f, "cannot write '" << json_out << "'");
    f << j.dump(2) << "\n";
    std::cout << "wrote " << json_out << "\n";
  }
  return 0;
}

int cmd_bench(const GlobalArgs& g, const ModelFlags& mf, const std::string& weights, int iters,
              int warmup) {
  AppConfig cfg = base_config(g);
  mf.apply(cfg.model);
  hgo::ModelGraph graph = hgo::build_model(cfg.model, g.seed);
  if (!weights.empty()) hgo::load_weights(graph, weights);

  const hgo::CostReport rep = graph.cost();
  std::cout << "benchmarking " << cfg.model.backbone << "-" << cfg.model.scale << " at "
            << cfg.model.input_size << "x" << cfg.model.input_size << " (" << warmup
            << " warmup + " << iters << " timed)\n";
  const hgo::BenchResult r = hgo::bench_forward(graph, iters, warmup);
  std::cout << std::fixed << std::setprecision(2);
  std::cout << "wall time:  " << r.total_seconds << " s\n";
  std::cout << "per image:  " << r.ms_per_image << " ms\n";
  std::cout << "fps:        " << r.fps << "\n";
  std::cout << "gflops:     " << rep.gflops() << " (analytic, 2 x MACs)\n";
  return 0;
}

int cmd_synth(const GlobalArgs& g, const std::string& out_dir, int n, int size) {
  hgo::generate_synth_dataset(out_dir, n, size, g.seed);
  const int n_train = static_cast<int>(std::lround(0.8 * n));
  const int n_val = static_cast<int>(std::lround(0.1 * n));
  std::cout << "wrote " << n << " scenes (" << size << "x" << size << ") to " << out_dir << "\n";
  std::cout << "split " << n_train << "/" << n_val << "/" << n - n_train - n_val
            << " train/val/test\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"detector family toolkit: summaries, cost reports, inference, toy training"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "RNG seed (weights init, data, sampling)");

  auto* sum_cmd = app.add_subcommand("summary", "print the layer table and totals");
  ModelFlags sum_mf;
  sum_mf.attach(sum_cmd);

  auto* cost_cmd = app.add_subcommand("cost", "per-op MAC/param breakdown");
  ModelFlags cost_mf;
  cost_mf.attach(cost_cmd);
  std::string cost_json;
  cost_cmd->add_option("--json", cost_json, "also write the report as JSON");

  auto* infer_cmd = app.add_subcommand("infer", "detect objects in one image");
  ModelFlags infer_mf;
  infer_mf.attach(infer_cmd);
  std::string infer_weights, infer_image, infer_out;
  double infer_conf = 0, infer_nms = 0;
  infer_cmd->add_option("--weights", infer_weights, "weights file")->check(CLI::ExistingFile);
  infer_cmd->add_option("--image", infer_image, "PPM (P6) or 24-bit BMP")
      ->required()
      ->check(CLI::ExistingFile);
  infer_cmd->add_option("--out", infer_out, "annotated PPM path");
  infer_cmd->add_option("--conf", infer_conf, "confidence threshold (default 0.25)");
  infer_cmd->add_option("--nms", infer_nms, "NMS IoU threshold (default 0.45)");

  auto* train_cmd = app.add_subcommand("train", "toy SGD training on a synthetic dataset");
  std::string train_data, train_out = "trained.hgow", train_curve, train_loss;
  int train_steps = 300, train_batch = 0;
  double train_lr = 0;
  train_cmd->add_option("--data", train_data, "dataset dir from `hgo synth`")->required();
  train_cmd->add_option("--out", train_out, "output weights file");
  train_cmd->add_option("--curve", train_curve, "per-step loss CSV");
  auto* steps_opt = train_cmd->add_option("--steps", train_steps, "SGD steps (default 300)");
  train_cmd->add_option("--batch", train_batch, "images per step (default 4)");
  train_cmd->add_option("--lr", train_lr, "learning rate (default 0.01)");
  train_cmd->add_option("--loss", train_loss, "diou | ciou | mpdiou | inner-ciou");

  auto* eval_cmd = app.add_subcommand("eval", "detection metrics (mAP, precision, recall)");
  ModelFlags eval_mf;
  eval_mf.attach(eval_cmd);
  std::string eval_labels, eval_preds, eval_weights, eval_data, eval_split = "val";
  std::string eval_save_preds, eval_json;
  double eval_iou = 0.5;
  eval_cmd->add_option("--labels", eval_labels, "GT label dir (YOLO txt)");
  eval_cmd->add_option("--preds", eval_preds, "prediction dir ('class conf cx cy w h')");
  eval_cmd->add_option("--weights", eval_weights, "run this model instead of reading --preds");
  eval_cmd->add_option("--data", eval_data, "dataset dir (with --weights)");
  eval_cmd->add_option("--split", eval_split, "train | val | test | all (default val)");
  eval_cmd->add_option("--save-preds", eval_save_preds, "dump model predictions here");
  eval_cmd->add_option("--json", eval_json, "machine-readable metrics file");
  eval_cmd->add_option("--iou", eval_iou, "precision/recall match threshold (default 0.5)");

  auto* bench_cmd = app.add_subcommand("bench", "wall-clock forward-pass benchmark");
  ModelFlags bench_mf;
  bench_mf.attach(bench_cmd);
  std::string bench_weights;
  int bench_iters = 100, bench_warmup = 10;
  bench_cmd->add_option("--weights", bench_weights)->check(CLI::ExistingFile);
  bench_cmd->add_option("--iters", bench_iters, "timed iterations (default 100)");
  bench_cmd->add_option("--warmup", bench_warmup, "warmup iterations (default 10)");

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic shape dataset");
  std::string synth_out;
  int synth_n = 80, synth_size = 64;
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--n", synth_n, "number of images (default 80)");
  synth_cmd->add_option("--size", synth_size, "square image size (default 64)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sum_cmd->parsed()) return cmd_summary(g, sum_mf);
    if (cost_cmd->parsed()) return cmd_cost(g, cost_mf, cost_json);
    if (infer_cmd->parsed())
      return cmd_infer(g, infer_mf, infer_weights, infer_image, infer_out, infer_conf, infer_nms);
    if (train_cmd->parsed())
      return cmd_train(g, train_data, train_out, train_curve, steps_opt, train_steps, train_batch,
                       train_lr, train_loss);
    if (eval_cmd->parsed())
      return cmd_eval(g, eval_mf, eval_labels, eval_preds, eval_weights, eval_data, eval_split,
                      eval_save_preds, eval_json, eval_iou);
    if (bench_cmd->parsed()) return cmd_bench(g, bench_mf, bench_weights, bench_iters, bench_warmup);
    if (synth_cmd->parsed()) return cmd_synth(g, synth_out, synth_n, synth_size);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
