#include "hgo/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace hgo {

using json = nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    HGO_CHECK(ok, "unknown config key '" << (section.empty() ? key : section + "." + key) << "'");
  }
}

template <typename T>
void get_to(const json& obj, const char* key, T& out, const std::string& section) {
  if (!obj.contains(key)) return;
  try {
    obj.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw Error("config key '" + section + "." + key + "': " + e.what());
  }
}

}  // namespace

AppConfig parse_config(const std::string& json_text, const std::string& origin) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(origin + ": " + e.what());
  }
  HGO_CHECK(root.is_object(), origin << ": top level must be a JSON object");
  check_keys(root, "", {"model", "train", "eval"});

  AppConfig cfg;
  if (root.contains("model")) {
    const json& m = root.at("model");
    HGO_CHECK(m.is_object(), origin << ": 'model' must be an object");
    check_keys(m, "model",
               {"scale", "backbone", "head", "num_classes", "input_size", "reg_max",
                "ghost_stages", "head_layer1", "head_layer2", "head_partial_ratio"});
    get_to(m, "scale", cfg.model.scale, "model");
    get_to(m, "backbone", cfg.model.backbone, "model");
    get_to(m, "head", cfg.model.head, "model");
    get_to(m, "num_classes", cfg.model.num_classes, "model");
    get_to(m, "input_size", cfg.model.input_size, "model");
    get_to(m, "reg_max", cfg.model.reg_max, "model");
    get_to(m, "ghost_stages", cfg.model.ghost_stages, "model");
    if (m.contains("head_layer1"))
      cfg.model.head_layer1 = head_layer_from_string(m.at("head_layer1").get<std::string>());
    if (m.contains("head_layer2"))
      cfg.model.head_layer2 = head_layer_from_string(m.at("head_layer2").get<std::string>());
    get_to(m, "head_partial_ratio", cfg.model.head_partial_ratio, "model");
  }
  if (root.contains("train")) {
    const json& t = root.at("train");
    HGO_CHECK(t.is_object(), origin << ": 'train' must be an object");
    check_keys(t, "train",
               {"box_loss", "lr", "momentum", "steps", "batch", "box_weight", "dfl_weight",
                "cls_weight", "inner_ratio"});
    if (t.contains("box_loss"))
      cfg.train.box_loss = box_loss_from_string(t.at("box_loss").get<std::string>());
    get_to(t, "lr", cfg.train.lr, "train");
    get_to(t, "momentum", cfg.train.momentum, "train");
    get_to(t, "steps", cfg.train.steps, "train");
    get_to(t, "batch", cfg.train.batch, "train");
    get_to(t, "box_weight", cfg.train.weights.box, "train");
    get_to(t, "dfl_weight", cfg.train.weights.dfl, "train");
    get_to(t, "cls_weight", cfg.train.weights.cls, "train");
    get_to(t, "inner_ratio", cfg.train.inner_ratio, "train");
  }
  if (root.contains("eval")) {
    const json& e = root.at("eval");
    HGO_CHECK(e.is_object(), origin << ": 'eval' must be an object");
    check_keys(e, "eval", {"conf_threshold", "nms_iou", "max_detections"});
    get_to(e, "conf_threshold", cfg.run.conf_threshold, "eval");
    get_to(e, "nms_iou", cfg.run.nms_iou, "eval");
    get_to(e, "max_detections", cfg.run.max_detections, "eval");
  }

  cfg.model.validate();
  cfg.train.validate();
  cfg.run.validate();
  return cfg;
}

AppConfig load_config(const std::string& path) {
  std::ifstream f(path);
  HGO_CHECK(f, "cannot open config '" << path << "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

std::string config_to_json(const AppConfig& cfg) {
  json root;
  root["model"] = {{"scale", cfg.model.scale},
                   {"backbone", cfg.model.backbone},
                   {"head", cfg.model.head},
                   {"num_classes", cfg.model.num_classes},
                   {"input_size", cfg.model.input_size},
                   {"reg_max", cfg.model.reg_max},
                   {"ghost_stages", cfg.model.ghost_stages},
                   {"head_layer1", to_string(cfg.model.head_layer1)},
                   {"head_layer2", to_string(cfg.model.head_layer2)},
                   {"head_partial_ratio", cfg.model.head_partial_ratio}};
  root["train"] = {{"box_loss", to_string(cfg.train.box_loss)},
                   {"lr", cfg.train.lr},
                   {"momentum", cfg.train.momentum},
                   {"steps", cfg.train.steps},
                   {"batch", cfg.train.batch},
                   {"box_weight", cfg.train.weights.box},
                   {"dfl_weight", cfg.train.weights.dfl},
                   {"cls_weight", cfg.train.weights.cls},
                   {"inner_ratio", cfg.train.inner_ratio}};
  root["eval"] = {{"conf_threshold", cfg.run.conf_threshold},
                  {"nms_iou", cfg.run.nms_iou},
                  {"max_detections", cfg.run.max_detections}};
  return root.dump(2) + "\n";
}

}  // namespace hgo
