#pragma once

#include <string>

#include "hgo/pipeline.hpp"

namespace hgo {

// Everything the CLI can read from a JSON config file. Sections and keys are
// all optional; unknown keys are rejected so typos surface instead of being
// silently ignored.
struct AppConfig {
  ModelConfig model;
  TrainOptions train;
  RunConfig run;
};

AppConfig parse_config(const std::string& json_text, const std::string& origin = "<config>");
AppConfig load_config(const std::string& path);

std::string config_to_json(const AppConfig& cfg);  // round-trippable dump

}  // namespace hgo
