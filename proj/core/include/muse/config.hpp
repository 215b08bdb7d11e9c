#pragma once

#include <filesystem>
#include <string>

#include "muse/trainer.hpp"

namespace muse {

// Flat key = value run configuration for training. Unknown keys are
// rejected; every validation problem is reported at once.
struct RunConfig {
  std::string graph;
  std::string train_bundle;
  std::string val_bundle;   // optional
  std::string test_bundle;  // optional
  std::string checkpoint;
  std::string metrics;
  bool eval_train = false;  // also report train-split accuracy (uses the train bundle)
  TrainRunConfig train;
};

RunConfig parse_run_config(const std::string& text, const std::string& origin = "<config>");
RunConfig parse_run_config_file(const std::filesystem::path& path);

// Effective configuration, every key explicit; re-parses to an equal config.
std::string render_run_config(const RunConfig& cfg);

}  // namespace muse
