#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unsee/training/config.hpp"

namespace unsee {

// Flat `key=value` run configuration; `#` starts a comment. Keys mirror
// TrainConfig plus the data paths. Unknown keys and ill-typed values are
// Config errors naming the key.
struct RunConfig {
  TrainConfig train;
  std::filesystem::path corpus;
  std::filesystem::path dev;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> vocab;
};

// Keys that must be present: corpus, dev, out_dir, objective, variant, epochs.
const std::vector<std::string_view>& required_config_keys();
const std::vector<std::string_view>& known_config_keys();

// Relative paths are resolved against `base_dir`.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Every TrainConfig field as `key=value` lines, in known_config_keys() order.
std::string dump_train_config(const TrainConfig& cfg);

}  // namespace unsee
