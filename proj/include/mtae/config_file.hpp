#pragma once

#include <string>
#include <string_view>

#include "mtae/model.hpp"
#include "mtae/train.hpp"

namespace mtae {

/// Model and training settings as read from a `key = value` file.
struct RunConfig {
  ModelConfig model = ModelConfig::desk();
  TrainConfig train;

  bool operator==(const RunConfig&) const = default;
};

/// Blank lines and `#` comments are ignored. Unknown keys, repeated keys and
/// malformed values are config errors carrying the line number. Missing keys
/// keep their defaults.
RunConfig parse_config(std::string_view text);
/// Every key, one per line, in a fixed order. Reads back to an equal config.
std::string write_config(const RunConfig& cfg);

RunConfig read_config_file(const std::string& path);

}  // namespace mtae
