#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mitonet/augment.hpp"
#include "mitonet/train.hpp"
#include "mitonet/unet.hpp"

namespace mito {

/// Flat `key = value` pairs. Blank lines and lines starting with '#' are
/// ignored; a repeated key keeps its last value.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config(std::string_view text, const std::string& origin = "<config>");
ConfigMap read_config(const std::filesystem::path& path);

/// Applies `key=value` strings on top of `base`.
void apply_overrides(ConfigMap& base, const std::vector<std::string>& overrides);

struct RunConfig {
  UNetConfig model;
  TrainSpec train;
  AugmentSpec augment;  // output_size always follows model.input_size
};

/// Unknown keys and unparsable values raise Error{config} naming the key.
RunConfig make_run_config(const ConfigMap& map);

/// Every recognised key with its value under `config`; parses back to an
/// equal RunConfig.
ConfigMap to_config_map(const RunConfig& config);
std::string format_config(const ConfigMap& map);

const std::vector<std::string>& config_keys();

}  // namespace mito
