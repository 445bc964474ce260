#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "cetn/losses.hpp"
#include "cetn/model.hpp"
#include "cetn/trainer.hpp"

namespace cetn {

/// Scalar or homogeneous list value from a config file or an override.
struct ConfigValue {
  std::variant<bool, long long, double, std::string, std::vector<double>,
               std::vector<std::string>>
      v;

  bool as_bool(const std::string& key) const;
  long long as_int(const std::string& key) const;
  double as_double(const std::string& key) const;
  std::string as_string(const std::string& key) const;
  std::vector<double> as_numbers(const std::string& key) const;
  std::vector<std::string> as_strings(const std::string& key) const;
  std::string render() const;  // TOML form
};

/// Flat "section.key" -> value map parsed from a TOML-style file:
/// [section] headers, key = value lines, # comments, strings quoted,
/// numbers, booleans and one-level arrays.
using FlatConfig = std::map<std::string, ConfigValue>;

FlatConfig parse_toml(const std::string& text, const std::string& origin = "<config>");
FlatConfig parse_toml_file(const std::string& path);

/// Apply a dotted-path override "section.key=value" on top of a parsed file.
void apply_override(FlatConfig& cfg, const std::string& spec);

/// Every tunable of one experiment, with the documented defaults.
struct ExperimentConfig {
  std::string data_dir;

  ModelConfig model;
  LossWeights loss;
  TrainerConfig trainer;
  SplitSpec split;
  int min_count = 2;

  /// Defaults overlaid with the file and then the overrides; rejects
  /// unknown keys.
  static ExperimentConfig resolve(const FlatConfig& flat);
  static ExperimentConfig from_file(const std::string& path,
                                    const std::vector<std::string>& overrides = {});

  /// The fully resolved configuration, re-renderable as TOML. Parsing the
  /// echo reproduces this config exactly.
  std::string echo_toml() const;
};

}  // namespace cetn
