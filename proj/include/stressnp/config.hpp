#pragma once

// Flat key = value run configuration. '#' starts a comment, lists are
// comma separated, relative paths resolve against the config file's folder.

#include <filesystem>
#include <string>

#include "stressnp/eval.hpp"

namespace stressnp {

struct RunConfig {
  std::filesystem::path features;  // feature CSV produced by `extract`
  std::filesystem::path out_dir = "results";
  bool save_models = true;
  ExperimentConfig experiment;
};

/// Throws ConfigError naming the offending key for unknown keys, malformed
/// values, a missing `features` or `seed` key, or a features file that does
/// not exist.
RunConfig parse_run_config(const std::string& text,
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& file);

}  // namespace stressnp
