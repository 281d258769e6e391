// Copyright 2026 The CRISP Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/// @file cli.hpp
/// @brief The `crisp` command-line driver.
///
/// Subcommands: descriptors, splice, mosaic, retrieve, evaluate,
/// gridsearch, synth. Pipeline parameters resolve in increasing priority:
/// built-in defaults, the CRISP_SEED environment variable (seed only), the
/// `[pipeline]` table of a TOML file given by --config, then flags.
///
/// Exit codes: 0 success, 1 runtime failure (I/O, malformed data), 2 usage
/// or configuration error. Errors are printed to stderr as one JSON object.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "crisp/error.hpp"

namespace crisp {

struct PipelineConfig {
  double occ_min = 0.70;
  long bg_threshold = 220;
  long tile_size = 256;
  double s_t = 25.0;
  long k = 12;
  double alpha = 3.5;
  std::uint64_t seed = 724;
  std::string metric = "sum_max_cosine";
  std::vector<long> topk{1, 3, 5};
  long jobs = 0;  ///< 0: all available cores
  std::string stage2 = "kmeans";
  long max_iter = 300;
};

/// Every constraint violation in `cfg`, one message per field.
/// `allow_both_metrics` admits metric = "both" (grid search only).
std::vector<std::string> validate_config(const PipelineConfig& cfg,
                                         bool allow_both_metrics = false);

/// Overlays the `[pipeline]` table of `toml_text` onto `cfg`. Type errors
/// and unknown keys are appended to `errors`; parse errors throw
/// ParseError.
void apply_toml(PipelineConfig& cfg, const std::string& toml_text,
                std::vector<std::string>& errors);

/// Applies CRISP_SEED from the environment when set.
void apply_env(PipelineConfig& cfg, std::vector<std::string>& errors);

/// Raised with every configuration problem found.
class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<std::string> messages);
  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
};

/// Parses a value list: "a..b" (unit step), "a..b:step", "x,y,z" or "x".
std::vector<double> parse_range(const std::string& text);

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace crisp
