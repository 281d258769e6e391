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

/// @file synthgen.hpp
/// @brief Seeded synthetic cohorts at the descriptor/embedding level.
///
/// Embeddings of class c (mode m) are drawn from N(mu_cm, I) where the
/// mode means sit on distinct coordinate axes at distance
/// `separation` from each other, so `separation` is measured in units of
/// the intra-class standard deviation. Descriptors come from a per-(class,
/// mode) Gaussian mixture clamped into the valid descriptor box. A fraction
/// `redundancy` of every slide consists of near-duplicates (descriptor
/// distance < 1e-3) of earlier patches. Optional artifact patches carry
/// random colours and class-independent embeddings.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "crisp/cohort.hpp"

namespace crisp {

/// Descriptor-space radius of a near-duplicate around its source patch.
inline constexpr double kDuplicateEpsilon = 1e-3;

struct SynthSpec {
  std::string cohort_id = "synthetic";
  std::size_t n_classes = 3;
  std::size_t cases_per_class = 5;
  std::size_t slides_min = 1;
  std::size_t slides_max = 3;
  std::size_t patches_min = 80;
  std::size_t patches_max = 120;
  double separation = 10.0;
  double redundancy = 0.8;
  std::size_t embed_dim = 64;
  std::uint64_t seed = 724;
  /// Embedding/colour modes per class; slide j of a case shows mode j % M.
  std::size_t modes_per_class = 1;
  /// Fraction of non-duplicate patches that are class-independent artifacts.
  double artifact_rate = 0.0;
};

void validate(const SynthSpec& spec);

/// Builds the cohort in memory.
Cohort generate_cohort(const SynthSpec& spec);

/// Writes descriptor CSVs, CEM1 embeddings, id files and manifest.json
/// under `out_dir` and returns the manifest (absolute paths).
CohortManifest write_cohort(const Cohort& cohort,
                            const std::filesystem::path& out_dir);

/// generate_cohort + write_cohort.
CohortManifest generate(const SynthSpec& spec,
                        const std::filesystem::path& out_dir);

}  // namespace crisp
