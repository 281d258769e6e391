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

/// @file splice.hpp
/// @brief Stage 1: sequential percentile-threshold redundancy reduction.
///
/// The scan walks patches in raster order. The first still-active patch
/// becomes the reference and is admitted to the collage; Euclidean
/// descriptor distances to every other active patch are computed, and any
/// patch strictly below the s_t-th percentile of those distances (or at
/// distance exactly zero) is deactivated. The scan repeats on the next
/// active patch until none remain.
///
/// Percentile: nearest rank, index ceil(s_t/100 * m) - 1 clamped to
/// [0, m-1] over the m sorted distances of the current step.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "crisp/cohort.hpp"

namespace crisp {

struct SpliceConfig {
  double s_t = 25.0;  ///< percentile in [0, 100]
};

void validate(const SpliceConfig& cfg);

struct SlideCollage {
  std::string slide_id;
  std::vector<std::string> kept;  ///< admission order
  std::size_t discarded_count = 0;
};

/// Nearest-rank percentile index for `m` sorted values.
std::size_t nearest_rank_index(double s_t, std::size_t m);

/// Core scan over descriptors; returns admitted indices in admission order.
std::vector<std::size_t> splice_indices(std::span<const Descriptor> points,
                                        double s_t);

/// Throws ValidationError on a non-finite descriptor.
SlideCollage splice_slide(const std::string& slide_id,
                          std::span<const PatchRecord> patches,
                          const SpliceConfig& cfg);

/// Case-level re-selection: the pool is first ordered by slide_id, then
/// raster order within each slide, and scanned exactly like one slide.
/// The collage's slide_id field carries `case_id`.
SlideCollage splice_case_pool(const std::string& case_id,
                              std::span<const PatchRecord> pool,
                              const SpliceConfig& cfg);

/// Orders a pooled patch list by (slide_id, grid_y, grid_x).
void sort_pool(std::vector<PatchRecord>& pool);

}  // namespace crisp
