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

/// @file mosaic.hpp
/// @brief Stage 2: case mosaics from pooled per-slide collages.
///
/// The pool of one case is put in canonical order (slide_id, then raster
/// order), clustered with k-means on the colour descriptors, and from each
/// cluster the max(1, round_half_up(alpha/100 * size)) members nearest the
/// centroid are kept. Distance ties fall back to canonical pool order.
///
/// The Yottixel baseline mosaic is built here too: K=9 colour clusters with
/// 5% of each cluster kept by seeded uniform sampling.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "crisp/cohort.hpp"
#include "crisp/kmeans.hpp"

namespace crisp {

inline constexpr std::uint64_t kDefaultSeed = 724;
inline constexpr std::size_t kYottixelClusters = 9;
inline constexpr double kYottixelPercent = 5.0;

struct MosaicConfig {
  std::size_t k = 12;
  double alpha = 3.5;  ///< retention percentage, (0, 100]
  std::uint64_t seed = kDefaultSeed;
  std::size_t max_iter = 300;
};

void validate(const MosaicConfig& cfg);

struct CaseMosaic {
  std::string case_id;
  std::vector<std::string> kept;  ///< cluster order, nearest first
  std::map<std::string, std::size_t> cluster_assignments;
  std::vector<std::vector<std::string>> per_cluster_kept;
};

/// k-means over a canonically ordered pool; shared by every alpha.
struct PoolClustering {
  std::vector<PatchRecord> pool;  ///< canonical order
  KMeansResult kmeans;
};

/// max(1, round_half_up(alpha/100 * cluster_size)).
std::size_t retention_count(double alpha, std::size_t cluster_size);

PoolClustering cluster_pool(std::span<const PatchRecord> pool,
                            std::size_t k, std::uint64_t seed,
                            std::size_t max_iter = 300);

/// Centroid-proximal sampling over an existing clustering.
CaseMosaic sample_centroid_proximal(const std::string& case_id,
                                    const PoolClustering& clustering,
                                    double alpha);

/// Throws ValidationError when the pool is empty (no tissue for the case).
CaseMosaic build_case_mosaic(const std::string& case_id,
                             std::span<const PatchRecord> pool,
                             const MosaicConfig& cfg);

CaseMosaic build_yottixel_mosaic(const std::string& slide_id,
                                 std::span<const PatchRecord> patches,
                                 std::uint64_t seed = kDefaultSeed);

/// 100 * (1 - kept / total_raw), rounded to one decimal.
double reduction_stats(double total_raw, double kept);

}  // namespace crisp
