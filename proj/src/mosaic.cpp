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

#include "crisp/mosaic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crisp/error.hpp"
#include "crisp/splice.hpp"

namespace crisp {

namespace {

std::vector<std::vector<std::size_t>> members_by_cluster(
    const KMeansResult& km) {
  std::vector<std::vector<std::size_t>> members(km.k());
  for (std::size_t i = 0; i < km.labels.size(); ++i) {
    members[km.labels[i]].push_back(i);
  }
  return members;
}

CaseMosaic make_mosaic(const std::string& id, const PoolClustering& cl) {
  CaseMosaic m;
  m.case_id = id;
  for (std::size_t i = 0; i < cl.pool.size(); ++i) {
    m.cluster_assignments.emplace(cl.pool[i].patch_id, cl.kmeans.labels[i]);
  }
  m.per_cluster_kept.resize(cl.kmeans.k());
  return m;
}

}  // namespace

void validate(const MosaicConfig& cfg) {
  if (cfg.k < 1) throw ValidationError("K must be >= 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 100.0)) {
    throw ValidationError("alpha must lie in (0, 100]");
  }
  if (cfg.max_iter < 1) throw ValidationError("max_iter must be >= 1");
}

std::size_t retention_count(double alpha, std::size_t cluster_size) {
  const double exact = alpha * static_cast<double>(cluster_size) / 100.0;
  const auto rounded = static_cast<std::size_t>(std::floor(exact + 0.5));
  return std::clamp<std::size_t>(rounded, 1, std::max<std::size_t>(1, cluster_size));
}

PoolClustering cluster_pool(std::span<const PatchRecord> pool, std::size_t k,
                            std::uint64_t seed, std::size_t max_iter) {
  if (pool.empty()) {
    throw ValidationError("case pool is empty: no tissue patches to cluster");
  }
  PoolClustering out;
  out.pool.assign(pool.begin(), pool.end());
  sort_pool(out.pool);
  std::vector<Descriptor> points;
  points.reserve(out.pool.size());
  for (const auto& p : out.pool) points.push_back(p.descriptor);
  out.kmeans = kmeans(points, {.k = k, .seed = seed, .max_iter = max_iter});
  return out;
}

CaseMosaic sample_centroid_proximal(const std::string& case_id,
                                    const PoolClustering& cl, double alpha) {
  CaseMosaic m = make_mosaic(case_id, cl);
  const auto members = members_by_cluster(cl.kmeans);
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto idx = members[c];
    if (idx.empty()) continue;
    const auto& centroid = cl.kmeans.centroids[c];
    std::vector<double> d(cl.pool.size());
    for (auto i : idx) d[i] = squared_distance(cl.pool[i].descriptor, centroid);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
    const std::size_t keep = retention_count(alpha, idx.size());
    for (std::size_t j = 0; j < keep; ++j) {
      m.per_cluster_kept[c].push_back(cl.pool[idx[j]].patch_id);
      m.kept.push_back(cl.pool[idx[j]].patch_id);
    }
  }
  return m;
}

CaseMosaic build_case_mosaic(const std::string& case_id,
                             std::span<const PatchRecord> pool,
                             const MosaicConfig& cfg) {
  validate(cfg);
  return sample_centroid_proximal(
      case_id, cluster_pool(pool, cfg.k, cfg.seed, cfg.max_iter), cfg.alpha);
}

CaseMosaic build_yottixel_mosaic(const std::string& slide_id,
                                 std::span<const PatchRecord> patches,
                                 std::uint64_t seed) {
  const auto cl = cluster_pool(patches, kYottixelClusters, seed);
  CaseMosaic m = make_mosaic(slide_id, cl);
  // Separate stream from the one that seeded k-means.
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  const auto members = members_by_cluster(cl.kmeans);
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto idx = members[c];
    if (idx.empty()) continue;
    const std::size_t keep = retention_count(kYottixelPercent, idx.size());
    // Partial Fisher-Yates: the first `keep` slots become the sample.
    for (std::size_t j = 0; j < keep; ++j) {
      const std::size_t r = j + uniform_index(rng, idx.size() - j);
      std::swap(idx[j], idx[r]);
    }
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    for (auto i : idx) {
      m.per_cluster_kept[c].push_back(cl.pool[i].patch_id);
      m.kept.push_back(cl.pool[i].patch_id);
    }
  }
  return m;
}

double reduction_stats(double total_raw, double kept) {
  if (!(total_raw > 0.0)) throw ValidationError("total_raw must be positive");
  if (!(kept >= 0.0 && kept <= total_raw)) {
    throw ValidationError("kept must lie in [0, total_raw]");
  }
  const double pct = 100.0 * (1.0 - kept / total_raw);
  return std::round(pct * 10.0) / 10.0;
}

}  // namespace crisp
