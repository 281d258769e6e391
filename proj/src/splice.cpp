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

#include "crisp/splice.hpp"

#include <algorithm>
#include <cmath>

#include "crisp/error.hpp"

namespace crisp {

namespace {

double descriptor_distance(const Descriptor& a, const Descriptor& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < kDescriptorDim; ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return std::sqrt(s);
}

void check_finite(std::span<const PatchRecord> patches) {
  for (const auto& p : patches) {
    for (double v : p.descriptor) {
      if (!std::isfinite(v)) {
        throw ValidationError("patch '" + p.patch_id +
                              "': non-finite descriptor");
      }
    }
  }
}

SlideCollage run(const std::string& id, std::span<const PatchRecord> patches,
                 const SpliceConfig& cfg) {
  validate(cfg);
  check_finite(patches);
  std::vector<Descriptor> points;
  points.reserve(patches.size());
  for (const auto& p : patches) points.push_back(p.descriptor);

  SlideCollage out;
  out.slide_id = id;
  for (std::size_t i : splice_indices(points, cfg.s_t)) {
    out.kept.push_back(patches[i].patch_id);
  }
  out.discarded_count = patches.size() - out.kept.size();
  return out;
}

}  // namespace

void validate(const SpliceConfig& cfg) {
  if (!(cfg.s_t >= 0.0 && cfg.s_t <= 100.0)) {
    throw ValidationError("s_t must lie in [0, 100]");
  }
}

std::size_t nearest_rank_index(double s_t, std::size_t m) {
  if (m == 0) return 0;
  // s_t * m is exact for integral s_t, so multiples of 100 divide exactly.
  const double rank = std::ceil(s_t * static_cast<double>(m) / 100.0);
  if (rank <= 1.0) return 0;
  return std::min(static_cast<std::size_t>(rank) - 1, m - 1);
}

std::vector<std::size_t> splice_indices(std::span<const Descriptor> points,
                                        double s_t) {
  std::vector<std::size_t> active(points.size());
  for (std::size_t i = 0; i < active.size(); ++i) active[i] = i;

  std::vector<std::size_t> kept;
  std::vector<double> dist;
  std::vector<double> scratch;
  std::vector<std::size_t> survivors;
  while (!active.empty()) {
    const std::size_t ref = active.front();
    kept.push_back(ref);
    const std::size_t m = active.size() - 1;
    if (m == 0) break;

    dist.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      dist[j] = descriptor_distance(points[ref], points[active[j + 1]]);
    }
    scratch = dist;
    const auto nth = scratch.begin() +
                     static_cast<std::ptrdiff_t>(nearest_rank_index(s_t, m));
    std::nth_element(scratch.begin(), nth, scratch.end());
    const double threshold = *nth;

    survivors.clear();
    for (std::size_t j = 0; j < m; ++j) {
      // Exact duplicates of the reference are always redundant.
      if (dist[j] >= threshold && dist[j] > 0.0) {
        survivors.push_back(active[j + 1]);
      }
    }
    active.swap(survivors);
  }
  return kept;
}

SlideCollage splice_slide(const std::string& slide_id,
                          std::span<const PatchRecord> patches,
                          const SpliceConfig& cfg) {
  return run(slide_id, patches, cfg);
}

void sort_pool(std::vector<PatchRecord>& pool) {
  std::stable_sort(pool.begin(), pool.end(),
                   [](const PatchRecord& a, const PatchRecord& b) {
                     if (a.slide_id != b.slide_id) {
                       return a.slide_id < b.slide_id;
                     }
                     return raster_less(a, b);
                   });
}

SlideCollage splice_case_pool(const std::string& case_id,
                              std::span<const PatchRecord> pool,
                              const SpliceConfig& cfg) {
  std::vector<PatchRecord> ordered(pool.begin(), pool.end());
  sort_pool(ordered);
  return run(case_id, ordered, cfg);
}

}  // namespace crisp
