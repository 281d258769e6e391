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

#include "crisp/kmeans.hpp"

#include <algorithm>
#include <limits>

#include "crisp/error.hpp"

namespace crisp {

namespace {

std::vector<Descriptor> kmeanspp_init(std::span<const Descriptor> points,
                                      std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = points.size();
  std::vector<Descriptor> centers;
  centers.reserve(k);
  std::vector<bool> chosen(n, false);

  std::size_t first = uniform_index(rng, n);
  centers.push_back(points[first]);
  chosen[first] = true;

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    d2[i] = squared_distance(points[i], centers[0]);
  }
  while (centers.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        // Rounding left target at the very end of the cumulative sum.
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // Every remaining point coincides with a centre; take an unused one.
      std::vector<std::size_t> unused;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) unused.push_back(i);
      }
      pick = unused[uniform_index(rng, unused.size())];
    }
    chosen[pick] = true;
    centers.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
    }
  }
  return centers;
}

std::size_t nearest_center(const Descriptor& p,
                           std::span<const Descriptor> centers) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    const double d = squared_distance(p, centers[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

void assign(std::span<const Descriptor> points,
            std::span<const Descriptor> centers,
            std::vector<std::size_t>& labels) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    labels[i] = nearest_center(points[i], centers);
  }
}

// Moves the farthest-from-centroid point of a multi-member cluster into
// each empty cluster, and makes it that cluster's centroid.
void reseed_empty(std::span<const Descriptor> points,
                  std::vector<Descriptor>& centers,
                  std::vector<std::size_t>& labels) {
  const std::size_t k = centers.size();
  std::vector<std::size_t> sizes(k, 0);
  for (auto l : labels) ++sizes[l];
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] > 0) continue;
    std::size_t far = points.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (sizes[labels[i]] < 2) continue;
      const double d = squared_distance(points[i], centers[labels[i]]);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far == points.size()) break;  // fewer points than clusters
    --sizes[labels[far]];
    labels[far] = c;
    sizes[c] = 1;
    centers[c] = points[far];
  }
}

std::vector<Descriptor> update_centers(std::span<const Descriptor> points,
                                       std::span<const std::size_t> labels,
                                       const std::vector<Descriptor>& prev) {
  const std::size_t k = prev.size();
  std::vector<Descriptor> sum(k, Descriptor{});
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t d = 0; d < kDescriptorDim; ++d) {
      sum[labels[i]][d] += points[i][d];
    }
    ++count[labels[i]];
  }
  std::vector<Descriptor> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    if (count[c] == 0) {
      out[c] = prev[c];
      continue;
    }
    for (std::size_t d = 0; d < kDescriptorDim; ++d) {
      out[c][d] = sum[c][d] / static_cast<double>(count[c]);
    }
  }
  return out;
}

}  // namespace

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t range = n;
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return static_cast<std::size_t>(v % range);
}

double squared_distance(const Descriptor& a, const Descriptor& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < kDescriptorDim; ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

double inertia(std::span<const Descriptor> points,
               std::span<const std::size_t> labels,
               std::span<const Descriptor> centroids) {
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    s += squared_distance(points[i], centroids[labels[i]]);
  }
  return s;
}

KMeansResult kmeans(std::span<const Descriptor> points,
                    const KMeansOptions& options) {
  if (points.empty()) throw ValidationError("k-means on an empty point set");
  if (options.k == 0) throw ValidationError("k-means needs k >= 1");
  if (options.max_iter == 0) throw ValidationError("max_iter must be >= 1");

  const std::size_t k = std::min(options.k, points.size());
  std::mt19937_64 rng(options.seed);

  KMeansResult r;
  r.centroids = kmeanspp_init(points, k, rng);
  r.labels.assign(points.size(), 0);
  assign(points, r.centroids, r.labels);
  reseed_empty(points, r.centroids, r.labels);

  std::vector<std::size_t> next(points.size());
  for (std::size_t it = 0; it < options.max_iter; ++it) {
    r.centroids = update_centers(points, r.labels, r.centroids);
    r.inertia_history.push_back(inertia(points, r.labels, r.centroids));
    ++r.iterations;
    assign(points, r.centroids, next);
    reseed_empty(points, r.centroids, next);
    if (next == r.labels) {
      r.converged = true;
      break;
    }
    r.labels.swap(next);
  }
  if (!r.converged) {
    // Labels moved on the last pass; bring centroids in line with them.
    r.centroids = update_centers(points, r.labels, r.centroids);
  }
  return r;
}

}  // namespace crisp
