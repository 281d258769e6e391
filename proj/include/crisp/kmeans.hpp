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

/// @file kmeans.hpp
/// @brief Lloyd's k-means with k-means++ seeding on 6-d descriptors.
///
/// Single initialisation. Iterates until assignments stop changing or
/// `max_iter` updates have run. A cluster that empties during assignment is
/// re-seeded with the point farthest from its own centroid (taken from a
/// cluster that still has at least two members). Distance ties go to the
/// lowest centroid index. All randomness comes from a generator local to
/// the call.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "crisp/cohort.hpp"

namespace crisp {

struct KMeansOptions {
  std::size_t k = 8;
  std::uint64_t seed = 724;
  std::size_t max_iter = 300;
};

struct KMeansResult {
  std::vector<std::size_t> labels;      ///< cluster per point
  std::vector<Descriptor> centroids;    ///< k_eff centroids
  std::vector<double> inertia_history;  ///< SSE after each centroid update
  std::size_t iterations = 0;
  bool converged = false;

  std::size_t k() const { return centroids.size(); }
};

/// Uniform double in [0, 1) from 53 high bits; identical on every platform.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection; platform-independent.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);

double squared_distance(const Descriptor& a, const Descriptor& b);

/// Clusters `points` into min(k, |points|) groups. Throws ValidationError
/// when `points` is empty or k is zero.
KMeansResult kmeans(std::span<const Descriptor> points,
                    const KMeansOptions& options);

/// Within-cluster sum of squared distances.
double inertia(std::span<const Descriptor> points,
               std::span<const std::size_t> labels,
               std::span<const Descriptor> centroids);

}  // namespace crisp
