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

/// @file patchdesc.hpp
/// @brief Tissue occupancy and colour descriptors for raw patch tiles.
///
/// Tissue detection is a brightness rule: a pixel is background when all
/// three channels exceed `bg_threshold`. Descriptors are per-channel mean
/// and population standard deviation of intensities scaled by 1/255.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "crisp/cohort.hpp"

namespace crisp {

inline constexpr double kDefaultOccupancyMin = 0.70;
inline constexpr std::uint8_t kDefaultBackgroundThreshold = 220;
inline constexpr std::size_t kDefaultTileSize = 256;

/// 8-bit RGB image, interleaved, row-major.
class PatchImage {
 public:
  PatchImage() = default;
  PatchImage(std::size_t width, std::size_t height,
             std::vector<std::uint8_t> rgb);

  /// Uniform image filled with one colour.
  static PatchImage filled(std::size_t width, std::size_t height,
                           std::uint8_t r, std::uint8_t g, std::uint8_t b);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t pixel_count() const { return width_ * height_; }
  std::span<const std::uint8_t> rgb() const { return rgb_; }
  std::span<std::uint8_t> rgb() { return rgb_; }

  void set(std::size_t x, std::size_t y, std::uint8_t r, std::uint8_t g,
           std::uint8_t b);

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> rgb_;
};

/// Fraction of pixels that are tissue, i.e. not (R,G,B all > bg_threshold).
double occupancy(const PatchImage& img,
                 std::uint8_t bg_threshold = kDefaultBackgroundThreshold);

Descriptor descriptor(const PatchImage& img);

struct Tile {
  std::uint32_t grid_x = 0;
  std::uint32_t grid_y = 0;
  PatchImage image;
};

struct FilterResult {
  std::vector<PatchRecord> records;  // raster order
  std::size_t discarded = 0;         // tiles below occ_min
  /// Set when no tile survived; callers surface this as a warning.
  bool empty_warning = false;
};

/// Keeps tiles with occupancy >= occ_min (equality retained) and attaches
/// descriptors. Tiles may arrive in any order; the result is raster-ordered.
/// Tiles are processed on up to `jobs` threads (0 = all cores).
FilterResult filter_and_describe(
    const std::string& slide_id, std::span<const Tile> tiles,
    double occ_min = kDefaultOccupancyMin,
    std::uint8_t bg_threshold = kDefaultBackgroundThreshold,
    std::size_t jobs = 1);

PatchImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const PatchImage& img);

struct TileDirectoryOptions {
  double occ_min = kDefaultOccupancyMin;
  std::uint8_t bg_threshold = kDefaultBackgroundThreshold;
  std::size_t tile_size = kDefaultTileSize;
  std::size_t jobs = 1;
};

/// Reads every `<slide_id>__<grid_x>_<grid_y>.png` in `dir`, groups the
/// tiles by slide and runs filter_and_describe on each group. Tiles whose
/// size differs from `tile_size` are rejected.
std::map<std::string, FilterResult> describe_tile_directory(
    const std::filesystem::path& dir, const TileDirectoryOptions& options);

}  // namespace crisp
