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

#include "crisp/patchdesc.hpp"

#include <png.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <regex>

#include "crisp/error.hpp"
#include "crisp/parallel.hpp"

namespace crisp {

namespace fs = std::filesystem;

PatchImage::PatchImage(std::size_t width, std::size_t height,
                       std::vector<std::uint8_t> rgb)
    : width_(width), height_(height), rgb_(std::move(rgb)) {
  if (width_ == 0 || height_ == 0) {
    throw ValidationError("patch image must be non-empty");
  }
  if (rgb_.size() != width_ * height_ * 3) {
    throw ValidationError("patch image buffer has " +
                          std::to_string(rgb_.size()) + " bytes, expected " +
                          std::to_string(width_ * height_ * 3));
  }
}

PatchImage PatchImage::filled(std::size_t width, std::size_t height,
                              std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  std::vector<std::uint8_t> rgb(width * height * 3);
  for (std::size_t i = 0; i < width * height; ++i) {
    rgb[3 * i] = r;
    rgb[3 * i + 1] = g;
    rgb[3 * i + 2] = b;
  }
  return {width, height, std::move(rgb)};
}

void PatchImage::set(std::size_t x, std::size_t y, std::uint8_t r,
                     std::uint8_t g, std::uint8_t b) {
  const std::size_t i = 3 * (y * width_ + x);
  rgb_[i] = r;
  rgb_[i + 1] = g;
  rgb_[i + 2] = b;
}

double occupancy(const PatchImage& img, std::uint8_t bg_threshold) {
  const auto px = img.rgb();
  std::size_t tissue = 0;
  for (std::size_t i = 0; i < px.size(); i += 3) {
    const auto lo = std::min({px[i], px[i + 1], px[i + 2]});
    if (lo <= bg_threshold) ++tissue;
  }
  return static_cast<double>(tissue) / static_cast<double>(img.pixel_count());
}

Descriptor descriptor(const PatchImage& img) {
  const auto px = img.rgb();
  const double n = static_cast<double>(img.pixel_count());
  std::array<double, 3> sum{};
  for (std::size_t i = 0; i < px.size(); i += 3) {
    for (std::size_t c = 0; c < 3; ++c) sum[c] += px[i + c];
  }
  std::array<double, 3> mean{};
  for (std::size_t c = 0; c < 3; ++c) mean[c] = sum[c] / 255.0 / n;

  // Second pass keeps the variance non-negative without clamping.
  std::array<double, 3> sq{};
  for (std::size_t i = 0; i < px.size(); i += 3) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double d = px[i + c] / 255.0 - mean[c];
      sq[c] += d * d;
    }
  }
  Descriptor out{};
  for (std::size_t c = 0; c < 3; ++c) {
    out[c] = mean[c];
    out[3 + c] = std::min(0.5, std::sqrt(sq[c] / n));
  }
  return out;
}

FilterResult filter_and_describe(const std::string& slide_id,
                                 std::span<const Tile> tiles, double occ_min,
                                 std::uint8_t bg_threshold, std::size_t jobs) {
  if (!(occ_min >= 0.0 && occ_min <= 1.0)) {
    throw ValidationError("occ_min must lie in [0,1]");
  }
  std::vector<std::size_t> order(tiles.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ta = tiles[a];
    const auto& tb = tiles[b];
    return ta.grid_y != tb.grid_y ? ta.grid_y < tb.grid_y
                                  : ta.grid_x < tb.grid_x;
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    const auto& a = tiles[order[i - 1]];
    const auto& b = tiles[order[i]];
    if (a.grid_x == b.grid_x && a.grid_y == b.grid_y) {
      throw ValidationError("slide '" + slide_id + "': duplicate tile at (" +
                            std::to_string(a.grid_x) + "," +
                            std::to_string(a.grid_y) + ")");
    }
  }

  std::vector<std::optional<PatchRecord>> slots(tiles.size());
  parallel_for(order.size(), jobs, [&](std::size_t k) {
    const auto& t = tiles[order[k]];
    const double occ = occupancy(t.image, bg_threshold);
    if (occ < occ_min) return;
    PatchRecord r;
    r.slide_id = slide_id;
    r.grid_x = t.grid_x;
    r.grid_y = t.grid_y;
    r.patch_id = make_patch_id(slide_id, t.grid_x, t.grid_y);
    r.occupancy = occ;
    r.descriptor = descriptor(t.image);
    slots[k] = std::move(r);
  });

  FilterResult result;
  for (auto& s : slots) {
    if (s) {
      result.records.push_back(std::move(*s));
    } else {
      ++result.discarded;
    }
  }
  result.empty_warning = result.records.empty();
  return result;
}

// ---------------------------------------------------------------------------
// PNG I/O (libpng simplified API)
// ---------------------------------------------------------------------------

PatchImage read_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError(path.string() + ": " + msg);
  }
  return {image.width, image.height, std::move(rgb)};
}

void write_png(const fs::path& path, const PatchImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.rgb().data(), 0,
                               nullptr)) {
    throw IoError(path.string() + ": " + image.message);
  }
}

std::map<std::string, FilterResult> describe_tile_directory(
    const fs::path& dir, const TileDirectoryOptions& options) {
  if (!fs::is_directory(dir)) {
    throw IoError("tile directory not found: " + dir.string());
  }
  static const std::regex kName(R"(^(.+)__([0-9]+)_([0-9]+)\.png$)");

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::map<std::string, std::vector<Tile>> by_slide;
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    std::smatch m;
    if (!std::regex_match(name, m, kName)) continue;
    Tile t;
    t.grid_x = static_cast<std::uint32_t>(std::stoul(m[2].str()));
    t.grid_y = static_cast<std::uint32_t>(std::stoul(m[3].str()));
    t.image = read_png(f);
    if (t.image.width() != options.tile_size ||
        t.image.height() != options.tile_size) {
      throw ValidationError(name + ": tile is " +
                            std::to_string(t.image.width()) + "x" +
                            std::to_string(t.image.height()) +
                            ", expected " + std::to_string(options.tile_size) +
                            "x" + std::to_string(options.tile_size));
    }
    by_slide[m[1].str()].push_back(std::move(t));
  }

  std::map<std::string, FilterResult> out;
  for (const auto& [slide_id, tiles] : by_slide) {
    out.emplace(slide_id,
                filter_and_describe(slide_id, tiles, options.occ_min,
                                    options.bg_threshold, options.jobs));
  }
  return out;
}

}  // namespace crisp
