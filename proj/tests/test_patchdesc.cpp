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

#include <algorithm>
#include <random>

#include "crisp/error.hpp"
#include "crisp/patchdesc.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace crisp;
using crisp::testing::TempDir;

namespace {

// 10x10 white tile with the first `tissue` pixels painted (100,50,50).
PatchImage tile_with_tissue(std::size_t tissue) {
  auto img = PatchImage::filled(10, 10, 255, 255, 255);
  for (std::size_t i = 0; i < tissue; ++i) img.set(i % 10, i / 10, 100, 50, 50);
  return img;
}

PatchImage random_image(std::mt19937_64& rng, std::size_t w, std::size_t h) {
  std::vector<std::uint8_t> px(w * h * 3);
  for (auto& v : px) v = static_cast<std::uint8_t>(rng() & 0xff);
  return PatchImage(w, h, px);
}

}  // namespace

TEST_CASE("occupancy") {
  CHECK(occupancy(PatchImage::filled(8, 8, 255, 255, 255), 220) == 0.0);
  CHECK(occupancy(PatchImage::filled(8, 8, 0, 0, 0), 220) == 1.0);
  CHECK(occupancy(tile_with_tissue(50), 220) == 0.5);
  // min channel exactly at the threshold counts as tissue
  CHECK(occupancy(PatchImage::filled(4, 4, 250, 220, 255), 220) == 1.0);
  CHECK(occupancy(PatchImage::filled(4, 4, 250, 221, 255), 220) == 0.0);
}

TEST_CASE("descriptor") {
  SUBCASE("uniform gray 128") {
    const auto d = descriptor(PatchImage::filled(16, 16, 128, 128, 128));
    for (int c = 0; c < 3; ++c) {
      CHECK(d[c] == doctest::Approx(128.0 / 255.0).epsilon(1e-12));
      CHECK(d[c + 3] == 0.0);
    }
  }
  SUBCASE("checkerboard of 0 and 255") {
    auto img = PatchImage::filled(8, 8, 0, 0, 0);
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x)
        if ((x + y) % 2) img.set(x, y, 255, 255, 255);
    const auto d = descriptor(img);
    for (int c = 0; c < 6; ++c) CHECK(d[c] == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("all zero") {
    const auto d = descriptor(PatchImage::filled(5, 5, 0, 0, 0));
    for (double v : d) CHECK(v == 0.0);
  }
  SUBCASE("property: ranges and pixel-permutation invariance") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t w = 1 + rng() % 20, h = 1 + rng() % 20;
      auto img = random_image(rng, w, h);
      const auto d = descriptor(img);
      for (int c = 0; c < 3; ++c) {
        CHECK(d[c] >= 0.0);
        CHECK(d[c] <= 1.0);
        CHECK(d[c + 3] >= 0.0);
        CHECK(d[c + 3] <= 0.5);
      }
      // shuffle whole pixels
      std::vector<std::array<std::uint8_t, 3>> px(w * h);
      auto raw = img.rgb();
      for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = {raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]};
      std::shuffle(px.begin(), px.end(), rng);
      std::vector<std::uint8_t> flat;
      for (auto& p : px) flat.insert(flat.end(), p.begin(), p.end());
      const auto d2 = descriptor(PatchImage(w, h, flat));
      for (int c = 0; c < 6; ++c) CHECK(d2[c] == doctest::Approx(d[c]).epsilon(1e-12));
      const double occ = occupancy(img, 220);
      CHECK(occ >= 0.0);
      CHECK(occ <= 1.0);
    }
  }
}

TEST_CASE("filter_and_describe") {
  std::vector<Tile> tiles{{0, 0, tile_with_tissue(90)},
                          {1, 0, tile_with_tissue(50)},
                          {0, 1, tile_with_tissue(71)},
                          {1, 1, tile_with_tissue(69)}};

  SUBCASE("occupancies 0.9 0.5 0.71 0.69 at 0.70 keep two") {
    const auto r = filter_and_describe("s", tiles, 0.70);
    REQUIRE(r.records.size() == 2);
    CHECK(r.records[0].patch_id == "s:0:0");
    CHECK(r.records[1].patch_id == "s:0:1");
    CHECK(r.discarded == 2);
    CHECK_FALSE(r.empty_warning);
  }
  SUBCASE("occupancy exactly at occ_min is retained") {
    const auto r = filter_and_describe("s", tiles, 0.71);
    CHECK(r.records.size() == 2);
  }
  SUBCASE("occ_min 0 keeps everything") {
    CHECK(filter_and_describe("s", tiles, 0.0).records.size() == 4);
  }
  SUBCASE("occ_min 1 with no full tile gives empty list and warning") {
    const auto r = filter_and_describe("s", tiles, 1.0);
    CHECK(r.records.empty());
    CHECK(r.empty_warning);
  }
  SUBCASE("output is raster order regardless of input order and jobs") {
    std::mt19937_64 rng(3);
    std::vector<Tile> many;
    for (std::uint32_t y = 0; y < 6; ++y)
      for (std::uint32_t x = 0; x < 7; ++x)
        many.push_back({x, y, tile_with_tissue(60 + rng() % 41)});
    const auto ref = filter_and_describe("s", many, 0.7, 220, 1);
    std::shuffle(many.begin(), many.end(), rng);
    const auto r = filter_and_describe("s", many, 0.7, 220, 4);
    REQUIRE(r.records.size() == ref.records.size());
    for (std::size_t i = 0; i < r.records.size(); ++i) {
      CHECK(r.records[i].patch_id == ref.records[i].patch_id);
      CHECK(r.records[i].descriptor == ref.records[i].descriptor);
      if (i) CHECK(raster_less(r.records[i - 1], r.records[i]));
    }
  }
  SUBCASE("duplicate coordinates are rejected") {
    tiles[1].grid_x = 0;
    tiles[1].grid_y = 0;
    CHECK_THROWS_AS(filter_and_describe("s", tiles, 0.7), ValidationError);
  }
}

TEST_CASE("PNG tiles on disk") {
  TempDir tmp("tiles");
  std::mt19937_64 rng(8);
  const auto img = random_image(rng, 12, 12);
  write_png(tmp.path() / "x.png", img);
  const auto back = read_png(tmp.path() / "x.png");
  CHECK(back.width() == 12);
  CHECK(std::equal(back.rgb().begin(), back.rgb().end(), img.rgb().begin()));

  std::filesystem::create_directories(tmp.path() / "tiles");
  write_png(tmp.path() / "tiles" / "slA__1_0.png", PatchImage::filled(12, 12, 10, 10, 10));
  write_png(tmp.path() / "tiles" / "slA__0_0.png", PatchImage::filled(12, 12, 250, 250, 250));
  write_png(tmp.path() / "tiles" / "slA__0_1.png", PatchImage::filled(12, 12, 90, 60, 120));
  write_png(tmp.path() / "tiles" / "slB__0_0.png", PatchImage::filled(12, 12, 0, 0, 0));

  TileDirectoryOptions opts;
  opts.tile_size = 12;
  const auto slides = describe_tile_directory(tmp.path() / "tiles", opts);
  REQUIRE(slides.size() == 2);
  const auto& a = slides.at("slA").records;
  REQUIRE(a.size() == 2);
  CHECK(a[0].patch_id == "slA:1:0");
  CHECK(a[1].patch_id == "slA:0:1");
  CHECK(a[1].descriptor[2] == doctest::Approx(120.0 / 255.0));
  CHECK(slides.at("slB").records.size() == 1);

  opts.tile_size = 256;
  CHECK_THROWS_AS(describe_tile_directory(tmp.path() / "tiles", opts), ValidationError);
}
