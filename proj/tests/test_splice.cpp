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

#include <limits>
#include <random>

#include "crisp/error.hpp"
#include "crisp/splice.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace crisp;

namespace {

Descriptor on_axis(double v) { return {v, 0, 0, 0, 0, 0}; }

std::vector<std::string> oracle_ids(const std::vector<PatchRecord>& patches,
                                    const std::vector<std::size_t>& idx) {
  std::vector<std::string> out;
  for (auto i : idx) out.push_back(patches[i].patch_id);
  return out;
}

}  // namespace

TEST_CASE("nearest rank index") {
  CHECK(nearest_rank_index(50, 3) == 1);
  CHECK(nearest_rank_index(0, 7) == 0);
  CHECK(nearest_rank_index(100, 7) == 6);
  CHECK(nearest_rank_index(20, 5) == 0);
  CHECK(nearest_rank_index(21, 5) == 1);
}

TEST_CASE("splice examples") {
  SpliceConfig cfg;
  SUBCASE("single patch") {
    auto p = oracle::make_slide("s", {on_axis(0.3)});
    for (double s : {0.0, 25.0, 100.0}) {
      cfg.s_t = s;
      const auto c = splice_slide("s", p, cfg);
      CHECK(c.kept == std::vector<std::string>{"s:0:0"});
      CHECK(c.discarded_count == 0);
    }
  }
  SUBCASE("s_t = 0 keeps distinct patches") {
    std::mt19937_64 rng(4);
    std::vector<Descriptor> d;
    for (int i = 0; i < 30; ++i) d.push_back(oracle::random_descriptor(rng));
    cfg.s_t = 0;
    CHECK(splice_slide("s", oracle::make_slide("s", d), cfg).kept.size() == 30);
  }
  SUBCASE("0, 0.1, 0.2, 1.0 at s_t = 50") {
    auto p = oracle::make_slide(
        "s", {on_axis(0), on_axis(0.1), on_axis(0.2), on_axis(1.0)});
    cfg.s_t = 50;
    const auto c = splice_slide("s", p, cfg);
    CHECK(c.kept == std::vector<std::string>{"s:0:0", "s:2:0", "s:3:0"});
    CHECK(c.discarded_count == 1);
  }
  SUBCASE("empty slide") {
    const auto c = splice_slide("s", {}, cfg);
    CHECK(c.kept.empty());
    CHECK(c.discarded_count == 0);
  }
  SUBCASE("non-finite descriptor") {
    auto p = oracle::make_slide("s", {on_axis(0), on_axis(0.5)});
    p[1].descriptor[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(splice_slide("s", p, cfg), ValidationError);
  }
  SUBCASE("invalid s_t") {
    cfg.s_t = 101;
    CHECK_THROWS_AS(validate(cfg), ValidationError);
  }
}

TEST_CASE("splice properties") {
  std::mt19937_64 rng(2024);
  SUBCASE("oracle equivalence, partition and determinism") {
    for (int trial = 0; trial < 60; ++trial) {
      const std::size_t n = 1 + rng() % 300;
      std::vector<Descriptor> d;
      for (std::size_t i = 0; i < n; ++i) d.push_back(oracle::random_descriptor(rng));
      // sprinkle exact duplicates
      for (std::size_t i = 1; i < n; i += 7) d[i] = d[rng() % i];
      const auto patches = oracle::make_slide("s", d);
      for (int s_t : {0, 5, 20, 25, 30, 40, 77, 100}) {
        SpliceConfig cfg{double(s_t)};
        const auto c = splice_slide("s", patches, cfg);
        CHECK(c.kept == oracle_ids(patches, oracle::naive_splice(d, s_t)));
        CHECK(c.kept.size() + c.discarded_count == n);
        CHECK(!c.kept.empty());
        CHECK(splice_slide("s", patches, cfg).kept == c.kept);
      }
    }
  }
  SUBCASE("identical descriptors collapse to one") {
    for (std::size_t n : {2u, 3u, 50u}) {
      std::vector<Descriptor> d(n, on_axis(0.4));
      for (double s : {0.0, 1.0, 50.0, 100.0}) {
        CHECK(splice_slide("s", oracle::make_slide("s", d), SpliceConfig{s})
                  .kept.size() == 1);
      }
    }
  }
  SUBCASE("mean kept size shrinks from s_t 20 to 40") {
    double at20 = 0, at40 = 0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<Descriptor> d(50 + rng() % 150);
      for (auto& x : d) x = oracle::random_descriptor(rng);
      const auto p = oracle::make_slide("s", d);
      at20 += double(splice_slide("s", p, SpliceConfig{20}).kept.size());
      at40 += double(splice_slide("s", p, SpliceConfig{40}).kept.size());
    }
    CHECK(at40 <= at20);
  }
}

TEST_CASE("case pool re-selection") {
  std::mt19937_64 rng(11);
  std::vector<Descriptor> d(60);
  for (auto& x : d) x = oracle::random_descriptor(rng);
  const auto slide = oracle::make_slide("a", d);

  SUBCASE("single slide pool equals splice_slide") {
    for (double s : {0.0, 20.0, 60.0}) {
      CHECK(splice_case_pool("case", slide, SpliceConfig{s}).kept ==
            splice_slide("a", slide, SpliceConfig{s}).kept);
    }
  }
  SUBCASE("duplicated slide is largely discarded") {
    auto pool = slide;
    for (auto p : oracle::make_slide("b", d)) pool.push_back(p);
    const auto c = splice_case_pool("case", pool, SpliceConfig{25});
    CHECK(c.kept.size() < pool.size());
    std::size_t from_b = 0;
    for (auto& id : c.kept) from_b += id.rfind("b:", 0) == 0;
    CHECK(from_b == 0);  // every b patch duplicates an earlier a patch
    CHECK(c.kept.size() + c.discarded_count == pool.size());
  }
  SUBCASE("pool order does not matter") {
    auto pool = slide;
    for (auto p : oracle::make_slide("b", d)) pool.push_back(p);
    auto shuffled = pool;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(splice_case_pool("c", shuffled, SpliceConfig{30}).kept ==
          splice_case_pool("c", pool, SpliceConfig{30}).kept);
  }
  SUBCASE("empty pool") {
    CHECK(splice_case_pool("c", {}, SpliceConfig{25}).kept.empty());
  }
}
