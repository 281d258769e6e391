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

#include <cmath>

#include "crisp/error.hpp"
#include "crisp/evaluation.hpp"
#include "crisp/synthgen.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace crisp;
using crisp::testing::TempDir;
using crisp::testing::slurp;

namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.n_classes = 3;
  s.cases_per_class = 2;
  s.slides_min = 1;
  s.slides_max = 3;
  s.patches_min = 20;
  s.patches_max = 50;
  s.embed_dim = 16;
  return s;
}

double dist(const Descriptor& a, const Descriptor& b) {
  double s = 0;
  for (std::size_t i = 0; i < 6; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("same spec and seed give byte-identical files") {
  TempDir a("synth_a"), b("synth_b");
  auto spec = small_spec();
  spec.modes_per_class = 2;
  spec.artifact_rate = 0.1;
  const auto ma = generate(spec, a.path());
  generate(spec, b.path());
  std::size_t files = 0;
  for (auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a.path());
    CHECK(slurp(e.path()) == slurp(b.path() / rel));
    ++files;
  }
  CHECK(files == 1 + 3 * [&] {
    std::size_t s = 0;
    for (auto& c : ma.cases) s += c.slides.size();
    return s;
  }());
  spec.seed += 1;
  TempDir c("synth_c");
  generate(spec, c.path());
  CHECK(slurp(a.path() / "manifest.json") != slurp(c.path() / "manifest.json"));
}

TEST_CASE("generated cohorts pass validation and embed near-duplicates") {
  for (double redundancy : {0.0, 0.5, 0.9, 1.0}) {
    auto spec = small_spec();
    spec.redundancy = redundancy;
    spec.seed = 100 + std::uint64_t(redundancy * 10);
    TempDir dir("synth_valid");
    generate(spec, dir.path());
    const auto manifest = load_manifest(dir.path() / "manifest.json");
    const auto cohort = load_cohort(manifest);
    CHECK_NOTHROW(validate_cohort(cohort));
    CHECK(cohort.cases.size() == 6);
    for (const auto& c : cohort.cases) {
      CHECK(c.slides.size() >= 1);
      CHECK(c.slides.size() <= 3);
      for (const auto& s : c.slides) {
        const std::size_t n = s.patches.size();
        CHECK(n >= 20);
        CHECK(n <= 50);
        // each near-duplicate sits within epsilon of an earlier patch
        std::size_t close = 0;
        for (std::size_t i = 1; i < n; ++i) {
          for (std::size_t j = 0; j < i; ++j) {
            if (dist(s.patches[i].descriptor, s.patches[j].descriptor) < kDuplicateEpsilon) {
              ++close;
              break;
            }
          }
        }
        const auto expected = std::min<std::size_t>(n - 1, std::size_t(std::llround(redundancy * double(n))));
        CHECK(close >= expected);
      }
    }
  }
}

TEST_CASE("spec validation lists every problem") {
  SynthSpec s;
  s.n_classes = 0;
  s.redundancy = 1.5;
  s.separation = -1;
  try {
    validate(s);
    FAIL("expected a ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("n_classes") != std::string::npos);
    CHECK(msg.find("redundancy") != std::string::npos);
    CHECK(msg.find("separation") != std::string::npos);
  }
}

TEST_CASE("separation 100 with redundancy 0.9 is perfectly retrievable") {
  auto spec = small_spec();
  spec.separation = 100;
  spec.redundancy = 0.9;
  const auto cohort = generate_cohort(spec);
  const std::vector<std::size_t> k1{1};
  for (auto metric : {Metric::median_min_euclidean, Metric::sum_max_cosine}) {
    CHECK(lopo_evaluate(cohort, PipelineParams{}, metric, k1).macro_f1.at(1) == 100.0);
  }
}

TEST_CASE("separation 0 with 2 classes x 2 cases sits near chance") {
  SynthSpec spec;
  spec.n_classes = 2;
  spec.cases_per_class = 2;
  spec.separation = 0;
  spec.embed_dim = 16;
  const std::vector<std::size_t> k1{1};
  double sum = 0;
  std::vector<std::string> labels, label_set;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    spec.seed = seed;
    const auto cohort = generate_cohort(spec);
    sum += lopo_evaluate(cohort, PipelineParams{}, Metric::sum_max_cosine, k1)
               .macro_f1.at(1);
    if (labels.empty()) {
      for (auto& c : cohort.cases) labels.push_back(c.label);
      label_set = cohort.label_set;
    }
  }
  const double chance = oracle::chance_top1_f1(labels, label_set, 200000, 9);
  MESSAGE("mean " << sum / 50 << " vs chance " << chance);
  CHECK(std::abs(sum / 50 - chance) <= 10.0);
}
