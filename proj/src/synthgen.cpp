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

#include "crisp/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <random>

#include "crisp/error.hpp"
#include "crisp/kmeans.hpp"

namespace crisp {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kComponentsPerMode = 3;
constexpr double kDescriptorNoise = 0.04;
constexpr double kDuplicateEmbeddingNoise = 0.01;

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(rng_); }
  std::size_t index(std::size_t n) { return uniform_index(rng_, n); }
  std::size_t between(std::size_t lo, std::size_t hi) {
    return lo + index(hi - lo + 1);
  }

  // Box-Muller on the portable uniform so output is libstdc++-independent.
  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = uniform01(rng_);
    while (u1 <= 0.0) u1 = uniform01(rng_);
    const double u2 = uniform01(rng_);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 rng_;
  std::optional<double> spare_;
};

struct ColourComponent {
  Descriptor center{};
};

Descriptor clamp_descriptor(Descriptor d) {
  for (std::size_t c = 0; c < 3; ++c) {
    d[c] = std::clamp(d[c], 0.0, 1.0);
    d[3 + c] = std::clamp(d[3 + c], 0.0, 0.5);
  }
  return d;
}

std::vector<ColourComponent> make_components(Sampler& s) {
  std::vector<ColourComponent> out(kComponentsPerMode);
  for (auto& comp : out) {
    for (std::size_t c = 0; c < 3; ++c) {
      comp.center[c] = s.uniform(0.3, 0.9);
      comp.center[3 + c] = s.uniform(0.03, 0.25);
    }
  }
  return out;
}

// Mode means on distinct axes, each at distance separation/sqrt(2) from the
// origin, so any two sit exactly `separation` apart. Falls back to random
// directions when dim is too small.
std::vector<std::vector<double>> make_means(Sampler& s, std::size_t count,
                                            std::size_t dim,
                                            double separation) {
  const double radius = separation / std::numbers::sqrt2;
  std::vector<std::vector<double>> means(count, std::vector<double>(dim, 0.0));
  if (count <= dim) {
    std::vector<std::size_t> axes(dim);
    for (std::size_t i = 0; i < dim; ++i) axes[i] = i;
    for (std::size_t i = 0; i < count; ++i) {
      std::swap(axes[i], axes[i + s.index(dim - i)]);
      means[i][axes[i]] = radius;
    }
    return means;
  }
  for (auto& m : means) {
    double norm = 0.0;
    for (auto& v : m) {
      v = s.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : m) v = norm > 0.0 ? radius * v / norm : 0.0;
  }
  return means;
}

}  // namespace

void validate(const SynthSpec& spec) {
  std::vector<std::string> errors;
  if (spec.n_classes < 1) errors.push_back("n_classes must be >= 1");
  if (spec.cases_per_class < 1) errors.push_back("cases_per_class must be >= 1");
  if (spec.slides_min < 1 || spec.slides_max < spec.slides_min) {
    errors.push_back("slides range must satisfy 1 <= min <= max");
  }
  if (spec.patches_min < 1 || spec.patches_max < spec.patches_min) {
    errors.push_back("patches range must satisfy 1 <= min <= max");
  }
  if (!(spec.separation >= 0.0) || !std::isfinite(spec.separation)) {
    errors.push_back("separation must be >= 0");
  }
  if (!(spec.redundancy >= 0.0 && spec.redundancy <= 1.0)) {
    errors.push_back("redundancy must lie in [0,1]");
  }
  if (!(spec.artifact_rate >= 0.0 && spec.artifact_rate <= 1.0)) {
    errors.push_back("artifact_rate must lie in [0,1]");
  }
  if (spec.embed_dim < 1) errors.push_back("embed_dim must be >= 1");
  if (spec.modes_per_class < 1) errors.push_back("modes_per_class must be >= 1");
  if (!errors.empty()) {
    std::string msg = "invalid synthetic cohort spec:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ValidationError(msg);
  }
}

Cohort generate_cohort(const SynthSpec& spec) {
  validate(spec);
  Sampler s(spec.seed);
  const std::size_t n_modes = spec.n_classes * spec.modes_per_class;
  // The extra mean belongs to the artifact population.
  const auto means = make_means(s, n_modes + 1, spec.embed_dim, spec.separation);
  std::vector<std::vector<ColourComponent>> colours(n_modes);
  for (auto& c : colours) c = make_components(s);

  Cohort cohort;
  cohort.cohort_id = spec.cohort_id;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    cohort.label_set.push_back("class_" + std::to_string(c));
  }

  const auto draw_embedding = [&](const std::vector<double>& mean,
                                  std::vector<float>& out) {
    for (std::size_t d = 0; d < spec.embed_dim; ++d) {
      out.push_back(static_cast<float>(mean[d] + s.normal()));
    }
  };

  std::size_t case_counter = 0;
  for (std::size_t cls = 0; cls < spec.n_classes; ++cls) {
    for (std::size_t ci = 0; ci < spec.cases_per_class; ++ci) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "case_%03zu", case_counter++);
      Case kase;
      kase.case_id = buf;
      kase.label = cohort.label_set[cls];
      std::vector<float> values;
      std::vector<std::string> ids;

      const std::size_t n_slides = s.between(spec.slides_min, spec.slides_max);
      for (std::size_t sj = 0; sj < n_slides; ++sj) {
        Slide slide;
        slide.slide_id = kase.case_id + "_s" + std::to_string(sj);
        slide.case_id = kase.case_id;
        const std::size_t mode =
            cls * spec.modes_per_class + sj % spec.modes_per_class;
        const std::size_t n = s.between(spec.patches_min, spec.patches_max);
        const auto width = static_cast<std::size_t>(
            std::ceil(std::sqrt(static_cast<double>(n))));

        // Positions 1..n-1 are eligible to be near-duplicates.
        const std::size_t n_dup = std::min<std::size_t>(
            n - 1, static_cast<std::size_t>(std::llround(spec.redundancy * n)));
        std::vector<std::size_t> order(n - 1);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i + 1;
        for (std::size_t i = 0; i < n_dup; ++i) {
          std::swap(order[i], order[i + s.index(order.size() - i)]);
        }
        std::vector<bool> is_dup(n, false);
        for (std::size_t i = 0; i < n_dup; ++i) is_dup[order[i]] = true;

        std::vector<std::size_t> originals;
        std::vector<std::vector<float>> slide_emb;
        for (std::size_t i = 0; i < n; ++i) {
          PatchRecord p;
          p.slide_id = slide.slide_id;
          p.grid_x = static_cast<std::uint32_t>(i % width);
          p.grid_y = static_cast<std::uint32_t>(i / width);
          p.patch_id = make_patch_id(p.slide_id, p.grid_x, p.grid_y);
          p.occupancy = s.uniform(0.70, 1.0);
          std::vector<float> emb;
          emb.reserve(spec.embed_dim);
          if (is_dup[i]) {
            const std::size_t src = originals[s.index(originals.size())];
            const double delta =
                kDuplicateEpsilon / (2.0 * std::sqrt(double(kDescriptorDim)));
            Descriptor d = slide.patches[src].descriptor;
            for (auto& v : d) v += s.uniform(-delta, delta);
            p.descriptor = clamp_descriptor(d);
            for (std::size_t k = 0; k < spec.embed_dim; ++k) {
              emb.push_back(static_cast<float>(
                  slide_emb[src][k] + kDuplicateEmbeddingNoise * s.normal()));
            }
          } else {
            originals.push_back(i);
            if (spec.artifact_rate > 0.0 && s.uniform(0.0, 1.0) < spec.artifact_rate) {
              Descriptor d{};
              for (std::size_t c = 0; c < 3; ++c) {
                d[c] = s.uniform(0.0, 1.0);
                d[3 + c] = s.uniform(0.0, 0.5);
              }
              p.descriptor = d;
              draw_embedding(means[n_modes], emb);
            } else {
              const auto& comp =
                  colours[mode][s.index(kComponentsPerMode)].center;
              Descriptor d{};
              for (std::size_t k = 0; k < kDescriptorDim; ++k) {
                d[k] = comp[k] + kDescriptorNoise * s.normal();
              }
              p.descriptor = clamp_descriptor(d);
              draw_embedding(means[mode], emb);
            }
          }
          values.insert(values.end(), emb.begin(), emb.end());
          ids.push_back(p.patch_id);
          slide_emb.push_back(std::move(emb));
          slide.patches.push_back(std::move(p));
        }
        kase.slides.push_back(std::move(slide));
      }
      kase.embeddings =
          EmbeddingMatrix(spec.embed_dim, std::move(values), std::move(ids));
      cohort.cases.push_back(std::move(kase));
    }
  }
  validate_cohort(cohort);
  return cohort;
}

CohortManifest write_cohort(const Cohort& cohort, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir / "descriptors", ec);
  fs::create_directories(out_dir / "embeddings", ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  const fs::path root = fs::absolute(out_dir);

  CohortManifest m;
  m.cohort_id = cohort.cohort_id;
  m.label_set = cohort.label_set;
  for (const auto& c : cohort.cases) {
    CaseEntry entry{c.case_id, c.label, {}};
    for (const auto& slide : c.slides) {
      SlideSource src;
      src.slide_id = slide.slide_id;
      src.descriptors = root / "descriptors" / (slide.slide_id + ".csv");
      src.embeddings = root / "embeddings" / (slide.slide_id + ".cem");
      src.embedding_ids = root / "embeddings" / (slide.slide_id + ".ids");
      write_descriptors(src.descriptors, slide.patches);
      std::vector<std::string> ids;
      for (const auto& p : slide.patches) ids.push_back(p.patch_id);
      write_embeddings(src.embeddings, src.embedding_ids,
                       select_rows(c.embeddings, ids));
      entry.slides.push_back(std::move(src));
    }
    m.cases.push_back(std::move(entry));
  }
  write_manifest(root / "manifest.json", m);
  return m;
}

CohortManifest generate(const SynthSpec& spec, const fs::path& out_dir) {
  return write_cohort(generate_cohort(spec), out_dir);
}

}  // namespace crisp
