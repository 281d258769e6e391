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

/// @file cohort.hpp
/// @brief Cohort data model and the on-disk formats the pipeline consumes.
///
/// A cohort is a set of cases (patients). Each case carries one categorical
/// label and one or more slides; each slide is a raster-ordered list of
/// tissue patches with a 6-d colour descriptor. Patch embeddings live in
/// separate CEM1 binary files with a companion id file.
///
/// ## File formats
///
/// Manifest (JSON):
///
///     { "cohort_id": str, "label_set": [str],
///       "cases": [ { "case_id": str, "label": str,
///                    "slides": [ { "slide_id": str, "descriptors": path,
///                                  "embeddings": path,
///                                  "embedding_ids": path } ] } ] }
///
/// Relative paths are resolved against the manifest's directory.
///
/// Descriptor CSV header:
///
///     patch_id,slide_id,grid_x,grid_y,occupancy,mean_r,mean_g,mean_b,std_r,std_g,std_b
///
/// CEM1 embedding file: ASCII magic `CEM1`, u32 LE row count, u32 LE dim,
/// then count*dim f32 LE values in row-major order. The id file holds one
/// patch_id per line, aligned with the rows.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace crisp {

inline constexpr std::size_t kDescriptorDim = 6;

/// (mean_r, mean_g, mean_b, std_r, std_g, std_b), intensities scaled to [0,1].
using Descriptor = std::array<double, kDescriptorDim>;

struct PatchRecord {
  std::string patch_id;
  std::string slide_id;
  std::uint32_t grid_x = 0;
  std::uint32_t grid_y = 0;
  double occupancy = 0.0;
  Descriptor descriptor{};
};

/// Canonical patch id: "slide_id:grid_x:grid_y".
std::string make_patch_id(std::string_view slide_id, std::uint32_t grid_x,
                          std::uint32_t grid_y);

/// Throws ValidationError when a record breaks a range or id invariant.
void validate_patch(const PatchRecord& patch);

/// True when `a` precedes `b` in raster order (grid_y, then grid_x).
inline bool raster_less(const PatchRecord& a, const PatchRecord& b) {
  return a.grid_y != b.grid_y ? a.grid_y < b.grid_y : a.grid_x < b.grid_x;
}

/// Row-aligned embedding vectors. Immutable once constructed; the
/// constructor enforces the shape, id-uniqueness and finiteness invariants.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t dim, std::vector<float> values,
                  std::vector<std::string> row_ids);

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return row_ids_.size(); }
  bool empty() const { return row_ids_.empty(); }

  std::span<const float> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  const std::vector<float>& values() const { return values_; }
  const std::vector<std::string>& row_ids() const { return row_ids_; }

  /// Row index for `patch_id`, or rows() when absent.
  std::size_t find(const std::string& patch_id) const;

 private:
  std::size_t dim_ = 0;
  std::vector<float> values_;
  std::vector<std::string> row_ids_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Rows of `m` in the order given by `ids`. Throws ValidationError on an
/// unknown id.
EmbeddingMatrix select_rows(const EmbeddingMatrix& m,
                            std::span<const std::string> ids);

/// Row-wise concatenation; dims must agree (an empty operand is ignored).
EmbeddingMatrix concat_rows(std::span<const EmbeddingMatrix> parts);

EmbeddingMatrix load_embeddings(const std::filesystem::path& cem_path,
                                const std::filesystem::path& ids_path);
void write_embeddings(const std::filesystem::path& cem_path,
                      const std::filesystem::path& ids_path,
                      const EmbeddingMatrix& m);

/// Parses a CEM1 payload already in memory. `row_ids` must hold exactly as
/// many ids as the header declares rows.
EmbeddingMatrix parse_cem1(std::span<const std::byte> bytes,
                           std::vector<std::string> row_ids);
std::vector<std::byte> encode_cem1(const EmbeddingMatrix& m);

std::vector<PatchRecord> load_descriptors(const std::filesystem::path& csv);
void write_descriptors(const std::filesystem::path& csv,
                       std::span<const PatchRecord> patches);

struct SlideSource {
  std::string slide_id;
  std::filesystem::path descriptors;
  std::filesystem::path embeddings;
  std::filesystem::path embedding_ids;
};

struct CaseEntry {
  std::string case_id;
  std::string label;
  std::vector<SlideSource> slides;
};

struct CohortManifest {
  std::string cohort_id;
  std::vector<std::string> label_set;
  std::vector<CaseEntry> cases;
};

/// Loads and validates a manifest. Paths in the result are absolute.
/// Checks: label membership, non-empty slide lists, dangling file
/// references, and duplicate case, slide and patch ids (patch ids are read
/// from the embedding id files).
CohortManifest load_manifest(const std::filesystem::path& path);

/// Writes `manifest` as JSON; paths are written relative to the manifest's
/// directory when they live beneath it.
void write_manifest(const std::filesystem::path& path,
                    const CohortManifest& manifest);

struct Slide {
  std::string slide_id;
  std::string case_id;
  std::vector<PatchRecord> patches;  // raster order
};

struct Case {
  std::string case_id;
  std::string label;
  std::vector<Slide> slides;
  /// Embeddings of every patch of every slide of this case.
  EmbeddingMatrix embeddings;
};

struct Cohort {
  std::string cohort_id;
  std::vector<std::string> label_set;
  std::vector<Case> cases;

  const Case* find_case(std::string_view case_id) const;
};

/// Reads every descriptor and embedding file referenced by `manifest`.
Cohort load_cohort(const CohortManifest& manifest);

/// Checks slide ordering, id uniqueness and label membership on an
/// in-memory cohort.
void validate_cohort(const Cohort& cohort);

}  // namespace crisp
