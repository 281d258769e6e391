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

/// @file retrieval.hpp
/// @brief Set-to-set case scoring and exact archive ranking.
///
/// Two case scores are supported:
///  - median of minimum Euclidean distances (lower is better): every query
///    row is matched to its nearest archive row, and the median of those
///    distances is the score. Not symmetric in (query, archive).
///  - sum of maximum cosine similarities (higher is better): every query
///    row contributes its best cosine against the archive rows.
/// Rows are stored as f32 and all arithmetic runs in f64.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crisp/cohort.hpp"
#include "crisp/error.hpp"

namespace crisp {

enum class Metric { median_min_euclidean, sum_max_cosine };

std::string_view to_string(Metric m);
/// Throws ValidationError for an unknown name.
Metric parse_metric(std::string_view name);
bool higher_is_better(Metric m);

class CaseSignature {
 public:
  /// Rejects empty matrices. Zero-norm rows are allowed here because the
  /// Euclidean score is defined for them; cosine scoring rejects them.
  CaseSignature(std::string case_id, std::string label,
                const EmbeddingMatrix& rows);

  const std::string& case_id() const { return case_id_; }
  const std::string& label() const { return label_; }
  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return norms_.size(); }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  double norm(std::size_t i) const { return norms_[i]; }
  /// Id of the first zero-norm row, or empty when every row has a direction.
  const std::string& zero_row() const { return zero_row_; }

 private:
  std::string case_id_;
  std::string label_;
  std::size_t dim_ = 0;
  std::vector<double> values_;
  std::vector<double> norms_;
  std::string zero_row_;
};

double median_of_min_distance(const CaseSignature& query,
                              const CaseSignature& archive);
double sum_of_max_cosine(const CaseSignature& query,
                         const CaseSignature& archive);
double score(Metric metric, const CaseSignature& query,
             const CaseSignature& archive);

struct RankedCase {
  std::string case_id;
  std::string label;
  double score = 0.0;
};

struct Ranking {
  std::string query_id;
  Metric metric = Metric::median_min_euclidean;
  bool higher_is_better = false;
  std::vector<RankedCase> entries;
};

/// Thrown when an archive handed to rank_archive contains the query.
class LeakageError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Scores every archive case exhaustively and sorts best-first, breaking
/// score ties by case_id. Throws LeakageError if the archive contains the
/// query's case_id and ValidationError on an empty archive or dim mismatch.
Ranking rank_archive(const CaseSignature& query,
                     std::span<const CaseSignature* const> archive,
                     Metric metric);
Ranking rank_archive(const CaseSignature& query,
                     std::span<const CaseSignature> archive, Metric metric);

}  // namespace crisp
