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

#include "crisp/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crisp/error.hpp"

namespace crisp {

namespace {

void check_dims(const CaseSignature& q, const CaseSignature& a) {
  if (q.dim() != a.dim()) {
    throw ValidationError("signature dim mismatch: '" + q.case_id() + "' has " +
                          std::to_string(q.dim()) + ", '" + a.case_id() +
                          "' has " + std::to_string(a.dim()));
  }
}

double squared_euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::median_min_euclidean:
      return "median_min_euclidean";
    case Metric::sum_max_cosine:
      return "sum_max_cosine";
  }
  return "unknown";
}

Metric parse_metric(std::string_view name) {
  if (name == "median_min_euclidean") return Metric::median_min_euclidean;
  if (name == "sum_max_cosine") return Metric::sum_max_cosine;
  throw ValidationError("unknown metric '" + std::string(name) +
                        "' (expected median_min_euclidean or sum_max_cosine)");
}

bool higher_is_better(Metric m) { return m == Metric::sum_max_cosine; }

CaseSignature::CaseSignature(std::string case_id, std::string label,
                             const EmbeddingMatrix& rows)
    : case_id_(std::move(case_id)), label_(std::move(label)) {
  if (rows.empty()) {
    throw ValidationError("case '" + case_id_ + "': empty signature");
  }
  dim_ = rows.dim();
  values_.reserve(rows.rows() * dim_);
  norms_.reserve(rows.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const auto src = rows.row(r);
    double sq = 0.0;
    for (float v : src) {
      values_.push_back(v);
      sq += static_cast<double>(v) * static_cast<double>(v);
    }
    if (sq == 0.0 && zero_row_.empty()) zero_row_ = rows.row_ids()[r];
    norms_.push_back(std::sqrt(sq));
  }
}

double median_of_min_distance(const CaseSignature& q, const CaseSignature& a) {
  check_dims(q, a);
  std::vector<double> minima(q.rows());
  for (std::size_t i = 0; i < q.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < a.rows(); ++j) {
      best = std::min(best, squared_euclidean(q.row(i), a.row(j)));
    }
    minima[i] = std::sqrt(best);
  }
  const std::size_t n = minima.size();
  const auto mid = minima.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(minima.begin(), mid, minima.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(minima.begin(), mid);
  return 0.5 * (lower + upper);
}

double sum_of_max_cosine(const CaseSignature& q, const CaseSignature& a) {
  check_dims(q, a);
  for (const CaseSignature* s : {&q, &a}) {
    if (!s->zero_row().empty()) {
      throw ValidationError("case '" + s->case_id() +
                            "': cosine undefined for zero-norm row '" +
                            s->zero_row() + "'");
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < q.rows(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < a.rows(); ++j) {
      const double c = dot(q.row(i), a.row(j)) / (q.norm(i) * a.norm(j));
      best = std::max(best, c);
    }
    total += best;
  }
  return total;
}

double score(Metric metric, const CaseSignature& q, const CaseSignature& a) {
  return metric == Metric::sum_max_cosine ? sum_of_max_cosine(q, a)
                                          : median_of_min_distance(q, a);
}

Ranking rank_archive(const CaseSignature& query,
                     std::span<const CaseSignature* const> archive,
                     Metric metric) {
  if (archive.empty()) {
    throw ValidationError("rank_archive: empty archive for query '" +
                          query.case_id() + "'");
  }
  Ranking r;
  r.query_id = query.case_id();
  r.metric = metric;
  r.higher_is_better = higher_is_better(metric);
  r.entries.reserve(archive.size());
  for (const CaseSignature* a : archive) {
    if (a->case_id() == query.case_id()) {
      throw LeakageError("archive contains the query case '" +
                         query.case_id() + "'");
    }
  }
  for (const CaseSignature* a : archive) {
    r.entries.push_back({a->case_id(), a->label(), score(metric, query, *a)});
  }
  const bool desc = r.higher_is_better;
  std::sort(r.entries.begin(), r.entries.end(),
            [desc](const RankedCase& x, const RankedCase& y) {
              if (x.score != y.score) {
                return desc ? x.score > y.score : x.score < y.score;
              }
              return x.case_id < y.case_id;
            });
  return r;
}

Ranking rank_archive(const CaseSignature& query,
                     std::span<const CaseSignature> archive, Metric metric) {
  std::vector<const CaseSignature*> ptrs;
  ptrs.reserve(archive.size());
  for (const auto& a : archive) ptrs.push_back(&a);
  return rank_archive(query, ptrs, metric);
}

}  // namespace crisp
