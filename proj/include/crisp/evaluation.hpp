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

/// @file evaluation.hpp
/// @brief Leave-one-patient-out retrieval evaluation and grid search.
///
/// Every case in turn is the query; its archive is every other case whose
/// mosaic produced a valid signature. Predictions at each k use a plurality
/// vote over the k best-ranked archive labels, ties going to the tied label
/// that appears first in the ranking. Scores are macro-F1 (percent) over
/// the cohort's full label set.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crisp/cohort.hpp"
#include "crisp/mosaic.hpp"
#include "crisp/retrieval.hpp"
#include "crisp/splice.hpp"

namespace crisp {

/// How the pooled collages of a case are reduced to the final patch set.
enum class Stage2 {
  kmeans,           ///< k-means + centroid-proximal sampling
  splice_reselect,  ///< a second SPLICE pass over the pooled collages
};

std::string_view to_string(Stage2 s);
Stage2 parse_stage2(std::string_view name);

struct PipelineParams {
  double s_t = 25.0;
  std::size_t k = 12;
  double alpha = 3.5;
  std::uint64_t seed = kDefaultSeed;
  std::size_t max_iter = 300;
  Stage2 stage2 = Stage2::kmeans;
};

void validate(const PipelineParams& params);

/// Plurality label of `ranked_labels` (best first). Throws on empty input.
std::string majority_vote(std::span<const std::string> ranked_labels);

/// Macro-averaged F1 in percent over every class in `label_set`. A class
/// with P + R = 0 scores 0, including classes absent from `pairs`.
/// Pairs are (true, predicted). Throws on empty input or unknown labels.
double macro_f1(std::span<const std::pair<std::string, std::string>> pairs,
                std::span<const std::string> label_set);

/// Stage-1 and stage-2 output for one case.
struct CaseSelection {
  std::string case_id;
  std::size_t raw_count = 0;
  std::vector<SlideCollage> collages;  ///< one per slide, slide order
  std::vector<PatchRecord> pool;       ///< pooled collage patches
  std::optional<CaseMosaic> mosaic;    ///< empty when the pool was empty
  std::string failure;
};

/// Stage 1 over every slide of `c`, pooled in canonical order.
CaseSelection run_stage1(const Case& c, const SpliceConfig& cfg);

/// Fills `sel.mosaic` (or `sel.failure`).
void run_stage2(CaseSelection& sel, const PipelineParams& params);

std::vector<CaseSelection> select_cohort(const Cohort& cohort,
                                         const PipelineParams& params,
                                         std::size_t jobs = 1);

struct FoldResult {
  std::string query_case_id;
  std::string true_label;
  std::vector<RankedCase> ranking;  ///< top max(k_set) prefix
  std::map<std::size_t, std::string> predictions;
  bool failed = false;
  std::string failure;
};

struct EvaluationReport {
  Metric metric = Metric::median_min_euclidean;
  std::vector<std::size_t> k_set;
  std::vector<FoldResult> folds;
  /// Missing when every fold failed.
  std::map<std::size_t, double> macro_f1;
  std::size_t failures = 0;
  std::size_t leakage_violations = 0;
  double mean_raw = 0.0;
  double mean_pool = 0.0;
  double mean_kept = 0.0;
};

/// LOPO over precomputed selections (`selections[i]` belongs to
/// `cohort.cases[i]`).
EvaluationReport evaluate_selections(const Cohort& cohort,
                                     std::span<const CaseSelection> selections,
                                     Metric metric,
                                     std::span<const std::size_t> k_set,
                                     std::size_t jobs = 1);

/// Full pipeline: stage 1, stage 2, signatures, LOPO.
EvaluationReport lopo_evaluate(const Cohort& cohort,
                               const PipelineParams& params, Metric metric,
                               std::span<const std::size_t> k_set,
                               std::size_t jobs = 1);

struct GridSpec {
  std::vector<double> s_t;
  std::vector<std::size_t> k;
  std::vector<double> alpha;
  std::vector<Metric> metrics;
  std::vector<std::size_t> k_set{1, 3, 5, 7};
  std::uint64_t seed = kDefaultSeed;
  std::size_t max_iter = 300;
  Stage2 stage2 = Stage2::kmeans;
};

struct GridPoint {
  double s_t = 0.0;
  std::size_t k = 0;
  double alpha = 0.0;
  Metric metric = Metric::median_min_euclidean;
  std::map<std::size_t, double> macro_f1;
  double mean_pool = 0.0;
  double mean_kept = 0.0;
  std::size_t failures = 0;
  std::size_t leakage_violations = 0;
};

/// Number of points grid_search will emit.
std::size_t grid_size(const GridSpec& spec);

/// Evaluates the Cartesian product s_t x K x alpha x metric. Stage-1
/// collages are computed once per s_t and k-means once per (s_t, K).
/// Output order is (s_t, K, alpha, metric) in input-list order, independent
/// of `jobs`.
std::vector<GridPoint> grid_search(const Cohort& cohort, const GridSpec& spec,
                                   std::size_t jobs = 1);

/// Best point (highest macro-F1, earliest in grid order on ties) per
/// (metric, k). Points lacking a score for k are skipped.
std::map<std::pair<Metric, std::size_t>, std::size_t> best_points(
    std::span<const GridPoint> points);

/// 0.25, 0.50, ..., 10.00: the retention grid as quarter-percent steps.
std::vector<double> default_alpha_grid();

}  // namespace crisp
