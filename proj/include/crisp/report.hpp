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

/// @file report.hpp
/// @brief JSON/CSV forms of pipeline intermediates and results.
///
/// collages.json: { slide_id: { "kept": [patch_id], "discarded": n } }
/// mosaics.json:  { case_id: { "kept": [patch_id],
///                             "clusters": { "<index>": { "size": n,
///                                                        "kept": [...] } } } }
/// grid.csv:      s_t,K,alpha,metric,f1_top1,f1_top3,f1_top5,f1_top7,
///                mean_kept,failures

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "crisp/evaluation.hpp"
#include "crisp/mosaic.hpp"
#include "crisp/retrieval.hpp"
#include "crisp/splice.hpp"
#include "json.hpp"

namespace crisp {

nlohmann::json collages_to_json(std::span<const SlideCollage> collages);
std::map<std::string, SlideCollage> collages_from_json(
    const nlohmann::json& doc);

nlohmann::json mosaics_to_json(std::span<const CaseMosaic> mosaics);
/// case_id -> kept patch ids.
std::map<std::string, std::vector<std::string>> mosaics_from_json(
    const nlohmann::json& doc);

nlohmann::json ranking_to_json(const Ranking& ranking, std::size_t top);

nlohmann::json report_to_json(const EvaluationReport& report,
                              const PipelineParams& params);

/// Header plus one row per point. Scores print with four decimals; a score
/// that was not computed (k outside k_set, or every fold failed) is empty.
std::string grid_to_csv(std::span<const GridPoint> points);

/// Shortest round-trip decimal form.
std::string format_number(double v);

}  // namespace crisp
