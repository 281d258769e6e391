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

#include "crisp/report.hpp"

#include <charconv>
#include <cstdio>

#include "crisp/error.hpp"

namespace crisp {

namespace {

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return std::string(buf) == "-0.0000" ? "0.0000" : buf;
}

std::vector<std::string> string_list(const nlohmann::json& v,
                                     const std::string& ctx) {
  if (!v.is_array()) throw ParseError(ctx + ": expected an array of ids");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) throw ParseError(ctx + ": ids must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

nlohmann::json collages_to_json(std::span<const SlideCollage> collages) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& c : collages) {
    doc[c.slide_id] = {{"kept", c.kept}, {"discarded", c.discarded_count}};
  }
  return doc;
}

std::map<std::string, SlideCollage> collages_from_json(
    const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("collages: expected a JSON object");
  std::map<std::string, SlideCollage> out;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string ctx = "collages['" + it.key() + "']";
    if (!it->is_object() || !it->contains("kept")) {
      throw ParseError(ctx + ": missing 'kept'");
    }
    SlideCollage c;
    c.slide_id = it.key();
    c.kept = string_list(it->at("kept"), ctx);
    if (it->contains("discarded") && it->at("discarded").is_number_unsigned()) {
      c.discarded_count = it->at("discarded").get<std::size_t>();
    }
    out.emplace(c.slide_id, std::move(c));
  }
  return out;
}

nlohmann::json mosaics_to_json(std::span<const CaseMosaic> mosaics) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& m : mosaics) {
    std::vector<std::size_t> sizes(m.per_cluster_kept.size(), 0);
    for (const auto& [id, cluster] : m.cluster_assignments) {
      if (cluster < sizes.size()) ++sizes[cluster];
    }
    nlohmann::json clusters = nlohmann::json::object();
    for (std::size_t c = 0; c < m.per_cluster_kept.size(); ++c) {
      clusters[std::to_string(c)] = {{"size", sizes[c]},
                                     {"kept", m.per_cluster_kept[c]}};
    }
    doc[m.case_id] = {{"kept", m.kept}, {"clusters", clusters}};
  }
  return doc;
}

std::map<std::string, std::vector<std::string>> mosaics_from_json(
    const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("mosaics: expected a JSON object");
  std::map<std::string, std::vector<std::string>> out;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string ctx = "mosaics['" + it.key() + "']";
    if (!it->is_object() || !it->contains("kept")) {
      throw ParseError(ctx + ": missing 'kept'");
    }
    out.emplace(it.key(), string_list(it->at("kept"), ctx));
  }
  return out;
}

nlohmann::json ranking_to_json(const Ranking& ranking, std::size_t top) {
  nlohmann::json entries = nlohmann::json::array();
  const std::size_t n = std::min(top, ranking.entries.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = ranking.entries[i];
    entries.push_back({{"rank", i + 1},
                       {"case_id", e.case_id},
                       {"label", e.label},
                       {"score", e.score}});
  }
  return {{"query", ranking.query_id},
          {"metric", std::string(to_string(ranking.metric))},
          {"higher_is_better", ranking.higher_is_better},
          {"results", entries}};
}

nlohmann::json report_to_json(const EvaluationReport& report,
                              const PipelineParams& params) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : report.folds) {
    nlohmann::json jf = {{"query", f.query_case_id},
                         {"true_label", f.true_label},
                         {"failed", f.failed}};
    if (f.failed) {
      jf["failure"] = f.failure;
    } else {
      nlohmann::json ranking = nlohmann::json::array();
      for (const auto& e : f.ranking) {
        ranking.push_back(
            {{"case_id", e.case_id}, {"label", e.label}, {"score", e.score}});
      }
      jf["ranking"] = ranking;
      nlohmann::json preds = nlohmann::json::object();
      for (const auto& [k, label] : f.predictions) {
        preds["top" + std::to_string(k)] = label;
      }
      jf["predictions"] = preds;
    }
    folds.push_back(std::move(jf));
  }
  nlohmann::json f1 = nlohmann::json::object();
  for (const auto& [k, v] : report.macro_f1) f1["top" + std::to_string(k)] = v;
  return {{"metric", std::string(to_string(report.metric))},
          {"params",
           {{"s_t", params.s_t},
            {"K", params.k},
            {"alpha", params.alpha},
            {"seed", params.seed},
            {"stage2", std::string(to_string(params.stage2))}}},
          {"k_set", report.k_set},
          {"macro_f1", f1},
          {"failures", report.failures},
          {"leakage_violations", report.leakage_violations},
          {"mean_raw_patches", report.mean_raw},
          {"mean_pooled_collage", report.mean_pool},
          {"mean_kept", report.mean_kept},
          {"folds", folds}};
}

std::string grid_to_csv(std::span<const GridPoint> points) {
  std::string out =
      "s_t,K,alpha,metric,f1_top1,f1_top3,f1_top5,f1_top7,mean_kept,failures\n";
  for (const auto& p : points) {
    out += format_number(p.s_t) + ',' + std::to_string(p.k) + ',' +
           format_number(p.alpha) + ',' + std::string(to_string(p.metric));
    for (std::size_t k : {1, 3, 5, 7}) {
      out += ',';
      const auto it = p.macro_f1.find(k);
      if (it != p.macro_f1.end()) out += fixed4(it->second);
    }
    out += ',' + fixed4(p.mean_kept) + ',' + std::to_string(p.failures) + '\n';
  }
  return out;
}

}  // namespace crisp
