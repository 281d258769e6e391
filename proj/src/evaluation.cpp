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

#include "crisp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "crisp/error.hpp"
#include "crisp/parallel.hpp"

namespace crisp {

namespace {

// What LOPO needs from one case, independent of how it was selected.
struct FoldInput {
  const Case* c = nullptr;
  const CaseMosaic* mosaic = nullptr;  // null on selection failure
  std::string failure;
  std::size_t raw = 0;
  std::size_t pool = 0;
};

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

EvaluationReport evaluate_inputs(const Cohort& cohort,
                                 const std::vector<FoldInput>& inputs,
                                 Metric metric,
                                 std::span<const std::size_t> k_set,
                                 std::size_t jobs) {
  if (inputs.size() < 2) {
    throw ValidationError("LOPO evaluation needs at least two cases");
  }
  if (k_set.empty()) throw ValidationError("k_set must not be empty");
  for (auto k : k_set) {
    if (k == 0) throw ValidationError("k values must be >= 1");
  }
  const std::size_t max_k = *std::max_element(k_set.begin(), k_set.end());

  EvaluationReport report;
  report.metric = metric;
  report.k_set.assign(k_set.begin(), k_set.end());
  std::sort(report.k_set.begin(), report.k_set.end());
  report.k_set.erase(std::unique(report.k_set.begin(), report.k_set.end()),
                     report.k_set.end());

  const std::size_t n = inputs.size();
  std::vector<std::optional<CaseSignature>> sigs(n);
  std::vector<std::string> failures(n);
  std::vector<double> raws, pools, kept;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& in = inputs[i];
    raws.push_back(static_cast<double>(in.raw));
    pools.push_back(static_cast<double>(in.pool));
    if (!in.mosaic) {
      failures[i] = in.failure.empty() ? "no mosaic" : in.failure;
      continue;
    }
    try {
      sigs[i].emplace(in.c->case_id, in.c->label,
                      select_rows(in.c->embeddings, in.mosaic->kept));
      kept.push_back(static_cast<double>(in.mosaic->kept.size()));
    } catch (const ValidationError& e) {
      failures[i] = e.what();
    }
  }
  report.mean_raw = mean_of(raws);
  report.mean_pool = mean_of(pools);
  report.mean_kept = mean_of(kept);

  report.folds.resize(n);
  std::vector<std::size_t> leaks(n, 0);
  parallel_for(n, jobs, [&](std::size_t i) {
    FoldResult& fold = report.folds[i];
    fold.query_case_id = inputs[i].c->case_id;
    fold.true_label = inputs[i].c->label;
    if (!sigs[i]) {
      fold.failed = true;
      fold.failure = failures[i];
      return;
    }
    std::vector<const CaseSignature*> archive;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && sigs[j]) archive.push_back(&*sigs[j]);
    }
    for (const auto* a : archive) {
      if (a->case_id() == fold.query_case_id) ++leaks[i];
    }
    if (archive.empty()) {
      fold.failed = true;
      fold.failure = "archive is empty";
      return;
    }
    if (leaks[i] > 0) {
      fold.failed = true;
      fold.failure = "query case present in its own archive";
      return;
    }
    const Ranking ranking = rank_archive(*sigs[i], archive, metric);
    const std::size_t prefix = std::min(max_k, ranking.entries.size());
    fold.ranking.assign(ranking.entries.begin(),
                        ranking.entries.begin() +
                            static_cast<std::ptrdiff_t>(prefix));
    std::vector<std::string> labels;
    for (const auto& e : fold.ranking) labels.push_back(e.label);
    for (auto k : report.k_set) {
      const std::size_t take = std::min(k, labels.size());
      fold.predictions[k] =
          majority_vote(std::span<const std::string>(labels.data(), take));
    }
  });

  for (std::size_t i = 0; i < n; ++i) {
    report.leakage_violations += leaks[i];
    if (report.folds[i].failed) ++report.failures;
  }
  for (auto k : report.k_set) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& f : report.folds) {
      if (!f.failed) pairs.emplace_back(f.true_label, f.predictions.at(k));
    }
    if (!pairs.empty()) report.macro_f1[k] = macro_f1(pairs, cohort.label_set);
  }
  return report;
}

CaseMosaic reselect_mosaic(const CaseSelection& sel, double s_t) {
  const auto collage = splice_case_pool(sel.case_id, sel.pool, {.s_t = s_t});
  CaseMosaic m;
  m.case_id = sel.case_id;
  m.kept = collage.kept;
  m.per_cluster_kept.push_back(collage.kept);
  for (const auto& id : collage.kept) m.cluster_assignments.emplace(id, 0);
  return m;
}

}  // namespace

std::string_view to_string(Stage2 s) {
  return s == Stage2::kmeans ? "kmeans" : "splice";
}

Stage2 parse_stage2(std::string_view name) {
  if (name == "kmeans") return Stage2::kmeans;
  if (name == "splice") return Stage2::splice_reselect;
  throw ValidationError("unknown stage2 '" + std::string(name) +
                        "' (expected kmeans or splice)");
}

void validate(const PipelineParams& p) {
  validate(SpliceConfig{.s_t = p.s_t});
  validate(MosaicConfig{
      .k = p.k, .alpha = p.alpha, .seed = p.seed, .max_iter = p.max_iter});
}

std::string majority_vote(std::span<const std::string> ranked_labels) {
  if (ranked_labels.empty()) {
    throw ValidationError("majority_vote: empty label list");
  }
  std::unordered_map<std::string_view, std::size_t> counts;
  for (const auto& l : ranked_labels) ++counts[l];
  // Scanning in rank order makes the first label to reach the top count win.
  std::size_t best_count = 0;
  std::string_view best;
  for (const auto& l : ranked_labels) {
    const auto c = counts[l];
    if (c > best_count) {
      best_count = c;
      best = l;
    }
  }
  return std::string(best);
}

double macro_f1(std::span<const std::pair<std::string, std::string>> pairs,
                std::span<const std::string> label_set) {
  if (pairs.empty()) throw ValidationError("macro_f1: no predictions");
  if (label_set.empty()) throw ValidationError("macro_f1: empty label set");
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < label_set.size(); ++i) index[label_set[i]] = i;
  const auto lookup = [&](const std::string& l) {
    const auto it = index.find(l);
    if (it == index.end()) {
      throw ValidationError("macro_f1: label '" + l + "' not in label set");
    }
    return it->second;
  };
  const std::size_t c = label_set.size();
  std::vector<double> tp(c, 0.0), fp(c, 0.0), fn(c, 0.0);
  for (const auto& [truth, pred] : pairs) {
    const auto t = lookup(truth);
    const auto p = lookup(pred);
    if (t == p) {
      tp[t] += 1.0;
    } else {
      fp[p] += 1.0;
      fn[t] += 1.0;
    }
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    const double precision = tp[i] + fp[i] > 0 ? tp[i] / (tp[i] + fp[i]) : 0.0;
    const double recall = tp[i] + fn[i] > 0 ? tp[i] / (tp[i] + fn[i]) : 0.0;
    if (precision + recall > 0.0) {
      sum += 2.0 * precision * recall / (precision + recall);
    }
  }
  return 100.0 * sum / static_cast<double>(c);
}

CaseSelection run_stage1(const Case& c, const SpliceConfig& cfg) {
  CaseSelection sel;
  sel.case_id = c.case_id;
  for (const auto& slide : c.slides) {
    sel.raw_count += slide.patches.size();
    auto collage = splice_slide(slide.slide_id, slide.patches, cfg);
    std::unordered_set<std::string_view> kept(collage.kept.begin(),
                                              collage.kept.end());
    for (const auto& p : slide.patches) {
      if (kept.contains(p.patch_id)) sel.pool.push_back(p);
    }
    sel.collages.push_back(std::move(collage));
  }
  sort_pool(sel.pool);
  return sel;
}

void run_stage2(CaseSelection& sel, const PipelineParams& params) {
  sel.mosaic.reset();
  sel.failure.clear();
  if (sel.pool.empty()) {
    sel.failure = "case pool is empty: no tissue patches survived";
    return;
  }
  if (params.stage2 == Stage2::splice_reselect) {
    sel.mosaic = reselect_mosaic(sel, params.s_t);
    return;
  }
  sel.mosaic = build_case_mosaic(sel.case_id, sel.pool,
                                 {.k = params.k,
                                  .alpha = params.alpha,
                                  .seed = params.seed,
                                  .max_iter = params.max_iter});
}

std::vector<CaseSelection> select_cohort(const Cohort& cohort,
                                         const PipelineParams& params,
                                         std::size_t jobs) {
  validate(params);
  std::vector<CaseSelection> out(cohort.cases.size());
  parallel_for(out.size(), jobs, [&](std::size_t i) {
    out[i] = run_stage1(cohort.cases[i], {.s_t = params.s_t});
    run_stage2(out[i], params);
  });
  return out;
}

EvaluationReport evaluate_selections(const Cohort& cohort,
                                     std::span<const CaseSelection> selections,
                                     Metric metric,
                                     std::span<const std::size_t> k_set,
                                     std::size_t jobs) {
  if (selections.size() != cohort.cases.size()) {
    throw ValidationError("one selection per case is required");
  }
  std::vector<FoldInput> inputs(selections.size());
  for (std::size_t i = 0; i < selections.size(); ++i) {
    inputs[i].c = &cohort.cases[i];
    inputs[i].mosaic = selections[i].mosaic ? &*selections[i].mosaic : nullptr;
    inputs[i].failure = selections[i].failure;
    inputs[i].raw = selections[i].raw_count;
    inputs[i].pool = selections[i].pool.size();
  }
  return evaluate_inputs(cohort, inputs, metric, k_set, jobs);
}

EvaluationReport lopo_evaluate(const Cohort& cohort,
                               const PipelineParams& params, Metric metric,
                               std::span<const std::size_t> k_set,
                               std::size_t jobs) {
  const auto selections = select_cohort(cohort, params, jobs);
  return evaluate_selections(cohort, selections, metric, k_set, jobs);
}

std::size_t grid_size(const GridSpec& spec) {
  return spec.s_t.size() * spec.k.size() * spec.alpha.size() *
         spec.metrics.size();
}

std::vector<GridPoint> grid_search(const Cohort& cohort, const GridSpec& spec,
                                   std::size_t jobs) {
  if (spec.s_t.empty() || spec.k.empty() || spec.alpha.empty() ||
      spec.metrics.empty()) {
    throw ValidationError("grid_search: every value list must be non-empty");
  }
  for (double s : spec.s_t) validate(SpliceConfig{.s_t = s});
  for (auto k : spec.k) {
    for (double a : spec.alpha) {
      validate(MosaicConfig{.k = k, .alpha = a, .max_iter = spec.max_iter});
    }
  }

  const std::size_t n_cases = cohort.cases.size();
  const std::size_t n_alpha = spec.alpha.size();
  const std::size_t n_metric = spec.metrics.size();

  // Stage 1 depends on s_t only.
  std::vector<std::vector<CaseSelection>> stage1(
      spec.s_t.size(), std::vector<CaseSelection>(n_cases));
  parallel_for(spec.s_t.size() * n_cases, jobs, [&](std::size_t t) {
    const std::size_t si = t / n_cases;
    const std::size_t ci = t % n_cases;
    stage1[si][ci] = run_stage1(cohort.cases[ci], {.s_t = spec.s_t[si]});
  });

  std::vector<GridPoint> points(grid_size(spec));
  const std::size_t n_tasks = spec.s_t.size() * spec.k.size();
  parallel_for(n_tasks, jobs, [&](std::size_t task) {
    const std::size_t si = task / spec.k.size();
    const std::size_t ki = task % spec.k.size();
    const auto& sels = stage1[si];

    // k-means depends on (s_t, K) only; alpha just changes how many
    // centroid-proximal members are kept.
    std::vector<std::optional<PoolClustering>> clusterings(n_cases);
    std::vector<std::optional<CaseMosaic>> reselected(n_cases);
    std::vector<std::string> failures(n_cases);
    for (std::size_t ci = 0; ci < n_cases; ++ci) {
      if (sels[ci].pool.empty()) {
        failures[ci] = "case pool is empty: no tissue patches survived";
      } else if (spec.stage2 == Stage2::splice_reselect) {
        reselected[ci] = reselect_mosaic(sels[ci], spec.s_t[si]);
      } else {
        clusterings[ci] =
            cluster_pool(sels[ci].pool, spec.k[ki], spec.seed, spec.max_iter);
      }
    }

    std::vector<CaseMosaic> mosaics(n_cases);
    std::vector<FoldInput> inputs(n_cases);
    for (std::size_t ai = 0; ai < n_alpha; ++ai) {
      for (std::size_t ci = 0; ci < n_cases; ++ci) {
        inputs[ci].c = &cohort.cases[ci];
        inputs[ci].raw = sels[ci].raw_count;
        inputs[ci].pool = sels[ci].pool.size();
        inputs[ci].failure = failures[ci];
        inputs[ci].mosaic = nullptr;
        if (clusterings[ci]) {
          mosaics[ci] = sample_centroid_proximal(
              cohort.cases[ci].case_id, *clusterings[ci], spec.alpha[ai]);
          inputs[ci].mosaic = &mosaics[ci];
        } else if (reselected[ci]) {
          inputs[ci].mosaic = &*reselected[ci];
        }
      }
      for (std::size_t mi = 0; mi < n_metric; ++mi) {
        const auto report =
            evaluate_inputs(cohort, inputs, spec.metrics[mi], spec.k_set, 1);
        GridPoint& gp =
            points[((task * n_alpha) + ai) * n_metric + mi];
        gp.s_t = spec.s_t[si];
        gp.k = spec.k[ki];
        gp.alpha = spec.alpha[ai];
        gp.metric = spec.metrics[mi];
        gp.macro_f1 = report.macro_f1;
        gp.mean_pool = report.mean_pool;
        gp.mean_kept = report.mean_kept;
        gp.failures = report.failures;
        gp.leakage_violations = report.leakage_violations;
      }
    }
  });
  return points;
}

std::map<std::pair<Metric, std::size_t>, std::size_t> best_points(
    std::span<const GridPoint> points) {
  std::map<std::pair<Metric, std::size_t>, std::size_t> best;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (const auto& [k, f1] : points[i].macro_f1) {
      const auto key = std::make_pair(points[i].metric, k);
      const auto it = best.find(key);
      if (it == best.end() || f1 > points[it->second].macro_f1.at(k)) {
        best[key] = i;
      }
    }
  }
  return best;
}

std::vector<double> default_alpha_grid() {
  std::vector<double> out;
  for (int q = 1; q <= 40; ++q) out.push_back(0.25 * q);
  return out;
}

}  // namespace crisp
