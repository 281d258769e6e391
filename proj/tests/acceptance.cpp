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

// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "crisp/cli.hpp"
#include "crisp/evaluation.hpp"
#include "crisp/mosaic.hpp"
#include "crisp/parallel.hpp"
#include "crisp/retrieval.hpp"
#include "crisp/splice.hpp"
#include "crisp/synthgen.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace crisp;
using Clock = std::chrono::steady_clock;

namespace {

int g_failed = 0;
std::size_t g_leaks = 0;    // leakage violations seen by every harness run
std::size_t g_folds = 0;    // folds inspected for the leakage guard

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s [%d] %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// Folds of a LOPO report never list the query in their ranking.
void audit(const EvaluationReport& r) {
  g_leaks += r.leakage_violations;
  for (const auto& f : r.folds) {
    ++g_folds;
    for (const auto& e : f.ranking) g_leaks += e.case_id == f.query_case_id;
  }
}

void criterion_splice_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(724);
  std::size_t mismatches = 0, runs = 0;
  for (int slide = 0; slide < 200; ++slide) {
    const std::size_t n = 1 + rng() % 500;
    std::vector<Descriptor> d(n);
    for (auto& x : d) x = oracle::random_descriptor(rng);
    if (slide % 4 == 0) {
      for (std::size_t i = 1; i < n; i += 3) d[i] = d[rng() % i];
    }
    const auto patches = oracle::make_slide("s", d);
    for (int s_t : {0, 20, 30, 40, 100}) {
      const auto got = splice_slide("s", patches, SpliceConfig{double(s_t)});
      std::vector<std::string> want;
      for (auto i : oracle::naive_splice(d, s_t)) want.push_back(patches[i].patch_id);
      mismatches += got.kept != want || got.kept.size() + got.discarded_count != n;
      ++runs;
    }
  }
  const double secs = seconds_since(t0);
  report(1, "SPLICE matches the quadratic reference", mismatches == 0 && secs < 60,
         std::to_string(runs - mismatches) + "/" + std::to_string(runs) +
             " slide runs identical, " + fmt("%.1f s (limit 60 s)", secs));
}

void criterion_reduction() {
  const double a = reduction_stats(525, 7.1), b = reduction_stats(2393, 8.2);
  const bool ok = std::abs(a - 98.6) <= 0.05 && std::abs(b - 99.7) <= 0.05;
  report(2, "reduction arithmetic", ok,
         fmt("(525, 7.1) -> %.1f%% expect 98.6; (2393, 8.2) -> %.1f%% expect 99.7", a, b));
}

void criterion_grid() {
  SynthSpec spec;
  spec.n_classes = 4;
  spec.cases_per_class = 5;
  spec.slides_min = spec.slides_max = 3;
  spec.patches_min = spec.patches_max = 100;
  spec.embed_dim = 64;
  spec.separation = 3;
  spec.seed = 724;
  const auto cohort = generate_cohort(spec);

  GridSpec g;
  for (int s = 0; s <= 100; s += 5) g.s_t.push_back(s);
  for (std::size_t k = 7; k <= 20; ++k) g.k.push_back(k);
  g.alpha = default_alpha_grid();
  g.metrics = {Metric::median_min_euclidean, Metric::sum_max_cosine};
  const std::size_t per_metric = g.s_t.size() * g.k.size() * g.alpha.size();

  const auto t0 = Clock::now();
  const auto points = grid_search(cohort, g, default_jobs());
  const double secs = seconds_since(t0);

  std::size_t scored = 0, bad = 0;
  for (const auto& p : points) {
    g_leaks += p.leakage_violations;
    scored += p.macro_f1.size() == g.k_set.size();
    for (auto& [k, f] : p.macro_f1) bad += !(f >= 0 && f <= 100);
    bad += p.mean_kept > p.mean_pool;
  }
  const bool ok = per_metric == 11760 && points.size() == 2 * per_metric &&
                  scored == points.size() && bad == 0 && secs < 1800;
  report(3, "grid cardinality and sweep time", ok,
         std::to_string(g.s_t.size()) + "x" + std::to_string(g.k.size()) + "x" +
             std::to_string(g.alpha.size()) + " = " + std::to_string(per_metric) +
             " points per metric, " + std::to_string(points.size()) +
             " over both metrics on 20x3x100 dim 64 in " +
             fmt("%.1f s with %.0f worker(s) (limit 1800 s)", secs,
                 double(default_jobs())));
}

void criterion_separable() {
  SynthSpec spec;
  spec.n_classes = 3;
  spec.cases_per_class = 6;
  spec.separation = 10;
  spec.redundancy = 0.8;
  spec.seed = 724;
  spec.slides_min = 2;
  spec.slides_max = 4;
  spec.patches_min = 100;
  spec.patches_max = 200;
  const auto cohort = generate_cohort(spec);
  const PipelineParams params;  // s_t 25, K 12, alpha 3.5, seed 724
  const std::vector<std::size_t> k1{1};

  bool ok = true;
  std::string detail;
  double raw = 0, kept = 0;
  for (auto metric : {Metric::median_min_euclidean, Metric::sum_max_cosine}) {
    const auto r = lopo_evaluate(cohort, params, metric, k1, default_jobs());
    audit(r);
    const double f1 = r.macro_f1.count(1) ? r.macro_f1.at(1) : -1;
    ok = ok && f1 == 100.0 && r.failures == 0;
    detail += std::string(to_string(metric)) + fmt(" top1 %.2f; ", f1);
    raw = r.mean_raw;
    kept = r.mean_kept;
  }
  const double reduction = 100.0 * (1.0 - kept / raw);
  ok = ok && kept <= 15 && reduction >= 95.0;
  report(4, "separable cohort recovery", ok,
         detail + fmt("mean kept %.2f of %.1f raw (%.2f%% reduction)", kept, raw,
                      reduction));
}

void criterion_chance() {
  SynthSpec spec;
  spec.n_classes = 3;
  spec.cases_per_class = 6;
  spec.separation = 0;
  const std::vector<std::size_t> k1{1};
  std::map<Metric, double> sum;
  std::vector<std::string> labels, label_set;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    spec.seed = seed;
    const auto cohort = generate_cohort(spec);
    if (labels.empty()) {
      for (auto& c : cohort.cases) labels.push_back(c.label);
      label_set = cohort.label_set;
    }
    const auto sels = select_cohort(cohort, PipelineParams{}, default_jobs());
    for (auto metric : {Metric::median_min_euclidean, Metric::sum_max_cosine}) {
      const auto r = evaluate_selections(cohort, sels, metric, k1, default_jobs());
      audit(r);
      sum[metric] += r.macro_f1.at(1);
    }
  }
  const double chance = oracle::chance_top1_f1(labels, label_set, 200000, 724);
  const double e = sum[Metric::median_min_euclidean] / 50;
  const double c = sum[Metric::sum_max_cosine] / 50;
  report(5, "chance-level cohort", std::abs(e - chance) <= 10 && std::abs(c - chance) <= 10,
         fmt("expected chance %.2f; mean top1 over 50 seeds: euclidean %.2f, cosine %.2f "
             "(tolerance 10)", chance, e, c));
}

void criterion_ablation() {
  SynthSpec spec;
  spec.n_classes = 3;
  spec.cases_per_class = 6;
  spec.slides_min = 2;
  spec.slides_max = 4;
  spec.modes_per_class = 3;
  spec.artifact_rate = 0.2;
  spec.separation = 4;
  const std::vector<std::size_t> k1{1};
  std::map<std::pair<Stage2, Metric>, double> sum;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    spec.seed = seed;
    const auto cohort = generate_cohort(spec);
    for (auto stage2 : {Stage2::kmeans, Stage2::splice_reselect}) {
      PipelineParams p;
      p.stage2 = stage2;
      const auto sels = select_cohort(cohort, p, default_jobs());
      for (auto metric : {Metric::median_min_euclidean, Metric::sum_max_cosine}) {
        const auto r = evaluate_selections(cohort, sels, metric, k1, default_jobs());
        audit(r);
        sum[{stage2, metric}] += r.macro_f1.at(1) / 20;
      }
    }
  }
  const double ke = sum[{Stage2::kmeans, Metric::median_min_euclidean}];
  const double se = sum[{Stage2::splice_reselect, Metric::median_min_euclidean}];
  const double kc = sum[{Stage2::kmeans, Metric::sum_max_cosine}];
  const double sc = sum[{Stage2::splice_reselect, Metric::sum_max_cosine}];
  report(6, "k-means stage 2 vs SPLICE re-selection", ke >= se && kc >= sc,
         fmt("mean top1 over 20 seeds: euclidean k-means %.2f vs re-selection %.2f; "
             "cosine k-means %.2f vs re-selection %.2f", ke, se, kc, sc));
}

void criterion_determinism() {
  crisp::testing::TempDir tmp("acceptance_det");
  std::ostringstream sink;
  SynthSpec spec;
  spec.n_classes = 3;
  spec.cases_per_class = 4;
  spec.embed_dim = 32;
  generate(spec, tmp.path() / "cohort");
  const auto manifest = (tmp.path() / "cohort" / "manifest.json").string();

  const char* files[] = {"collages.json", "mosaics.json", "report.json", "grid.csv"};
  std::map<std::string, std::string> first;
  std::size_t compared = 0, differing = 0, failed = 0;
  for (const char* jobs : {"1", "4"}) {
    const auto d = tmp.path() / jobs;
    std::filesystem::create_directories(d);
    auto p = [&](const char* n) { return (d / n).string(); };
    const std::vector<std::vector<std::string>> cmds{
        {"--jobs", jobs, "splice", "--manifest", manifest, "--s-t", "25", "--out",
         p("collages.json")},
        {"--jobs", jobs, "mosaic", "--manifest", manifest, "--collages",
         p("collages.json"), "--k", "12", "--alpha", "3.5", "--seed", "724", "--out",
         p("mosaics.json")},
        {"--jobs", jobs, "evaluate", "--manifest", manifest, "--seed", "724", "--topk",
         "1,3,5", "--out", p("report.json")},
        {"--jobs", jobs, "gridsearch", "--manifest", manifest, "--seed", "724",
         "--s-t", "10..40:10", "--k", "7..10", "--alpha", "1..5", "--metric", "both",
         "--out", p("grid.csv")}};
    for (const auto& c : cmds) failed += run_cli(c, sink, sink) != 0;
    for (const char* f : files) {
      const auto text = crisp::testing::slurp(d / f);
      if (first.count(f)) {
        ++compared;
        differing += text != first[f] || text.empty();
      } else {
        first[f] = text;
      }
    }
  }
  const auto report_doc = nlohmann::json::parse(first["report.json"], nullptr, false);
  if (!report_doc.is_discarded()) g_leaks += report_doc.value("leakage_violations", 0UL);
  report(7, "byte-identical outputs across --jobs 1 and 4",
         failed == 0 && compared == 4 && differing == 0,
         std::to_string(compared - differing) + "/4 files identical, " +
             std::to_string(failed) + " command failures");
}

CaseSignature int_sig(const std::string& id, const oracle::Rows& rows) {
  std::vector<float> v;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ids.push_back(id + ":" + std::to_string(i) + ":0");
    for (double x : rows[i]) v.push_back(float(x));
  }
  return CaseSignature(id, "L", EmbeddingMatrix(rows[0].size(), v, ids));
}

void criterion_metrics() {
  // Small-integer fixtures are exact in f32, so transformed inputs reach the
  // library without storage rounding and 1e-9 is a meaningful bound.
  std::mt19937_64 rng(724);
  std::uniform_int_distribution<int> val(-20, 20), shift(-50, 50), scale(1, 64);
  auto rows = [&](std::size_t n, std::size_t dim) {
    oracle::Rows r(n, std::vector<double>(dim));
    for (auto& row : r) {
      do {
        for (auto& x : row) x = val(rng);
      } while (std::all_of(row.begin(), row.end(), [](double x) { return x == 0; }));
    }
    return r;
  };
  std::size_t order_bad = 0, score_bad = 0, trans_bad = 0, scale_bad = 0;
  double worst_trans = 0, worst_scale = 0;
  std::size_t tie_reorders = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t dim = 1 + rng() % 16, n_cases = 1 + rng() % 50;
    const auto q = rows(1 + rng() % 30, dim);
    std::vector<oracle::Rows> arch_rows;
    std::vector<CaseSignature> arch;
    for (std::size_t c = 0; c < n_cases; ++c) {
      arch_rows.push_back(rows(1 + rng() % 30, dim));
      if (rng() % 8 == 0) arch_rows.back() = arch_rows[rng() % arch_rows.size()];
      char id[16];
      std::snprintf(id, sizeof id, "case_%03zu", (c * 7919) % 1000);
      arch.push_back(int_sig(id, arch_rows.back()));
    }
    const auto qs = int_sig("query", q);
    for (auto metric : {Metric::median_min_euclidean, Metric::sum_max_cosine}) {
      std::map<std::string, double> want;
      for (std::size_t c = 0; c < n_cases; ++c)
        want[arch[c].case_id()] = metric == Metric::sum_max_cosine
                                      ? oracle::sum_max_cos(q, arch_rows[c])
                                      : oracle::median_min(q, arch_rows[c]);
      const auto r = rank_archive(qs, arch, metric);
      std::vector<std::string> got;
      for (auto& e : r.entries) {
        got.push_back(e.case_id);
        score_bad += std::abs(e.score - want[e.case_id]) > 1e-9;
      }
      order_bad += got != oracle::rank_by_selection(want, higher_is_better(metric));
    }

    std::vector<double> c(dim);
    for (auto& x : c) x = shift(rng);
    auto moved = [&](oracle::Rows r) {
      for (auto& row : r)
        for (std::size_t j = 0; j < dim; ++j) row[j] += c[j];
      return r;
    };
    std::vector<CaseSignature> scaled;
    for (std::size_t a = 0; a < n_cases; ++a) {
      const double base = median_of_min_distance(qs, arch[a]);
      const double after =
          median_of_min_distance(int_sig("q", moved(q)), int_sig("a", moved(arch_rows[a])));
      worst_trans = std::max(worst_trans, std::abs(base - after));
      trans_bad += std::abs(base - after) > 1e-9;
      auto r = arch_rows[a];
      for (auto& row : r) {
        const double s = scale(rng);
        for (auto& x : row) x *= s;
      }
      scaled.push_back(int_sig(arch[a].case_id(), r));
    }
    // Exact ties between duplicated cases may become 1-ulp near-ties after
    // scaling, so order is compared modulo entries that agree within 1e-9.
    const auto before = rank_archive(qs, arch, Metric::sum_max_cosine);
    const auto after = rank_archive(qs, scaled, Metric::sum_max_cosine);
    std::map<std::string, double> after_score;
    for (const auto& e : after.entries) after_score[e.case_id] = e.score;
    for (std::size_t i = 0; i < n_cases; ++i) {
      const auto& b = before.entries[i];
      const double dev = std::abs(b.score - after_score.at(b.case_id));
      worst_scale = std::max(worst_scale, dev);
      scale_bad += dev > 1e-9 ||
                   std::abs(b.score - after.entries[i].score) > 1e-9;
      tie_reorders += b.case_id != after.entries[i].case_id;
    }
  }
  report(8, "retrieval metric properties",
         order_bad + score_bad + trans_bad + scale_bad == 0,
         "100 instances: " + std::to_string(order_bad) + " ordering mismatches, " +
             std::to_string(score_bad) + " score mismatches vs brute force; " +
             fmt("translation max deviation %.2e, scaling max deviation %.2e (bound 1e-9), "
                 "%.0f reorders within tied scores", worst_trans, worst_scale,
                 double(tie_reorders)));
}

}  // namespace

int main() {
  std::printf("crisp acceptance suite (%zu worker thread(s))\n", default_jobs());
  criterion_splice_oracle();
  criterion_reduction();
  criterion_grid();
  criterion_separable();
  criterion_chance();
  criterion_ablation();
  criterion_determinism();
  criterion_metrics();
  report(9, "leakage guard", g_leaks == 0,
         std::to_string(g_leaks) + " violations across " + std::to_string(g_folds) +
             " audited folds and every grid point");
  std::printf("%s: %d criterion(s) failed\n", g_failed ? "FAILED" : "OK", g_failed);
  return g_failed ? 1 : 0;
}
