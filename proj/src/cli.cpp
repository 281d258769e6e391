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

#include "crisp/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "CLI11.hpp"
#include "crisp/canonical_json.hpp"
#include "crisp/cohort.hpp"
#include "crisp/evaluation.hpp"
#include "crisp/mosaic.hpp"
#include "crisp/parallel.hpp"
#include "crisp/patchdesc.hpp"
#include "crisp/report.hpp"
#include "crisp/retrieval.hpp"
#include "crisp/splice.hpp"
#include "crisp/synthgen.hpp"
#include "json.hpp"
#include "toml.hpp"

namespace crisp {

namespace fs = std::filesystem;

namespace {

/// Usage problems (missing/unknown inputs) map to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::string join(const std::vector<std::string>& parts,
                 const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

void print_error(std::ostream& err, const std::string& kind,
                 const std::vector<std::string>& messages) {
  nlohmann::json doc = {{"error", {{"kind", kind}, {"messages", messages}}}};
  err << doc.dump() << '\n';
}

std::string trim(std::string s) {
  const auto ws = [](unsigned char c) { return std::isspace(c); };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

double parse_double(const std::string& text) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw ValidationError("cannot parse number '" + text + "'");
  }
  if (pos != text.size()) {
    throw ValidationError("cannot parse number '" + text + "'");
  }
  return v;
}

std::vector<long> parse_topk(const std::string& text) {
  std::vector<long> out;
  for (double v : parse_range(text)) {
    if (v != std::floor(v)) {
      throw ValidationError("topk values must be integers: '" + text + "'");
    }
    out.push_back(static_cast<long>(v));
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("file not found: " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

/// Values bound to CLI11 options; a field counts as given only when its
/// option was seen on the command line.
struct Flags {
  PipelineConfig cfg;
  std::string config_path;
  std::string workdir;
  std::string manifest;
  std::string out;
  std::string collages;
  std::string mosaics;
  std::string tiles;
  std::string query;
  std::string topk_text;
  std::string s_t_range;
  std::string k_range;
  std::string alpha_range;
  long top = 5;
  // synth
  long classes = 3;
  long cases_per_class = 5;
  std::string slides = "1..3";
  std::string patches = "80..120";
  double separation = 10.0;
  double redundancy = 0.8;
  long dim = 64;
  long modes = 1;
  double artifacts = 0.0;
};

struct Context {
  Flags f;
  std::multimap<std::string, CLI::Option*> options;
  fs::path workdir;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;

  bool given(const std::string& name) const {
    const auto [lo, hi] = options.equal_range(name);
    for (auto it = lo; it != hi; ++it) {
      if (it->second->count() > 0) return true;
    }
    return false;
  }

  fs::path resolve(const std::string& p) const {
    fs::path path(p);
    return path.is_relative() ? workdir / path : path;
  }

  fs::path require_path(const std::string& name, const std::string& value,
                        bool must_exist) const {
    if (value.empty()) throw UsageError("missing required option --" + name);
    const auto p = resolve(value);
    if (must_exist && !fs::exists(p)) {
      throw UsageError("--" + name + ": path not found: " + p.string());
    }
    return p;
  }
};

template <typename T>
CLI::Option* add_opt(Context& ctx, CLI::App* sub, const std::string& name,
                  T& target, const std::string& help) {
  auto* opt = sub->add_option("--" + name, target, help);
  ctx.options.emplace(name, opt);
  return opt;
}

/// Merges defaults, environment, config file and flags, then validates.
PipelineConfig resolve_config(Context& ctx, bool allow_both,
                              std::vector<long> default_topk = {1, 3, 5}) {
  PipelineConfig cfg;
  cfg.topk = std::move(default_topk);
  std::vector<std::string> errors;
  apply_env(cfg, errors);
  if (!ctx.f.config_path.empty()) {
    const auto path = ctx.resolve(ctx.f.config_path);
    std::ifstream in(path);
    if (!in) throw UsageError("config file not found: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    apply_toml(cfg, ss.str(), errors);
  }
  const PipelineConfig& fl = ctx.f.cfg;
  if (ctx.given("occ-min")) cfg.occ_min = fl.occ_min;
  if (ctx.given("bg-threshold")) cfg.bg_threshold = fl.bg_threshold;
  if (ctx.given("tile-size")) cfg.tile_size = fl.tile_size;
  if (ctx.given("s-t") && ctx.f.s_t_range.empty()) cfg.s_t = fl.s_t;
  if (ctx.given("k") && ctx.f.k_range.empty()) cfg.k = fl.k;
  if (ctx.given("alpha") && ctx.f.alpha_range.empty()) cfg.alpha = fl.alpha;
  if (ctx.given("seed")) cfg.seed = fl.seed;
  if (ctx.given("metric")) cfg.metric = fl.metric;
  if (ctx.given("jobs")) cfg.jobs = fl.jobs;
  if (ctx.given("stage2")) cfg.stage2 = fl.stage2;
  if (ctx.given("max-iter")) cfg.max_iter = fl.max_iter;
  if (ctx.given("topk")) {
    try {
      cfg.topk = parse_topk(ctx.f.topk_text);
    } catch (const ValidationError& e) {
      errors.push_back(std::string("topk: ") + e.what());
    }
  }
  for (auto& e : validate_config(cfg, allow_both)) errors.push_back(e);
  if (!errors.empty()) throw ConfigError(errors);
  return cfg;
}

PipelineParams to_params(const PipelineConfig& cfg) {
  PipelineParams p;
  p.s_t = cfg.s_t;
  p.k = static_cast<std::size_t>(cfg.k);
  p.alpha = cfg.alpha;
  p.seed = cfg.seed;
  p.max_iter = static_cast<std::size_t>(cfg.max_iter);
  p.stage2 = parse_stage2(cfg.stage2);
  return p;
}

std::vector<std::size_t> to_k_set(const std::vector<long>& topk) {
  std::vector<std::size_t> out;
  for (long k : topk) out.push_back(static_cast<std::size_t>(k));
  return out;
}

Cohort load(const Context& ctx) {
  const auto path = ctx.require_path("manifest", ctx.f.manifest, true);
  return load_cohort(load_manifest(path));
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_descriptors(Context& ctx) {
  const auto cfg = resolve_config(ctx, false);
  const auto tiles = ctx.require_path("tiles", ctx.f.tiles, true);
  const auto out_dir = ctx.require_path("out", ctx.f.out, false);
  TileDirectoryOptions opts;
  opts.occ_min = cfg.occ_min;
  opts.bg_threshold = static_cast<std::uint8_t>(cfg.bg_threshold);
  opts.tile_size = static_cast<std::size_t>(cfg.tile_size);
  opts.jobs = static_cast<std::size_t>(cfg.jobs);
  const auto slides = describe_tile_directory(tiles, opts);
  fs::create_directories(out_dir);
  for (const auto& [slide_id, result] : slides) {
    if (result.empty_warning) {
      *ctx.err << "warning: slide '" << slide_id << "': all "
               << result.discarded << " tiles below occupancy "
               << format_number(cfg.occ_min) << "\n";
    }
    write_descriptors(out_dir / (slide_id + ".csv"), result.records);
    *ctx.out << slide_id << ": " << result.records.size() << " kept, "
             << result.discarded << " discarded\n";
  }
}

void cmd_splice(Context& ctx) {
  const auto cfg = resolve_config(ctx, false);
  const auto cohort = load(ctx);
  const auto out = ctx.require_path("out", ctx.f.out, false);
  std::vector<const Slide*> slides;
  for (const auto& c : cohort.cases) {
    for (const auto& s : c.slides) slides.push_back(&s);
  }
  std::vector<SlideCollage> collages(slides.size());
  parallel_for(slides.size(), static_cast<std::size_t>(cfg.jobs),
               [&](std::size_t i) {
                 collages[i] = splice_slide(slides[i]->slide_id,
                                            slides[i]->patches, {cfg.s_t});
               });
  write_text(out, canonical_dump(collages_to_json(collages)));
}

void cmd_mosaic(Context& ctx) {
  const auto cfg = resolve_config(ctx, false);
  const auto cohort = load(ctx);
  const auto collage_path = ctx.require_path("collages", ctx.f.collages, true);
  const auto out = ctx.require_path("out", ctx.f.out, false);
  const auto collages = collages_from_json(read_json(collage_path));
  const auto params = to_params(cfg);

  std::vector<CaseSelection> sels(cohort.cases.size());
  for (std::size_t i = 0; i < cohort.cases.size(); ++i) {
    const auto& c = cohort.cases[i];
    sels[i].case_id = c.case_id;
    for (const auto& s : c.slides) {
      const auto it = collages.find(s.slide_id);
      if (it == collages.end()) {
        throw ValidationError("collages file has no entry for slide '" +
                              s.slide_id + "'");
      }
      std::unordered_set<std::string> kept(it->second.kept.begin(),
                                           it->second.kept.end());
      for (const auto& p : s.patches) {
        if (kept.contains(p.patch_id)) sels[i].pool.push_back(p);
      }
      sels[i].raw_count += s.patches.size();
    }
    sort_pool(sels[i].pool);
  }
  parallel_for(sels.size(), static_cast<std::size_t>(cfg.jobs),
               [&](std::size_t i) { run_stage2(sels[i], params); });
  std::vector<CaseMosaic> mosaics;
  for (const auto& s : sels) {
    if (s.mosaic) {
      mosaics.push_back(*s.mosaic);
    } else {
      *ctx.err << "warning: case '" << s.case_id << "': " << s.failure << "\n";
    }
  }
  write_text(out, canonical_dump(mosaics_to_json(mosaics)));
}

void cmd_retrieve(Context& ctx) {
  const auto cfg = resolve_config(ctx, false);
  const auto cohort = load(ctx);
  const auto mosaic_path = ctx.require_path("mosaics", ctx.f.mosaics, true);
  const auto out = ctx.require_path("out", ctx.f.out, false);
  if (ctx.f.query.empty()) throw UsageError("missing required option --query");
  if (ctx.f.top < 1) throw ConfigError({"top: must be >= 1"});
  const auto mosaics = mosaics_from_json(read_json(mosaic_path));
  const Metric metric = parse_metric(cfg.metric);

  std::optional<CaseSignature> query;
  std::vector<CaseSignature> archive;
  for (const auto& c : cohort.cases) {
    const auto it = mosaics.find(c.case_id);
    if (it == mosaics.end() || it->second.empty()) continue;
    CaseSignature sig(c.case_id, c.label, select_rows(c.embeddings, it->second));
    if (c.case_id == ctx.f.query) {
      query.emplace(std::move(sig));
    } else {
      archive.push_back(std::move(sig));
    }
  }
  if (!query) {
    throw UsageError("query case '" + ctx.f.query +
                     "' not found in manifest and mosaics");
  }
  const auto ranking = rank_archive(*query, archive, metric);
  write_text(out, canonical_dump(ranking_to_json(
                      ranking, static_cast<std::size_t>(ctx.f.top))));
}

void cmd_evaluate(Context& ctx) {
  const auto cfg = resolve_config(ctx, false);
  const auto cohort = load(ctx);
  const auto out = ctx.require_path("out", ctx.f.out, false);
  const auto params = to_params(cfg);
  const auto report =
      lopo_evaluate(cohort, params, parse_metric(cfg.metric),
                    to_k_set(cfg.topk), static_cast<std::size_t>(cfg.jobs));
  write_text(out, canonical_dump(report_to_json(report, params)));
  for (const auto& [k, f1] : report.macro_f1) {
    *ctx.out << "top" << k << " macro-F1: " << format_number(std::round(f1 * 1e4) / 1e4)
             << "\n";
  }
  if (report.failures > 0) {
    *ctx.err << "warning: " << report.failures << " fold(s) failed\n";
  }
}

void cmd_gridsearch(Context& ctx) {
  auto& f = ctx.f;
  // Ranges are gridsearch-specific; keep them out of the scalar overlay.
  const auto cfg = resolve_config(ctx, true, {1, 3, 5, 7});
  const auto cohort = load(ctx);
  const auto out = ctx.require_path("out", f.out, false);

  std::vector<std::string> errors;
  GridSpec spec;
  const auto range_or = [&](const std::string& name, const std::string& text,
                            double scalar) -> std::vector<double> {
    if (text.empty()) return {scalar};
    try {
      return parse_range(text);
    } catch (const ValidationError& e) {
      errors.push_back(name + ": " + e.what());
      return {};
    }
  };
  spec.s_t = range_or("s-t", f.s_t_range, cfg.s_t);
  for (double k : range_or("k", f.k_range, static_cast<double>(cfg.k))) {
    if (k < 1 || k != std::floor(k)) {
      errors.push_back("k: values must be integers >= 1");
      break;
    }
    spec.k.push_back(static_cast<std::size_t>(k));
  }
  spec.alpha = range_or("alpha", f.alpha_range, cfg.alpha);
  for (double s : spec.s_t) {
    if (!(s >= 0 && s <= 100)) {
      errors.push_back("s-t: values must lie in [0, 100]");
      break;
    }
  }
  for (double a : spec.alpha) {
    if (!(a > 0 && a <= 100)) {
      errors.push_back("alpha: values must lie in (0, 100]");
      break;
    }
  }
  if (!errors.empty()) throw ConfigError(errors);

  if (cfg.metric == "both") {
    spec.metrics = {Metric::median_min_euclidean, Metric::sum_max_cosine};
  } else {
    spec.metrics = {parse_metric(cfg.metric)};
  }
  spec.k_set = to_k_set(cfg.topk);
  spec.seed = cfg.seed;
  spec.max_iter = static_cast<std::size_t>(cfg.max_iter);
  spec.stage2 = parse_stage2(cfg.stage2);

  const auto points =
      grid_search(cohort, spec, static_cast<std::size_t>(cfg.jobs));
  write_text(out, grid_to_csv(points));
  *ctx.out << points.size() << " grid points written to " << out.string()
           << "\n";
  for (const auto& [key, idx] : best_points(points)) {
    const auto& p = points[idx];
    *ctx.out << "best " << to_string(key.first) << " top" << key.second
             << ": macro-F1 " << format_number(std::round(p.macro_f1.at(key.second) * 1e4) / 1e4)
             << " at s_t=" << format_number(p.s_t) << " K=" << p.k
             << " alpha=" << format_number(p.alpha) << "\n";
  }
}

std::pair<std::size_t, std::size_t> parse_count_range(const std::string& name,
                                                      const std::string& text) {
  const auto values = parse_range(text);
  if (values.empty()) throw ConfigError({name + ": empty range"});
  for (double v : values) {
    if (v < 1 || v != std::floor(v)) {
      throw ConfigError({name + ": values must be integers >= 1"});
    }
  }
  return {static_cast<std::size_t>(values.front()),
          static_cast<std::size_t>(values.back())};
}

void cmd_synth(Context& ctx) {
  const auto cfg = resolve_config(ctx, false);
  const auto out = ctx.require_path("out", ctx.f.out, false);
  const auto& f = ctx.f;
  std::vector<std::string> errors;
  if (f.classes < 1) errors.push_back("classes: must be >= 1");
  if (f.cases_per_class < 1) errors.push_back("cases-per-class: must be >= 1");
  if (f.dim < 1) errors.push_back("dim: must be >= 1");
  if (f.modes < 1) errors.push_back("modes: must be >= 1");
  if (!errors.empty()) throw ConfigError(errors);

  SynthSpec spec;
  spec.n_classes = static_cast<std::size_t>(f.classes);
  spec.cases_per_class = static_cast<std::size_t>(f.cases_per_class);
  std::tie(spec.slides_min, spec.slides_max) = parse_count_range("slides", f.slides);
  std::tie(spec.patches_min, spec.patches_max) =
      parse_count_range("patches", f.patches);
  spec.separation = f.separation;
  spec.redundancy = f.redundancy;
  spec.embed_dim = static_cast<std::size_t>(f.dim);
  spec.modes_per_class = static_cast<std::size_t>(f.modes);
  spec.artifact_rate = f.artifacts;
  spec.seed = cfg.seed;
  try {
    validate(spec);
  } catch (const ValidationError& e) {
    throw ConfigError({e.what()});
  }
  const auto manifest = generate(spec, out);
  *ctx.out << "wrote " << manifest.cases.size() << " cases to "
           << (out / "manifest.json").string() << "\n";
}

}  // namespace

// ---------------------------------------------------------------------------
// Config handling
// ---------------------------------------------------------------------------

ConfigError::ConfigError(std::vector<std::string> messages)
    : ValidationError("invalid configuration: " + join(messages, "; ")),
      messages_(std::move(messages)) {}

std::vector<std::string> validate_config(const PipelineConfig& c,
                                         bool allow_both_metrics) {
  std::vector<std::string> e;
  if (!(c.occ_min >= 0.0 && c.occ_min <= 1.0)) {
    e.push_back("occ_min: must lie in [0, 1], got " + format_number(c.occ_min));
  }
  if (c.bg_threshold < 0 || c.bg_threshold > 255) {
    e.push_back("bg_threshold: must lie in [0, 255], got " +
                std::to_string(c.bg_threshold));
  }
  if (c.tile_size < 1) {
    e.push_back("tile_size: must be >= 1, got " + std::to_string(c.tile_size));
  }
  if (!(c.s_t >= 0.0 && c.s_t <= 100.0)) {
    e.push_back("s_t: must lie in [0, 100], got " + format_number(c.s_t));
  }
  if (c.k < 1) e.push_back("k: must be >= 1, got " + std::to_string(c.k));
  if (!(c.alpha > 0.0 && c.alpha <= 100.0)) {
    e.push_back("alpha: must satisfy 0 < alpha <= 100, got " +
                format_number(c.alpha));
  }
  if (!(c.metric == "median_min_euclidean" || c.metric == "sum_max_cosine" ||
        (allow_both_metrics && c.metric == "both"))) {
    e.push_back("metric: must be median_min_euclidean or sum_max_cosine" +
                std::string(allow_both_metrics ? " or both" : "") + ", got '" +
                c.metric + "'");
  }
  if (c.topk.empty()) e.push_back("topk: must list at least one k");
  for (long k : c.topk) {
    if (k < 1) {
      e.push_back("topk: values must be >= 1, got " + std::to_string(k));
      break;
    }
  }
  if (c.jobs < 0) e.push_back("jobs: must be >= 0, got " + std::to_string(c.jobs));
  if (c.stage2 != "kmeans" && c.stage2 != "splice") {
    e.push_back("stage2: must be kmeans or splice, got '" + c.stage2 + "'");
  }
  if (c.max_iter < 1) {
    e.push_back("max_iter: must be >= 1, got " + std::to_string(c.max_iter));
  }
  return e;
}

void apply_env(PipelineConfig& cfg, std::vector<std::string>& errors) {
  const char* seed = std::getenv("CRISP_SEED");
  if (seed == nullptr || *seed == '\0') return;
  const std::string text = trim(seed);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    errors.push_back("CRISP_SEED: not an unsigned integer: '" + text + "'");
    return;
  }
  cfg.seed = v;
}

void apply_toml(PipelineConfig& cfg, const std::string& toml_text,
                std::vector<std::string>& errors) {
  toml::table doc;
  try {
    doc = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " at line "
        << e.source().begin.line;
    throw ParseError(msg.str());
  }
  const auto* table = doc["pipeline"].as_table();
  if (table == nullptr) return;

  const auto number = [&](const std::string& key, const toml::node& node,
                          double& target) {
    if (auto v = node.value<double>()) {
      target = *v;
    } else {
      errors.push_back(key + ": expected a number");
    }
  };
  const auto integer = [&](const std::string& key, const toml::node& node,
                           long& target) {
    if (auto v = node.value<std::int64_t>()) {
      target = static_cast<long>(*v);
    } else {
      errors.push_back(key + ": expected an integer");
    }
  };
  const auto string = [&](const std::string& key, const toml::node& node,
                          std::string& target) {
    if (auto v = node.value<std::string>()) {
      target = *v;
    } else {
      errors.push_back(key + ": expected a string");
    }
  };

  for (const auto& [raw_key, node] : *table) {
    const std::string key(raw_key.str());
    if (key == "occ_min") {
      number(key, node, cfg.occ_min);
    } else if (key == "bg_threshold") {
      integer(key, node, cfg.bg_threshold);
    } else if (key == "tile_size") {
      integer(key, node, cfg.tile_size);
    } else if (key == "s_t") {
      number(key, node, cfg.s_t);
    } else if (key == "k") {
      integer(key, node, cfg.k);
    } else if (key == "alpha") {
      number(key, node, cfg.alpha);
    } else if (key == "seed") {
      long seed = 0;
      integer(key, node, seed);
      if (seed < 0) {
        errors.push_back("seed: must be >= 0");
      } else {
        cfg.seed = static_cast<std::uint64_t>(seed);
      }
    } else if (key == "metric") {
      string(key, node, cfg.metric);
    } else if (key == "stage2") {
      string(key, node, cfg.stage2);
    } else if (key == "jobs") {
      integer(key, node, cfg.jobs);
    } else if (key == "max_iter") {
      integer(key, node, cfg.max_iter);
    } else if (key == "topk") {
      const auto* arr = node.as_array();
      if (arr == nullptr) {
        errors.push_back("topk: expected an array of integers");
        continue;
      }
      std::vector<long> ks;
      for (const auto& item : *arr) {
        if (auto v = item.value<std::int64_t>()) {
          ks.push_back(static_cast<long>(*v));
        } else {
          errors.push_back("topk: expected an array of integers");
          ks.clear();
          break;
        }
      }
      if (!ks.empty()) cfg.topk = ks;
    } else {
      errors.push_back(key + ": unknown [pipeline] key");
    }
  }
}

std::vector<double> parse_range(const std::string& raw) {
  const std::string text = trim(raw);
  if (text.empty()) throw ValidationError("empty value list");
  std::vector<double> out;
  const auto dots = text.find("..");
  if (dots == std::string::npos) {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item)));
    return out;
  }
  const double lo = parse_double(trim(text.substr(0, dots)));
  std::string rest = text.substr(dots + 2);
  double step = 1.0;
  if (const auto colon = rest.find(':'); colon != std::string::npos) {
    step = parse_double(trim(rest.substr(colon + 1)));
    rest = rest.substr(0, colon);
  }
  const double hi = parse_double(trim(rest));
  if (!(step > 0.0)) throw ValidationError("range step must be positive");
  if (hi < lo) throw ValidationError("range end below start in '" + text + "'");
  // Count first, then derive each value from the index, so accumulated
  // rounding cannot add or drop an endpoint.
  const auto count =
      static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    const double v = lo + static_cast<double>(i) * step;
    out.push_back(std::round(v * 1e9) / 1e9);
  }
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  Context ctx;
  ctx.out = &out;
  ctx.err = &err;
  auto& f = ctx.f;

  CLI::App app{"crisp: case-level patch selection and retrieval", "crisp"};
  app.require_subcommand(1, 1);
  app.add_option("--workdir", f.workdir, "Base directory for relative paths");
  app.add_option("--config", f.config_path, "TOML file with a [pipeline] table");
  ctx.options.emplace("jobs", app.add_option("--jobs", f.cfg.jobs,
                                             "Worker threads (0 = all cores)"));

  auto common = [&](CLI::App* sub) {
    sub->fallthrough();
    add_opt(ctx, sub, "seed", f.cfg.seed, "Random seed");
  };
  auto pipeline_opts = [&](CLI::App* sub, bool ranges) {
    add_opt(ctx, sub, "manifest", f.manifest, "Cohort manifest JSON");
    if (ranges) {
      add_opt(ctx, sub, "s-t", f.s_t_range, "s_t values, e.g. 20..40");
      add_opt(ctx, sub, "k", f.k_range, "K values, e.g. 7..20");
      add_opt(ctx, sub, "alpha", f.alpha_range, "alpha values, e.g. 0.25..10:0.25");
    } else {
      add_opt(ctx, sub, "s-t", f.cfg.s_t, "SPLICE percentile threshold");
      add_opt(ctx, sub, "k", f.cfg.k, "k-means cluster count");
      add_opt(ctx, sub, "alpha", f.cfg.alpha, "Per-cluster retention percent");
    }
    add_opt(ctx, sub, "stage2", f.cfg.stage2, "kmeans | splice");
    add_opt(ctx, sub, "max-iter", f.cfg.max_iter, "k-means iteration cap");
  };

  auto* descriptors = app.add_subcommand("descriptors", "Describe tile images");
  common(descriptors);
  add_opt(ctx, descriptors, "tiles", f.tiles, "Directory of <slide>__<x>_<y>.png");
  add_opt(ctx, descriptors, "out", f.out, "Output directory for CSVs");
  add_opt(ctx, descriptors, "occ-min", f.cfg.occ_min, "Minimum tissue occupancy");
  add_opt(ctx, descriptors, "bg-threshold", f.cfg.bg_threshold,
       "Background brightness threshold");
  add_opt(ctx, descriptors, "tile-size", f.cfg.tile_size, "Expected tile size");

  auto* splice = app.add_subcommand("splice", "Stage 1 collages per slide");
  common(splice);
  add_opt(ctx, splice, "manifest", f.manifest, "Cohort manifest JSON");
  add_opt(ctx, splice, "s-t", f.cfg.s_t, "SPLICE percentile threshold");
  add_opt(ctx, splice, "out", f.out, "collages.json");

  auto* mosaic = app.add_subcommand("mosaic", "Stage 2 case mosaics");
  common(mosaic);
  pipeline_opts(mosaic, false);
  add_opt(ctx, mosaic, "collages", f.collages, "collages.json from splice");
  add_opt(ctx, mosaic, "out", f.out, "mosaics.json");

  auto* retrieve = app.add_subcommand("retrieve", "Rank archive cases for a query");
  common(retrieve);
  add_opt(ctx, retrieve, "manifest", f.manifest, "Cohort manifest JSON");
  add_opt(ctx, retrieve, "mosaics", f.mosaics, "mosaics.json from mosaic");
  add_opt(ctx, retrieve, "metric", f.cfg.metric,
       "median_min_euclidean | sum_max_cosine");
  add_opt(ctx, retrieve, "query", f.query, "Query case id");
  add_opt(ctx, retrieve, "top", f.top, "Number of results");
  add_opt(ctx, retrieve, "out", f.out, "ranking.json");

  auto* evaluate = app.add_subcommand("evaluate", "Leave-one-patient-out run");
  common(evaluate);
  pipeline_opts(evaluate, false);
  add_opt(ctx, evaluate, "metric", f.cfg.metric,
       "median_min_euclidean | sum_max_cosine");
  add_opt(ctx, evaluate, "topk", f.topk_text, "k values, e.g. 1,3,5");
  add_opt(ctx, evaluate, "out", f.out, "report.json");

  auto* grid = app.add_subcommand("gridsearch", "Hyperparameter sweep");
  common(grid);
  pipeline_opts(grid, true);
  add_opt(ctx, grid, "metric", f.cfg.metric,
       "median_min_euclidean | sum_max_cosine | both");
  add_opt(ctx, grid, "topk", f.topk_text, "k values (default 1,3,5,7)");
  add_opt(ctx, grid, "out", f.out, "grid.csv");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
  common(synth);
  add_opt(ctx, synth, "classes", f.classes, "Number of classes");
  add_opt(ctx, synth, "cases-per-class", f.cases_per_class, "Cases per class");
  add_opt(ctx, synth, "slides", f.slides, "Slides per case, e.g. 1..3");
  add_opt(ctx, synth, "patches", f.patches, "Patches per slide, e.g. 80..120");
  add_opt(ctx, synth, "separation", f.separation, "Class mean separation");
  add_opt(ctx, synth, "redundancy", f.redundancy, "Near-duplicate fraction");
  add_opt(ctx, synth, "dim", f.dim, "Embedding dimension");
  add_opt(ctx, synth, "modes", f.modes, "Modes per class");
  add_opt(ctx, synth, "artifacts", f.artifacts, "Artifact patch fraction");
  add_opt(ctx, synth, "out", f.out, "Output directory");

  std::vector<std::string> argv_store{"crisp"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", {e.what()});
    return 2;
  }

  ctx.workdir = f.workdir.empty() ? fs::current_path() : fs::path(f.workdir);
  try {
    if (descriptors->parsed()) cmd_descriptors(ctx);
    if (splice->parsed()) cmd_splice(ctx);
    if (mosaic->parsed()) cmd_mosaic(ctx);
    if (retrieve->parsed()) cmd_retrieve(ctx);
    if (evaluate->parsed()) cmd_evaluate(ctx);
    if (grid->parsed()) cmd_gridsearch(ctx);
    if (synth->parsed()) cmd_synth(ctx);
  } catch (const UsageError& e) {
    print_error(err, "usage", {e.what()});
    return 2;
  } catch (const ConfigError& e) {
    print_error(err, "validation", e.messages());
    return 2;
  } catch (const Error& e) {
    print_error(err, "runtime", {e.what()});
    return 1;
  } catch (const std::exception& e) {
    print_error(err, "runtime", {e.what()});
    return 1;
  }
  return 0;
}

}  // namespace crisp
