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

#include "crisp/cohort.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "crisp/error.hpp"
#include "json.hpp"

namespace crisp {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kCemMagic = {'C', 'E', 'M', '1'};
constexpr std::size_t kCemHeaderBytes = 12;
constexpr std::string_view kDescriptorHeader =
    "patch_id,slide_id,grid_x,grid_y,occupancy,mean_r,mean_g,mean_b,std_r,"
    "std_g,std_b";

std::uint32_t read_u32_le(const std::byte* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) {
    v = (v << 8) | static_cast<std::uint32_t>(p[i]);
  }
  return v;
}

void append_u32_le(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
  }
}

std::vector<std::byte> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  std::vector<std::byte> bytes(raw.size());
  std::memcpy(bytes.data(), raw.data(), raw.size());
  return bytes;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view text, const fs::path& file, std::size_t line,
               std::string_view field) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    std::ostringstream msg;
    msg << file.string() << ":" << line << ": field '" << field
        << "': cannot parse '" << text << "'";
    throw ParseError(msg.str());
  }
  return value;
}

void append_double(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

const nlohmann::json& require(const nlohmann::json& obj, const char* key,
                              const std::string& context) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(context + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

std::string require_string(const nlohmann::json& obj, const char* key,
                           const std::string& context) {
  const auto& v = require(obj, key, context);
  if (!v.is_string()) {
    throw ParseError(context + ": field '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

fs::path resolve_file(const fs::path& base, const std::string& entry,
                      const std::string& context) {
  fs::path p(entry);
  if (p.is_relative()) p = base / p;
  p = p.lexically_normal();
  if (!fs::is_regular_file(p)) {
    throw ValidationError(context + ": dangling file reference '" + entry +
                          "'");
  }
  return p;
}

}  // namespace

std::string make_patch_id(std::string_view slide_id, std::uint32_t grid_x,
                          std::uint32_t grid_y) {
  std::string id(slide_id);
  id += ':';
  id += std::to_string(grid_x);
  id += ':';
  id += std::to_string(grid_y);
  return id;
}

void validate_patch(const PatchRecord& p) {
  const auto fail = [&](const std::string& what) {
    throw ValidationError("patch '" + p.patch_id + "': " + what);
  };
  if (p.patch_id != make_patch_id(p.slide_id, p.grid_x, p.grid_y)) {
    fail("id does not match slide_id:grid_x:grid_y");
  }
  if (!(p.occupancy >= 0.0 && p.occupancy <= 1.0)) {
    fail("occupancy outside [0,1]");
  }
  for (std::size_t c = 0; c < 3; ++c) {
    if (!(p.descriptor[c] >= 0.0 && p.descriptor[c] <= 1.0)) {
      fail("descriptor mean outside [0,1]");
    }
    if (!(p.descriptor[3 + c] >= 0.0 && p.descriptor[3 + c] <= 0.5)) {
      fail("descriptor std outside [0,0.5]");
    }
  }
}

// ---------------------------------------------------------------------------
// EmbeddingMatrix
// ---------------------------------------------------------------------------

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::vector<float> values,
                                 std::vector<std::string> row_ids)
    : dim_(dim), values_(std::move(values)), row_ids_(std::move(row_ids)) {
  if (dim_ == 0) throw ValidationError("embedding dim must be positive");
  if (values_.size() != dim_ * row_ids_.size()) {
    throw ValidationError("embedding payload holds " +
                          std::to_string(values_.size()) +
                          " values, expected " +
                          std::to_string(dim_ * row_ids_.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw ValidationError("non-finite embedding value in row '" +
                            row_ids_[i / dim_] + "'");
    }
  }
  index_.reserve(row_ids_.size());
  for (std::size_t i = 0; i < row_ids_.size(); ++i) {
    if (!index_.emplace(row_ids_[i], i).second) {
      throw ValidationError("duplicate embedding row id '" + row_ids_[i] +
                            "'");
    }
  }
}

std::size_t EmbeddingMatrix::find(const std::string& patch_id) const {
  const auto it = index_.find(patch_id);
  return it == index_.end() ? rows() : it->second;
}

EmbeddingMatrix select_rows(const EmbeddingMatrix& m,
                            std::span<const std::string> ids) {
  std::vector<float> values;
  values.reserve(ids.size() * m.dim());
  for (const auto& id : ids) {
    const auto r = m.find(id);
    if (r == m.rows()) {
      throw ValidationError("select_rows: unknown patch id '" + id + "'");
    }
    const auto row = m.row(r);
    values.insert(values.end(), row.begin(), row.end());
  }
  return {m.dim(), std::move(values), {ids.begin(), ids.end()}};
}

EmbeddingMatrix concat_rows(std::span<const EmbeddingMatrix> parts) {
  std::size_t dim = 0;
  std::vector<float> values;
  std::vector<std::string> ids;
  for (const auto& part : parts) {
    if (part.empty()) continue;
    if (dim == 0) dim = part.dim();
    if (part.dim() != dim) {
      throw ValidationError("concat_rows: dim mismatch (" +
                            std::to_string(dim) + " vs " +
                            std::to_string(part.dim()) + ")");
    }
    values.insert(values.end(), part.values().begin(), part.values().end());
    ids.insert(ids.end(), part.row_ids().begin(), part.row_ids().end());
  }
  if (dim == 0) return {};
  return {dim, std::move(values), std::move(ids)};
}

EmbeddingMatrix parse_cem1(std::span<const std::byte> bytes,
                           std::vector<std::string> row_ids) {
  if (bytes.size() < kCemHeaderBytes ||
      std::memcmp(bytes.data(), kCemMagic.data(), kCemMagic.size()) != 0) {
    throw ParseError("CEM1: bad magic");
  }
  const std::uint64_t count = read_u32_le(bytes.data() + 4);
  const std::uint64_t dim = read_u32_le(bytes.data() + 8);
  const std::uint64_t expected = count * dim * sizeof(float);
  const std::uint64_t payload = bytes.size() - kCemHeaderBytes;
  if (payload < expected) {
    throw ParseError("CEM1: truncated payload (" + std::to_string(payload) +
                     " bytes, expected " + std::to_string(expected) + ")");
  }
  if (payload > expected) {
    throw ParseError("CEM1: " + std::to_string(payload - expected) +
                     " trailing bytes after payload");
  }
  if (row_ids.size() != count) {
    throw ParseError("CEM1: id file has " + std::to_string(row_ids.size()) +
                     " rows, payload declares " + std::to_string(count));
  }
  std::vector<float> values(count * dim);
  const std::byte* p = bytes.data() + kCemHeaderBytes;
  for (auto& v : values) {
    v = std::bit_cast<float>(read_u32_le(p));
    p += 4;
  }
  return {static_cast<std::size_t>(dim), std::move(values),
          std::move(row_ids)};
}

std::vector<std::byte> encode_cem1(const EmbeddingMatrix& m) {
  std::vector<std::byte> out;
  out.reserve(kCemHeaderBytes + m.values().size() * 4);
  for (char c : kCemMagic) out.push_back(static_cast<std::byte>(c));
  append_u32_le(out, static_cast<std::uint32_t>(m.rows()));
  append_u32_le(out, static_cast<std::uint32_t>(m.dim()));
  for (float v : m.values()) append_u32_le(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

EmbeddingMatrix load_embeddings(const fs::path& cem_path,
                                const fs::path& ids_path) {
  const auto bytes = read_file_bytes(cem_path);
  try {
    return parse_cem1(bytes, read_lines(ids_path));
  } catch (const ParseError& e) {
    throw ParseError(cem_path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(cem_path.string() + ": " + e.what());
  }
}

void write_embeddings(const fs::path& cem_path, const fs::path& ids_path,
                      const EmbeddingMatrix& m) {
  const auto bytes = encode_cem1(m);
  std::ofstream out(cem_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + cem_path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  std::ofstream ids(ids_path, std::ios::trunc);
  if (!ids) throw IoError("cannot write " + ids_path.string());
  for (const auto& id : m.row_ids()) ids << id << '\n';
  if (!out || !ids) throw IoError("write failed for " + cem_path.string());
}

// ---------------------------------------------------------------------------
// Descriptor CSV
// ---------------------------------------------------------------------------

std::vector<PatchRecord> load_descriptors(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw IoError("cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(csv.string() + ": empty file, expected header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDescriptorHeader) {
    throw ParseError(csv.string() + ":1: unexpected header '" + line + "'");
  }
  static constexpr std::array<std::string_view, 11> kFields = {
      "patch_id", "slide_id", "grid_x", "grid_y", "occupancy", "mean_r",
      "mean_g",   "mean_b",   "std_r",  "std_g",  "std_b"};

  std::vector<PatchRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != kFields.size()) {
      throw ParseError(csv.string() + ":" + std::to_string(line_no) +
                       ": expected 11 fields, found " +
                       std::to_string(f.size()));
    }
    PatchRecord r;
    r.patch_id = std::string(f[0]);
    r.slide_id = std::string(f[1]);
    r.grid_x = parse_number<std::uint32_t>(f[2], csv, line_no, kFields[2]);
    r.grid_y = parse_number<std::uint32_t>(f[3], csv, line_no, kFields[3]);
    r.occupancy = parse_number<double>(f[4], csv, line_no, kFields[4]);
    for (std::size_t d = 0; d < kDescriptorDim; ++d) {
      r.descriptor[d] =
          parse_number<double>(f[5 + d], csv, line_no, kFields[5 + d]);
    }
    try {
      validate_patch(r);
    } catch (const ValidationError& e) {
      throw ValidationError(csv.string() + ":" + std::to_string(line_no) +
                            ": " + e.what());
    }
    if (!out.empty()) {
      if (r.slide_id != out.front().slide_id) {
        throw ValidationError(csv.string() + ":" + std::to_string(line_no) +
                              ": mixed slide ids in one descriptor file");
      }
      if (!raster_less(out.back(), r)) {
        throw ValidationError(csv.string() + ":" + std::to_string(line_no) +
                              ": rows not in strict raster order");
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_descriptors(const fs::path& csv,
                       std::span<const PatchRecord> patches) {
  std::string text(kDescriptorHeader);
  text += '\n';
  for (const auto& p : patches) {
    text += p.patch_id;
    text += ',';
    text += p.slide_id;
    text += ',';
    text += std::to_string(p.grid_x);
    text += ',';
    text += std::to_string(p.grid_y);
    text += ',';
    append_double(text, p.occupancy);
    for (double v : p.descriptor) {
      text += ',';
      append_double(text, v);
    }
    text += '\n';
  }
  std::ofstream out(csv, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + csv.string());
  out << text;
  if (!out) throw IoError("write failed for " + csv.string());
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

CohortManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  const std::string ctx = path.string();
  const fs::path base = fs::absolute(path).parent_path();

  CohortManifest m;
  m.cohort_id = require_string(doc, "cohort_id", ctx);

  const auto& labels = require(doc, "label_set", ctx);
  if (!labels.is_array() || labels.empty()) {
    throw ParseError(ctx + ": 'label_set' must be a non-empty array");
  }
  std::set<std::string> label_lookup;
  for (const auto& l : labels) {
    if (!l.is_string()) {
      throw ParseError(ctx + ": 'label_set' entries must be strings");
    }
    if (!label_lookup.insert(l.get<std::string>()).second) {
      throw ValidationError(ctx + ": duplicate label '" +
                            l.get<std::string>() + "' in label_set");
    }
    m.label_set.push_back(l.get<std::string>());
  }

  const auto& cases = require(doc, "cases", ctx);
  if (!cases.is_array()) throw ParseError(ctx + ": 'cases' must be an array");

  std::set<std::string> case_ids;
  std::set<std::string> slide_ids;
  std::set<std::string> patch_ids;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const std::string cctx = ctx + ": cases[" + std::to_string(ci) + "]";
    const auto& jc = cases[ci];
    CaseEntry entry;
    entry.case_id = require_string(jc, "case_id", cctx);
    entry.label = require_string(jc, "label", cctx);
    if (!case_ids.insert(entry.case_id).second) {
      throw ValidationError(cctx + ": duplicate case_id '" + entry.case_id +
                            "'");
    }
    if (!label_lookup.contains(entry.label)) {
      throw ValidationError(cctx + ": label '" + entry.label +
                            "' is not in label_set");
    }
    const auto& slides = require(jc, "slides", cctx);
    if (!slides.is_array() || slides.empty()) {
      throw ValidationError(cctx + ": case must list at least one slide");
    }
    for (std::size_t si = 0; si < slides.size(); ++si) {
      const std::string sctx = cctx + ".slides[" + std::to_string(si) + "]";
      const auto& js = slides[si];
      SlideSource s;
      s.slide_id = require_string(js, "slide_id", sctx);
      if (!slide_ids.insert(s.slide_id).second) {
        throw ValidationError(sctx + ": duplicate slide_id '" + s.slide_id +
                              "'");
      }
      s.descriptors =
          resolve_file(base, require_string(js, "descriptors", sctx), sctx);
      s.embeddings =
          resolve_file(base, require_string(js, "embeddings", sctx), sctx);
      s.embedding_ids =
          resolve_file(base, require_string(js, "embedding_ids", sctx), sctx);
      for (auto& id : read_lines(s.embedding_ids)) {
        if (!patch_ids.insert(id).second) {
          throw ValidationError(sctx + ": duplicate patch_id '" + id + "'");
        }
      }
      entry.slides.push_back(std::move(s));
    }
    m.cases.push_back(std::move(entry));
  }
  return m;
}

void write_manifest(const fs::path& path, const CohortManifest& manifest) {
  const fs::path base = fs::absolute(path).parent_path();
  const auto rel = [&](const fs::path& p) {
    const auto r = fs::absolute(p).lexically_relative(base);
    if (r.empty() || *r.begin() == "..") return fs::absolute(p).string();
    return r.generic_string();
  };
  nlohmann::json doc;
  doc["cohort_id"] = manifest.cohort_id;
  doc["label_set"] = manifest.label_set;
  doc["cases"] = nlohmann::json::array();
  for (const auto& c : manifest.cases) {
    nlohmann::json jc;
    jc["case_id"] = c.case_id;
    jc["label"] = c.label;
    jc["slides"] = nlohmann::json::array();
    for (const auto& s : c.slides) {
      jc["slides"].push_back({{"slide_id", s.slide_id},
                              {"descriptors", rel(s.descriptors)},
                              {"embeddings", rel(s.embeddings)},
                              {"embedding_ids", rel(s.embedding_ids)}});
    }
    doc["cases"].push_back(std::move(jc));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Cohort
// ---------------------------------------------------------------------------

const Case* Cohort::find_case(std::string_view case_id) const {
  for (const auto& c : cases) {
    if (c.case_id == case_id) return &c;
  }
  return nullptr;
}

void validate_cohort(const Cohort& cohort) {
  std::set<std::string_view> labels(cohort.label_set.begin(),
                                    cohort.label_set.end());
  std::set<std::string_view> case_ids;
  std::set<std::string_view> slide_ids;
  std::set<std::string_view> patch_ids;
  std::size_t dim = 0;
  for (const auto& c : cohort.cases) {
    if (!case_ids.insert(c.case_id).second) {
      throw ValidationError("duplicate case_id '" + c.case_id + "'");
    }
    if (!labels.contains(c.label)) {
      throw ValidationError("case '" + c.case_id + "': label '" + c.label +
                            "' is not in label_set");
    }
    if (c.slides.empty()) {
      throw ValidationError("case '" + c.case_id + "' has no slides");
    }
    if (!c.embeddings.empty()) {
      if (dim == 0) dim = c.embeddings.dim();
      if (c.embeddings.dim() != dim) {
        throw ValidationError("case '" + c.case_id +
                              "': embedding dim differs across the cohort");
      }
    }
    for (const auto& s : c.slides) {
      if (!slide_ids.insert(s.slide_id).second) {
        throw ValidationError("duplicate slide_id '" + s.slide_id + "'");
      }
      for (std::size_t i = 0; i < s.patches.size(); ++i) {
        const auto& p = s.patches[i];
        validate_patch(p);
        if (p.slide_id != s.slide_id) {
          throw ValidationError("patch '" + p.patch_id +
                                "' listed under slide '" + s.slide_id + "'");
        }
        if (i > 0 && !raster_less(s.patches[i - 1], p)) {
          throw ValidationError("slide '" + s.slide_id +
                                "': patches not in strict raster order");
        }
        if (!patch_ids.insert(p.patch_id).second) {
          throw ValidationError("duplicate patch_id '" + p.patch_id + "'");
        }
      }
    }
  }
}

Cohort load_cohort(const CohortManifest& manifest) {
  Cohort cohort;
  cohort.cohort_id = manifest.cohort_id;
  cohort.label_set = manifest.label_set;
  for (const auto& entry : manifest.cases) {
    Case c;
    c.case_id = entry.case_id;
    c.label = entry.label;
    std::vector<EmbeddingMatrix> parts;
    for (const auto& src : entry.slides) {
      Slide s;
      s.slide_id = src.slide_id;
      s.case_id = entry.case_id;
      s.patches = load_descriptors(src.descriptors);
      for (const auto& p : s.patches) {
        if (p.slide_id != src.slide_id) {
          throw ValidationError(src.descriptors.string() + ": patch '" +
                                p.patch_id + "' belongs to slide '" +
                                p.slide_id + "', manifest says '" +
                                src.slide_id + "'");
        }
      }
      parts.push_back(load_embeddings(src.embeddings, src.embedding_ids));
      c.slides.push_back(std::move(s));
    }
    c.embeddings = concat_rows(parts);
    cohort.cases.push_back(std::move(c));
  }
  validate_cohort(cohort);
  return cohort;
}

}  // namespace crisp
