// Copyright 2026 The tagrec Authors
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

#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tagrec/evaluation.hpp"
#include "tagrec/hashing.hpp"
#include "tagrec/ingest.hpp"

namespace tagrec {

// A stage failure inside the batch pipeline; carries the stage name so the
// CLI can report which step broke.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : std::runtime_error("stage " + stage + ": " + what),
        stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Every tunable of a batch run.  (data, config) fully determine every
// artifact byte; each artifact embeds the hash of the configuration slice
// that determines it plus the hashes of its upstream artifacts, so reruns
// skip any stage whose inputs are unchanged.
struct PipelineConfig {
  std::filesystem::path data_dir;
  std::filesystem::path work_dir;
  CleaningRules cleaning;
  SplitSpec split;
  SimParams sim;  // variant switches are overwritten by `variant`
  double prune_threshold = 0.1;
  std::uint64_t louvain_seed = 7;
  std::vector<int> k_values = {5, 10, 15, 20};
  std::string variant = "CDR_TIME";
  int threads = 1;
  bool swap_pr_denominators = false;

  void validate() const {
    sim.validate();
    if (!(split.train_fraction > 0.0) || split.train_fraction > 1.0)
      throw std::invalid_argument("train_fraction must be in (0, 1]");
    if (!(prune_threshold >= 0.0 && prune_threshold <= 1.0))
      throw std::invalid_argument("prune_threshold must be in [0, 1]");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    normalize_k_values(k_values);
    VariantSpec::from_name(variant);
    if (work_dir.empty()) throw std::invalid_argument("work_dir is not set");
  }
};

namespace detail {

inline std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

inline std::optional<std::uint64_t> parse_hex64(std::string_view s) {
  if (s.empty() || s.size() > 16) return std::nullopt;
  std::uint64_t v = 0;
  const auto [ptr, ec] =
      std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Tag strings in TSV artifacts escape the three bytes that would break the
// row structure.
inline std::string escape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\t':
        out += "\\t";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\r':
        out += "\\r";
        break;
      case '\\':
        out += "\\\\";
        break;
      default:
        out += c;
    }
  }
  return out;
}

inline std::optional<std::string> unescape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (i + 1 >= s.size()) return std::nullopt;
    ++i;
    switch (s[i]) {
      case 't':
        out += '\t';
        break;
      case 'n':
        out += '\n';
        break;
      case 'r':
        out += '\r';
        break;
      case '\\':
        out += '\\';
        break;
      default:
        return std::nullopt;
    }
  }
  return out;
}

inline std::optional<std::string> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::string content;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    content.append(buf, static_cast<std::size_t>(in.gcount()));
  if (in.bad()) return std::nullopt;
  return content;
}

// Writes via a temp file + rename so a failed run never leaves a partial
// artifact behind.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::string_view content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ec2;
    std::filesystem::remove(tmp, ec2);
    throw std::runtime_error("cannot rename " + tmp.string() + " to " +
                             path.string() + ": " + ec.message());
  }
}

// Splits content into lines; accepts a trailing newline and tolerates \r\n.
inline std::vector<std::string_view> split_lines(std::string_view content) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

// Artifact headers are one line: "# <name> v1\tkey=value\t...".
struct ArtifactHeader {
  std::string name;
  std::map<std::string, std::string> fields;

  std::string field(const std::string& key) const {
    const auto it = fields.find(key);
    return it == fields.end() ? std::string() : it->second;
  }
};

inline std::string format_header(
    std::string_view name,
    const std::vector<std::pair<std::string, std::string>>& fields) {
  std::string out = "# ";
  out += name;
  out += " v1";
  for (const auto& [k, v] : fields) {
    out += '\t';
    out += k;
    out += '=';
    out += v;
  }
  return out;
}

inline std::optional<ArtifactHeader> parse_artifact_header(
    std::string_view line) {
  if (!line.starts_with("# ")) return std::nullopt;
  const auto parts = split_fields(line.substr(2));
  if (parts.empty() || !parts[0].ends_with(" v1")) return std::nullopt;
  ArtifactHeader h;
  h.name = std::string(parts[0].substr(0, parts[0].size() - 3));
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const std::size_t eq = parts[i].find('=');
    if (eq == std::string_view::npos) return std::nullopt;
    h.fields[std::string(parts[i].substr(0, eq))] =
        std::string(parts[i].substr(eq + 1));
  }
  return h;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Configuration hashing.  Each stage's cache key covers exactly the knobs
// that determine that stage's output, so changing tau re-runs graph and
// downstream while changing only the community seed re-runs communities and
// downstream.

inline std::uint64_t ingest_config_hash(const CleaningRules& c,
                                        const SplitSpec& s) {
  Fnv1a64 h;
  h.update("tagrec-ingest-config-v1");
  h.update_u64(c.lowercase ? 1 : 0);
  h.update_u64(c.trim_whitespace ? 1 : 0);
  h.update_u64(static_cast<std::uint64_t>(c.max_tag_length));
  h.update_u64(c.drop_tags_without_content ? 1 : 0);
  h.update_u64(std::bit_cast<std::uint64_t>(s.train_fraction));
  h.update_u64(s.seed);
  h.update_u64(s.per_user_stratified ? 1 : 0);
  return h.digest();
}

inline std::uint64_t graph_config_hash(const SimParams& sp) {
  Fnv1a64 h;
  h.update("tagrec-graph-config-v1");
  h.update_i64(sp.tau_ms);
  h.update_u64(std::bit_cast<std::uint64_t>(sp.lambda));
  h.update_u64(std::bit_cast<std::uint64_t>(sp.alpha_co));
  h.update_u64(std::bit_cast<std::uint64_t>(sp.alpha_nonco));
  h.update_u64(sp.use_lexical ? 1 : 0);
  h.update_u64(sp.use_time ? 1 : 0);
  return h.digest();
}

inline std::uint64_t communities_config_hash(std::uint64_t louvain_seed) {
  Fnv1a64 h;
  h.update("tagrec-communities-config-v1");
  h.update_u64(louvain_seed);
  return h.digest();
}

inline std::uint64_t recommend_config_hash(double prune_threshold, int kmax) {
  Fnv1a64 h;
  h.update("tagrec-recommend-config-v1");
  h.update_u64(std::bit_cast<std::uint64_t>(prune_threshold));
  h.update_u64(static_cast<std::uint64_t>(kmax));
  return h.digest();
}

// Hash of the full run configuration; embedded in the final report.
inline std::uint64_t full_config_hash(const PipelineConfig& cfg,
                                      const VariantSpec& variant) {
  SimParams sp = cfg.sim;
  variant.apply(sp);
  const std::vector<int> ks = normalize_k_values(cfg.k_values);
  Fnv1a64 h;
  h.update("tagrec-config-v1");
  h.update(variant.name());
  h.update_u64(ingest_config_hash(cfg.cleaning, cfg.split));
  h.update_u64(graph_config_hash(sp));
  h.update_u64(communities_config_hash(cfg.louvain_seed));
  h.update_u64(
      std::bit_cast<std::uint64_t>(cfg.prune_threshold));
  h.update_u64(static_cast<std::uint64_t>(ks.size()));
  for (int k : ks) h.update_u64(static_cast<std::uint64_t>(k));
  h.update_u64(cfg.swap_pr_denominators ? 1 : 0);
  return h.digest();
}

// Combined content hash of every regular file directly inside `dir`,
// ordered by filename.
inline std::uint64_t hash_directory(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
    return a.filename().string() < b.filename().string();
  });
  Fnv1a64 h;
  h.update("tagrec-source-v1");
  for (const auto& p : files) {
    h.update(p.filename().string());
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    char buf[1 << 16];
    std::uint64_t size = 0;
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
      h.update(buf, static_cast<std::size_t>(in.gcount()));
      size += static_cast<std::uint64_t>(in.gcount());
    }
    h.update_u64(size);
  }
  return h.digest();
}

// ---------------------------------------------------------------------------
// Folksonomy artifact (train.tsv / test.tsv).
// Header, then one row per entity:
//   U <user_id> / T <tag_id> <escaped string> / R <resource_id>
//   A <user> <tag> <resource> <timestamp>

inline std::string serialize_folksonomy(const Folksonomy& f,
                                        std::string_view kind,
                                        std::uint64_t source_hash,
                                        std::uint64_t config_hash) {
  std::string out = detail::format_header(
      "tagrec-folksonomy",
      {{"kind", std::string(kind)},
       {"source_hash", to_hex16(source_hash)},
       {"config_hash", to_hex16(config_hash)},
       {"users", std::to_string(f.users.size())},
       {"tags", std::to_string(f.tags.size())},
       {"resources", std::to_string(f.resources.size())},
       {"assignments", std::to_string(f.assignments.size())}});
  out += '\n';
  for (UserId u : f.users) {
    out += "U\t";
    out += std::to_string(u);
    out += '\n';
  }
  for (const auto& [id, s] : f.tags) {
    out += "T\t";
    out += std::to_string(id);
    out += '\t';
    out += detail::escape_field(s);
    out += '\n';
  }
  for (ResourceId r : f.resources) {
    out += "R\t";
    out += std::to_string(r);
    out += '\n';
  }
  for (const Assignment& a : f.assignments) {
    out += "A\t";
    out += std::to_string(a.user);
    out += '\t';
    out += std::to_string(a.tag);
    out += '\t';
    out += std::to_string(a.resource);
    out += '\t';
    out += std::to_string(a.timestamp);
    out += '\n';
  }
  return out;
}

struct LoadedFolksonomy {
  Folksonomy folksonomy;
  detail::ArtifactHeader header;
};

// Returns nullopt on any structural problem; callers treat that as a cache
// miss and rebuild.
inline std::optional<LoadedFolksonomy> load_folksonomy(
    const std::filesystem::path& path) {
  const auto content = detail::read_file(path);
  if (!content) return std::nullopt;
  const auto lines = detail::split_lines(*content);
  if (lines.empty()) return std::nullopt;
  const auto header = detail::parse_artifact_header(lines[0]);
  if (!header || header->name != "tagrec-folksonomy") return std::nullopt;

  LoadedFolksonomy out;
  out.header = *header;
  Folksonomy& f = out.folksonomy;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto parts = detail::split_fields(lines[i]);
    if (parts.empty()) return std::nullopt;
    if (parts[0] == "U" && parts.size() == 2) {
      UserId id = 0;
      if (!detail::parse_int(parts[1], id)) return std::nullopt;
      f.users.push_back(id);
    } else if (parts[0] == "T" && parts.size() == 3) {
      TagId id = 0;
      const auto s = detail::unescape_field(parts[2]);
      if (!detail::parse_int(parts[1], id) || !s) return std::nullopt;
      f.tags.emplace_back(id, *s);
    } else if (parts[0] == "R" && parts.size() == 2) {
      ResourceId id = 0;
      if (!detail::parse_int(parts[1], id)) return std::nullopt;
      f.resources.push_back(id);
    } else if (parts[0] == "A" && parts.size() == 5) {
      Assignment a{};
      if (!detail::parse_int(parts[1], a.user) ||
          !detail::parse_int(parts[2], a.tag) ||
          !detail::parse_int(parts[3], a.resource) ||
          !detail::parse_int(parts[4], a.timestamp))
        return std::nullopt;
      f.assignments.push_back(a);
    } else {
      return std::nullopt;
    }
  }
  if (header->field("users") != std::to_string(f.users.size()) ||
      header->field("tags") != std::to_string(f.tags.size()) ||
      header->field("resources") != std::to_string(f.resources.size()) ||
      header->field("assignments") != std::to_string(f.assignments.size()))
    return std::nullopt;
  try {
    validate_folksonomy(f);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph artifact (graph_<variant>.tsv): header then `a<TAB>b<TAB>weight`.

inline std::vector<std::pair<std::string, std::string>> graph_header_fields(
    const VariantSpec& variant, const SimParams& sp,
    std::uint64_t train_hash) {
  return {{"variant", variant.name()},
          {"config_hash", to_hex16(graph_config_hash(sp))},
          {"train_hash", to_hex16(train_hash)},
          {"tau_ms", std::to_string(sp.tau_ms)},
          {"lambda", detail::fmt_g17(sp.lambda)},
          {"alpha_co", detail::fmt_g17(sp.alpha_co)},
          {"alpha_nonco", detail::fmt_g17(sp.alpha_nonco)},
          {"use_lexical", sp.use_lexical ? "1" : "0"},
          {"use_time", sp.use_time ? "1" : "0"}};
}

inline std::string serialize_graph(const TagGraph& g,
                                   const VariantSpec& variant,
                                   const SimParams& sp,
                                   std::uint64_t train_hash) {
  auto fields = graph_header_fields(variant, sp, train_hash);
  fields.emplace_back("nodes", std::to_string(g.num_nodes()));
  fields.emplace_back("edges", std::to_string(g.num_edges()));
  std::string out = detail::format_header("tagrec-graph", fields);
  out += '\n';
  char buf[96];
  for (const TagGraph::Edge& e : g.edges) {
    std::snprintf(buf, sizeof(buf), "%d\t%d\t%.17g\n", e.a, e.b, e.weight);
    out += buf;
  }
  return out;
}

// Loads the cached graph when its header matches the expected parameters
// and upstream hash; node identities (including isolated nodes) are
// supplied by the caller since only edges are stored.
inline std::optional<TagGraph> load_graph(
    const std::filesystem::path& path, const VariantSpec& variant,
    const SimParams& sp, std::uint64_t train_hash,
    std::vector<TagId> node_ids) {
  const auto content = detail::read_file(path);
  if (!content) return std::nullopt;
  const auto lines = detail::split_lines(*content);
  if (lines.empty()) return std::nullopt;
  const auto header = detail::parse_artifact_header(lines[0]);
  if (!header || header->name != "tagrec-graph") return std::nullopt;
  for (const auto& [k, v] : graph_header_fields(variant, sp, train_hash)) {
    if (header->field(k) != v) return std::nullopt;
  }
  if (header->field("nodes") != std::to_string(node_ids.size()))
    return std::nullopt;
  if (header->field("edges") != std::to_string(lines.size() - 1))
    return std::nullopt;

  std::vector<TagGraph::Edge> edges;
  edges.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto parts = detail::split_fields(lines[i]);
    if (parts.size() != 3) return std::nullopt;
    TagId a = 0, b = 0;
    const auto w = detail::parse_double(parts[2]);
    if (!detail::parse_int(parts[0], a) || !detail::parse_int(parts[1], b) ||
        !w)
      return std::nullopt;
    edges.push_back({a, b, *w});
  }
  try {
    return TagGraph::from_edges(std::move(node_ids), std::move(edges));
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Partition artifact (partition_<variant>.tsv): header then
// `tag_id<TAB>community_id` in ascending tag order.

inline std::string serialize_partition(const Partition& part,
                                       const VariantSpec& variant,
                                       std::uint64_t louvain_seed,
                                       std::uint64_t graph_hash) {
  std::string out = detail::format_header(
      "tagrec-partition",
      {{"variant", variant.name()},
       {"config_hash", to_hex16(communities_config_hash(louvain_seed))},
       {"graph_hash", to_hex16(graph_hash)},
       {"seed", std::to_string(louvain_seed)},
       {"nodes", std::to_string(part.community_of.size())},
       {"communities", std::to_string(part.num_communities())},
       {"q", detail::fmt_g17(part.modularity)}});
  out += '\n';
  for (const auto& [tag, comm] : part.community_of) {
    out += std::to_string(tag);
    out += '\t';
    out += std::to_string(comm);
    out += '\n';
  }
  return out;
}

inline std::optional<Partition> load_partition(
    const std::filesystem::path& path, const VariantSpec& variant,
    std::uint64_t louvain_seed, std::uint64_t graph_hash,
    const TagGraph& graph) {
  const auto content = detail::read_file(path);
  if (!content) return std::nullopt;
  const auto lines = detail::split_lines(*content);
  if (lines.empty()) return std::nullopt;
  const auto header = detail::parse_artifact_header(lines[0]);
  if (!header || header->name != "tagrec-partition") return std::nullopt;
  if (header->field("variant") != variant.name()) return std::nullopt;
  if (header->field("config_hash") !=
      to_hex16(communities_config_hash(louvain_seed)))
    return std::nullopt;
  if (header->field("graph_hash") != to_hex16(graph_hash))
    return std::nullopt;
  if (header->field("seed") != std::to_string(louvain_seed))
    return std::nullopt;
  if (header->field("nodes") != std::to_string(graph.num_nodes()))
    return std::nullopt;
  const auto q = detail::parse_double(header->field("q"));
  if (!q) return std::nullopt;

  std::vector<std::pair<TagId, CommunityId>> pairs;
  pairs.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto parts = detail::split_fields(lines[i]);
    if (parts.size() != 2) return std::nullopt;
    TagId tag = 0;
    CommunityId comm = 0;
    if (!detail::parse_int(parts[0], tag) ||
        !detail::parse_int(parts[1], comm))
      return std::nullopt;
    if (!graph.has_node(tag)) return std::nullopt;
    pairs.emplace_back(tag, comm);
  }
  if (pairs.size() != static_cast<std::size_t>(graph.num_nodes()))
    return std::nullopt;
  try {
    Partition part = Partition::from_pairs(std::move(pairs), *q);
    // Integrity: the stored Q must match a from-scratch recomputation.
    if (std::abs(modularity(graph, part) - part.modularity) > 1e-9)
      return std::nullopt;
    return part;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Recommendations artifact (recommendations_<variant>.jsonl).
// First line is a run_meta object; each following line is
// {"user":id,"items":[[resource_id,score],...]} with scores at 6 decimals,
// rows in ascending user order.

inline std::string recommendations_meta_line(const VariantSpec& variant,
                                             int kmax,
                                             double prune_threshold,
                                             std::uint64_t train_hash,
                                             std::uint64_t partition_hash) {
  char buf[512];
  std::snprintf(
      buf, sizeof(buf),
      "{\"run_meta\":{\"artifact\":\"tagrec-recommendations\",\"version\":1,"
      "\"variant\":\"%s\",\"k\":%d,\"prune_threshold\":%.17g,"
      "\"config_hash\":\"%s\",\"train_hash\":\"%s\",\"partition_hash\":\"%s\"}}",
      variant.name().c_str(), kmax, prune_threshold,
      to_hex16(recommend_config_hash(prune_threshold, kmax)).c_str(),
      to_hex16(train_hash).c_str(), to_hex16(partition_hash).c_str());
  return buf;
}

inline std::string serialize_recommendations(
    std::span<const RecommendationList> rows, const std::string& meta_line) {
  std::string out = meta_line;
  out += '\n';
  char buf[64];
  for (const RecommendationList& row : rows) {
    out += "{\"user\":";
    out += std::to_string(row.user);
    out += ",\"items\":[";
    bool first = true;
    for (const auto& [r, score] : row.items) {
      if (!first) out += ',';
      first = false;
      std::snprintf(buf, sizeof(buf), "[%d,%.6f]", r, score);
      out += buf;
    }
    out += "]}\n";
  }
  return out;
}

inline std::optional<std::vector<RecommendationList>> load_recommendations(
    const std::filesystem::path& path, const std::string& expected_meta) {
  const auto content = detail::read_file(path);
  if (!content) return std::nullopt;
  const auto lines = detail::split_lines(*content);
  if (lines.empty() || lines[0] != expected_meta) return std::nullopt;
  std::vector<RecommendationList> rows;
  rows.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    nlohmann::json j = nlohmann::json::parse(lines[i], nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("user") ||
        !j.contains("items"))
      return std::nullopt;
    RecommendationList row;
    if (!j["user"].is_number_integer()) return std::nullopt;
    row.user = j["user"].get<UserId>();
    if (!j["items"].is_array()) return std::nullopt;
    for (const auto& item : j["items"]) {
      if (!item.is_array() || item.size() != 2 ||
          !item[0].is_number_integer() || !item[1].is_number())
        return std::nullopt;
      row.items.emplace_back(item[0].get<ResourceId>(),
                             item[1].get<double>());
    }
    rows.push_back(std::move(row));
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i - 1].user < rows[i].user)) return std::nullopt;
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Report artifacts (report_<variant>.tsv and .json).

struct ReportHashes {
  std::uint64_t config = 0;
  std::uint64_t train = 0;
  std::uint64_t test = 0;
  std::uint64_t graph_file = 0;
  std::uint64_t partition_file = 0;
  std::uint64_t recommendations_file = 0;

  friend bool operator==(const ReportHashes&, const ReportHashes&) = default;
};

inline nlohmann::json report_to_json(const EvalReport& r,
                                     const ReportHashes& hashes) {
  const RunMeta& m = r.run_meta;
  nlohmann::json j;
  j["artifact"] = "tagrec-report";
  j["version"] = 1;
  j["variant"] = r.variant.name();
  j["k_values"] = r.k_values;
  nlohmann::json mp, mr;
  for (int k : r.k_values) {
    mp[std::to_string(k)] = r.mean_precision.at(k);
    mr[std::to_string(k)] = r.mean_recall.at(k);
  }
  j["mean_precision"] = mp;
  j["mean_recall"] = mr;
  j["hashes"] = {
      {"config", to_hex16(hashes.config)},
      {"train", to_hex16(hashes.train)},
      {"test", to_hex16(hashes.test)},
      {"graph_file", to_hex16(hashes.graph_file)},
      {"partition_file", to_hex16(hashes.partition_file)},
      {"recommendations_file", to_hex16(hashes.recommendations_file)}};
  j["run_meta"] = {{"variant", m.variant},
                   {"tau_ms", m.sim.tau_ms},
                   {"lambda", m.sim.lambda},
                   {"alpha_co", m.sim.alpha_co},
                   {"alpha_nonco", m.sim.alpha_nonco},
                   {"use_lexical", m.sim.use_lexical},
                   {"use_time", m.sim.use_time},
                   {"prune_threshold", m.prune_threshold},
                   {"louvain_seed", m.louvain_seed},
                   {"k_values", m.k_values},
                   {"swap_pr_denominators", m.swap_pr_denominators},
                   {"train_hash", to_hex16(m.train_hash)},
                   {"test_hash", to_hex16(m.test_hash)},
                   {"dataset_hash", to_hex16(m.dataset_hash)},
                   {"train_assignments", m.train_assignments},
                   {"test_assignments", m.test_assignments},
                   {"num_tags", m.num_tags},
                   {"num_users", m.num_users},
                   {"num_resources", m.num_resources},
                   {"graph_nodes", m.graph_nodes},
                   {"graph_edges", m.graph_edges},
                   {"communities", m.communities},
                   {"modularity_q", m.modularity_q},
                   {"users_with_test", m.users_with_test},
                   {"users_evaluated", m.users_evaluated},
                   {"users_excluded", m.users_excluded}};
  return j;
}

struct LoadedReport {
  EvalReport report;
  ReportHashes hashes;
};

// Parses a report JSON back into an EvalReport; throws CompareError naming
// the file on any structural problem.
inline LoadedReport load_report(const std::filesystem::path& path) {
  const auto content = detail::read_file(path);
  if (!content)
    throw CompareError("cannot read report file " + path.string());
  nlohmann::json j = nlohmann::json::parse(*content, nullptr, false);
  if (j.is_discarded())
    throw CompareError("corrupt report file " + path.string() +
                       " (invalid JSON)");
  try {
    if (j.at("artifact").get<std::string>() != "tagrec-report" ||
        j.at("version").get<int>() != 1)
      throw CompareError("corrupt report file " + path.string() +
                         " (wrong artifact type)");
    LoadedReport out;
    EvalReport& r = out.report;
    r.variant = VariantSpec::from_name(j.at("variant").get<std::string>());
    r.k_values = j.at("k_values").get<std::vector<int>>();
    for (int k : r.k_values) {
      r.mean_precision[k] =
          j.at("mean_precision").at(std::to_string(k)).get<double>();
      r.mean_recall[k] =
          j.at("mean_recall").at(std::to_string(k)).get<double>();
    }
    const nlohmann::json& m = j.at("run_meta");
    RunMeta& meta = r.run_meta;
    meta.variant = m.at("variant").get<std::string>();
    meta.sim.tau_ms = m.at("tau_ms").get<Timestamp>();
    meta.sim.lambda = m.at("lambda").get<double>();
    meta.sim.alpha_co = m.at("alpha_co").get<double>();
    meta.sim.alpha_nonco = m.at("alpha_nonco").get<double>();
    meta.sim.use_lexical = m.at("use_lexical").get<bool>();
    meta.sim.use_time = m.at("use_time").get<bool>();
    meta.prune_threshold = m.at("prune_threshold").get<double>();
    meta.louvain_seed = m.at("louvain_seed").get<std::uint64_t>();
    meta.k_values = m.at("k_values").get<std::vector<int>>();
    meta.swap_pr_denominators = m.at("swap_pr_denominators").get<bool>();
    const auto hex = [&](const nlohmann::json& node) {
      const auto v = detail::parse_hex64(node.get<std::string>());
      if (!v)
        throw CompareError("corrupt report file " + path.string() +
                           " (bad hash field)");
      return *v;
    };
    meta.train_hash = hex(m.at("train_hash"));
    meta.test_hash = hex(m.at("test_hash"));
    meta.dataset_hash = hex(m.at("dataset_hash"));
    meta.train_assignments = m.at("train_assignments").get<std::size_t>();
    meta.test_assignments = m.at("test_assignments").get<std::size_t>();
    meta.num_tags = m.at("num_tags").get<std::size_t>();
    meta.num_users = m.at("num_users").get<std::size_t>();
    meta.num_resources = m.at("num_resources").get<std::size_t>();
    meta.graph_nodes = m.at("graph_nodes").get<std::size_t>();
    meta.graph_edges = m.at("graph_edges").get<std::size_t>();
    meta.communities = m.at("communities").get<std::size_t>();
    meta.modularity_q = m.at("modularity_q").get<double>();
    meta.users_with_test = m.at("users_with_test").get<std::size_t>();
    meta.users_evaluated = m.at("users_evaluated").get<std::size_t>();
    meta.users_excluded = m.at("users_excluded").get<std::size_t>();
    const nlohmann::json& h = j.at("hashes");
    out.hashes.config = hex(h.at("config"));
    out.hashes.train = hex(h.at("train"));
    out.hashes.test = hex(h.at("test"));
    out.hashes.graph_file = hex(h.at("graph_file"));
    out.hashes.partition_file = hex(h.at("partition_file"));
    out.hashes.recommendations_file = hex(h.at("recommendations_file"));
    return out;
  } catch (const CompareError&) {
    throw;
  } catch (const std::exception& e) {
    throw CompareError("corrupt report file " + path.string() + " (" +
                       e.what() + ")");
  }
}

// ---------------------------------------------------------------------------
// Stages.  Each returns what downstream stages need plus cache-hit info.

struct IngestOutcome {
  Folksonomy train;
  Folksonomy test;
  std::uint64_t source_hash = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t train_hash = 0;  // hash_folksonomy
  std::uint64_t test_hash = 0;
  bool cache_hit = false;
  ParseStats parse;       // zeros on cache hit
  CleanStats clean_stats; // zeros on cache hit
  std::filesystem::path train_path;
  std::filesystem::path test_path;
};

inline IngestOutcome stage_ingest(const PipelineConfig& cfg,
                                  std::ostream& log) {
  std::filesystem::create_directories(cfg.work_dir);
  IngestOutcome out;
  out.config_hash = ingest_config_hash(cfg.cleaning, cfg.split);
  out.train_path = cfg.work_dir / "train.tsv";
  out.test_path = cfg.work_dir / "test.tsv";

  const bool have_data = !cfg.data_dir.empty() &&
                         std::filesystem::is_directory(cfg.data_dir);
  if (have_data) out.source_hash = hash_directory(cfg.data_dir);

  auto train_cached = load_folksonomy(out.train_path);
  auto test_cached = load_folksonomy(out.test_path);
  const auto cache_ok = [&](const std::optional<LoadedFolksonomy>& c,
                            std::string_view kind) {
    if (!c) return false;
    if (c->header.field("kind") != kind) return false;
    if (c->header.field("config_hash") != to_hex16(out.config_hash))
      return false;
    if (have_data &&
        c->header.field("source_hash") != to_hex16(out.source_hash))
      return false;
    return true;
  };
  if (cache_ok(train_cached, "train") && cache_ok(test_cached, "test") &&
      train_cached->header.field("source_hash") ==
          test_cached->header.field("source_hash")) {
    if (!have_data) {
      const auto sh =
          detail::parse_hex64(train_cached->header.field("source_hash"));
      out.source_hash = sh ? *sh : 0;
    }
    out.train = std::move(train_cached->folksonomy);
    out.test = std::move(test_cached->folksonomy);
    out.train_hash = hash_folksonomy(out.train);
    out.test_hash = hash_folksonomy(out.test);
    out.cache_hit = true;
    log << "[ingest] cache hit: " << out.train_path.string() << ", "
        << out.test_path.string() << "\n";
    return out;
  }

  if (!have_data)
    throw IngestError("data directory not found: " + cfg.data_dir.string() +
                      " (and no usable ingest cache in " +
                      cfg.work_dir.string() + ")");

  Folksonomy raw = parse_hetrec(cfg.data_dir, &out.parse);
  log << "[ingest] parsed " << raw.tags.size() << " raw tags, "
      << raw.users.size() << " users, " << raw.resources.size()
      << " resources, " << raw.assignments.size() << " assignments\n";
  Folksonomy cleaned = clean(raw, cfg.cleaning, &out.clean_stats);
  log << "[ingest] cleaned: " << cleaned.tags.size() << " tags, "
      << cleaned.users.size() << " users, " << cleaned.resources.size()
      << " resources, " << cleaned.assignments.size() << " assignments\n";
  auto [train, test] = split(cleaned, cfg.split);
  out.train = std::move(train);
  out.test = std::move(test);
  out.train_hash = hash_folksonomy(out.train);
  out.test_hash = hash_folksonomy(out.test);
  detail::write_file_atomic(
      out.train_path,
      serialize_folksonomy(out.train, "train", out.source_hash,
                           out.config_hash));
  detail::write_file_atomic(
      out.test_path, serialize_folksonomy(out.test, "test", out.source_hash,
                                          out.config_hash));
  log << "[ingest] split " << out.train.assignments.size() << " train / "
      << out.test.assignments.size() << " test assignments -> "
      << out.train_path.string() << ", " << out.test_path.string() << "\n";
  return out;
}

struct GraphOutcome {
  TagGraph graph;
  SimParams sim;  // variant switches applied
  bool cache_hit = false;
  std::filesystem::path file;
  std::uint64_t file_hash = 0;
};

inline GraphOutcome stage_graph(const PipelineConfig& cfg,
                                const VariantSpec& variant,
                                std::uint64_t train_hash,
                                const FolkIndex& train_ix,
                                std::ostream& log) {
  GraphOutcome out;
  out.sim = cfg.sim;
  variant.apply(out.sim);
  out.sim.validate();
  out.file = cfg.work_dir / ("graph_" + variant.name() + ".tsv");

  std::vector<TagId> node_ids;
  for (TagId t : train_ix.tag_ids()) {
    if (!train_ix.resources_of_tag(t).empty()) node_ids.push_back(t);
  }

  if (auto cached =
          load_graph(out.file, variant, out.sim, train_hash, node_ids)) {
    out.graph = std::move(*cached);
    out.cache_hit = true;
    out.file_hash = hash_file(out.file.string());
    log << "[graph:" << variant.name() << "] cache hit: "
        << out.file.string() << " (" << out.graph.num_nodes() << " nodes, "
        << out.graph.num_edges() << " edges)\n";
    return out;
  }

  out.graph = build_graph(train_ix, out.sim, cfg.threads);
  const std::string content =
      serialize_graph(out.graph, variant, out.sim, train_hash);
  detail::write_file_atomic(out.file, content);
  out.file_hash = hash_bytes(content);
  log << "[graph:" << variant.name() << "] built " << out.graph.num_nodes()
      << " nodes, " << out.graph.num_edges() << " edges -> "
      << out.file.string() << "\n";
  return out;
}

struct CommunitiesOutcome {
  Partition partition;
  bool cache_hit = false;
  std::filesystem::path file;
  std::uint64_t file_hash = 0;
};

inline CommunitiesOutcome stage_communities(const PipelineConfig& cfg,
                                            const VariantSpec& variant,
                                            const TagGraph& graph,
                                            std::uint64_t graph_file_hash,
                                            std::ostream& log) {
  CommunitiesOutcome out;
  out.file = cfg.work_dir / ("partition_" + variant.name() + ".tsv");
  if (auto cached = load_partition(out.file, variant, cfg.louvain_seed,
                                   graph_file_hash, graph)) {
    out.partition = std::move(*cached);
    out.cache_hit = true;
    out.file_hash = hash_file(out.file.string());
    log << "[communities:" << variant.name() << "] cache hit: "
        << out.file.string() << " ("
        << out.partition.num_communities() << " communities, Q="
        << detail::fmt_g17(out.partition.modularity) << ")\n";
    return out;
  }
  out.partition = louvain(graph, cfg.louvain_seed);
  const std::string content = serialize_partition(
      out.partition, variant, cfg.louvain_seed, graph_file_hash);
  detail::write_file_atomic(out.file, content);
  out.file_hash = hash_bytes(content);
  log << "[communities:" << variant.name() << "] "
      << out.partition.num_communities() << " communities, Q="
      << detail::fmt_g17(out.partition.modularity) << " -> "
      << out.file.string() << "\n";
  return out;
}

struct RecommendOutcome {
  std::vector<RecommendationList> rows;
  int kmax = 0;
  bool cache_hit = false;
  std::filesystem::path file;
  std::uint64_t file_hash = 0;
};

inline RecommendOutcome stage_recommend(const PipelineConfig& cfg,
                                        const VariantSpec& variant,
                                        const Partition& part,
                                        const FolkIndex& train_ix,
                                        std::uint64_t train_hash,
                                        std::uint64_t partition_file_hash,
                                        std::ostream& log) {
  RecommendOutcome out;
  out.kmax = normalize_k_values(cfg.k_values).back();
  out.file =
      cfg.work_dir / ("recommendations_" + variant.name() + ".jsonl");
  const std::string meta =
      recommendations_meta_line(variant, out.kmax, cfg.prune_threshold,
                                train_hash, partition_file_hash);
  if (auto cached = load_recommendations(out.file, meta)) {
    out.rows = std::move(*cached);
    out.cache_hit = true;
    out.file_hash = hash_file(out.file.string());
    log << "[recommend:" << variant.name() << "] cache hit: "
        << out.file.string() << " (" << out.rows.size() << " users)\n";
    return out;
  }
  const MembershipTable table =
      prune(MembershipTable::build(part, train_ix), cfg.prune_threshold);
  out.rows = recommend_all(part, table, train_ix, out.kmax, cfg.threads,
                           [](UserId) { return true; });
  const std::string content = serialize_recommendations(out.rows, meta);
  detail::write_file_atomic(out.file, content);
  out.file_hash = hash_bytes(content);
  log << "[recommend:" << variant.name() << "] top-" << out.kmax
      << " lists for " << out.rows.size() << " users -> "
      << out.file.string() << "\n";
  return out;
}

struct EvaluateOutcome {
  EvalReport report;
  ReportHashes hashes;
  bool cache_hit = false;
  std::filesystem::path tsv_file;
  std::filesystem::path json_file;
};

inline EvaluateOutcome stage_evaluate(
    const PipelineConfig& cfg, const VariantSpec& variant,
    const Folksonomy& train, const Folksonomy& test,
    const FolkIndex& train_ix, const TagGraph& graph, const Partition& part,
    std::span<const RecommendationList> recs, const ReportHashes& hashes,
    std::ostream& log) {
  EvaluateOutcome out;
  out.hashes = hashes;
  out.tsv_file = cfg.work_dir / ("report_" + variant.name() + ".tsv");
  out.json_file = cfg.work_dir / ("report_" + variant.name() + ".json");

  if (std::filesystem::exists(out.json_file) &&
      std::filesystem::exists(out.tsv_file)) {
    try {
      LoadedReport cached = load_report(out.json_file);
      if (cached.hashes == hashes &&
          cached.report.variant.name() == variant.name()) {
        out.report = std::move(cached.report);
        out.cache_hit = true;
        log << "[evaluate:" << variant.name() << "] cache hit: "
            << out.json_file.string() << "\n";
        return out;
      }
    } catch (const CompareError&) {
      // Unreadable cache: fall through and recompute.
    }
  }

  SimParams sp = cfg.sim;
  variant.apply(sp);
  const std::vector<int> ks = normalize_k_values(cfg.k_values);
  const FolkIndex test_ix = FolkIndex::build(test);
  out.report = assemble_report(
      variant, sp, cfg.prune_threshold, cfg.louvain_seed, ks,
      cfg.swap_pr_denominators, /*include_per_user=*/false, train, test,
      train_ix, test_ix, graph.num_nodes(), graph.num_edges(), part, recs);

  std::string tsv = detail::format_header(
      "tagrec-report",
      {{"variant", variant.name()},
       {"config_hash", to_hex16(hashes.config)},
       {"train_hash", to_hex16(hashes.train)},
       {"test_hash", to_hex16(hashes.test)},
       {"graph_hash", to_hex16(hashes.graph_file)},
       {"partition_hash", to_hex16(hashes.partition_file)},
       {"recommendations_hash", to_hex16(hashes.recommendations_file)}});
  tsv += '\n';
  tsv += report_to_tsv(out.report);
  detail::write_file_atomic(out.tsv_file, tsv);
  detail::write_file_atomic(out.json_file,
                            report_to_json(out.report, hashes).dump(2) +
                                "\n");
  log << "[evaluate:" << variant.name() << "] "
      << out.report.run_meta.users_evaluated << " users evaluated ("
      << out.report.run_meta.users_excluded << " excluded) -> "
      << out.tsv_file.string() << ", " << out.json_file.string() << "\n";
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end orchestration.

struct PipelineRun {
  IngestOutcome ingest;
  GraphOutcome graph;
  CommunitiesOutcome communities;
  RecommendOutcome recommend;
  EvaluateOutcome evaluate;
};

namespace detail {

template <class F>
auto run_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const IngestError&) {
    throw;
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(stage, e.what());
  }
}

}  // namespace detail

// Runs ingest -> graph -> communities -> recommend -> evaluate for the
// configured variant.  Stage errors carry the stage name; ingest problems
// keep their IngestError type so the CLI can map them to their own exit
// code.
inline PipelineRun run_pipeline(const PipelineConfig& cfg, std::ostream& log) {
  // Invalid configuration is a contract error, not a stage failure; it
  // propagates as std::invalid_argument for the CLI to map.
  cfg.validate();
  const VariantSpec variant = VariantSpec::from_name(cfg.variant);

  PipelineRun run;
  run.ingest = detail::run_stage("ingest", [&] { return stage_ingest(cfg, log); });

  const FolkIndex train_ix = detail::run_stage(
      "graph", [&] { return FolkIndex::build(run.ingest.train); });
  run.graph = detail::run_stage("graph", [&] {
    return stage_graph(cfg, variant, run.ingest.train_hash, train_ix, log);
  });
  run.communities = detail::run_stage("communities", [&] {
    return stage_communities(cfg, variant, run.graph.graph,
                             run.graph.file_hash, log);
  });
  run.recommend = detail::run_stage("recommend", [&] {
    return stage_recommend(cfg, variant, run.communities.partition, train_ix,
                           run.ingest.train_hash, run.communities.file_hash,
                           log);
  });
  ReportHashes hashes;
  hashes.config = full_config_hash(cfg, variant);
  hashes.train = run.ingest.train_hash;
  hashes.test = run.ingest.test_hash;
  hashes.graph_file = run.graph.file_hash;
  hashes.partition_file = run.communities.file_hash;
  hashes.recommendations_file = run.recommend.file_hash;
  run.evaluate = detail::run_stage("evaluate", [&] {
    return stage_evaluate(cfg, variant, run.ingest.train, run.ingest.test,
                          train_ix, run.graph.graph,
                          run.communities.partition, run.recommend.rows,
                          hashes, log);
  });
  return run;
}

// Loads >= 2 report files, validates comparability, and writes
// comparison.txt / comparison.tsv into work_dir.  Returns the rendered
// text table (with ordering check lines when all three variants are
// present).
inline std::string run_compare(const std::vector<std::filesystem::path>& paths,
                               const std::filesystem::path& work_dir,
                               std::ostream& log) {
  if (paths.size() < 2)
    throw CompareError("compare needs at least 2 report files");
  std::vector<EvalReport> reports;
  std::string input_hashes;
  for (const auto& p : paths) {
    reports.push_back(load_report(p).report);
    if (!input_hashes.empty()) input_hashes += ',';
    input_hashes += to_hex16(hash_file(p.string()));
  }
  const ComparisonTable table = compare(reports);
  std::string text = comparison_to_text(table);
  const std::string ordering = ordering_check_text(table);
  if (!ordering.empty()) text += ordering;

  std::filesystem::create_directories(work_dir);
  const std::string header = detail::format_header(
      "tagrec-comparison", {{"reports", input_hashes}});
  detail::write_file_atomic(work_dir / "comparison.txt",
                            header + "\n" + text);
  detail::write_file_atomic(work_dir / "comparison.tsv",
                            header + "\n" + comparison_to_tsv(table));
  log << "[compare] " << reports.size() << " reports -> "
      << (work_dir / "comparison.txt").string() << ", "
      << (work_dir / "comparison.tsv").string() << "\n";
  return text;
}

}  // namespace tagrec
