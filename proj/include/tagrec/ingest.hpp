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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tagrec/folksonomy.hpp"
#include "tagrec/rng.hpp"
#include "tagrec/text.hpp"

namespace tagrec {

class IngestError : public std::runtime_error {
 public:
  explicit IngestError(const std::string& what) : std::runtime_error(what) {}
};

struct FileStats {
  std::size_t rows = 0;       // data rows (header excluded)
  std::size_t malformed = 0;  // skipped rows
};

struct ParseStats {
  std::map<std::string, FileStats> files;  // keyed by filename
  std::string tag_file;
  std::string assignment_file;
  std::string bookmark_file;  // empty when absent
  std::size_t duplicate_assignments = 0;
  std::size_t placeholder_tags = 0;  // tag ids seen only in assignments
};

struct CleaningRules {
  bool lowercase = true;
  bool trim_whitespace = true;
  std::size_t max_tag_length = 64;  // in Unicode scalar values
  bool drop_tags_without_content = true;  // no alphanumeric / non-ASCII char

  friend bool operator==(const CleaningRules&, const CleaningRules&) = default;
};

struct CleanStats {
  std::size_t tags_dropped = 0;
  std::size_t tags_merged = 0;
  std::size_t assignments_dropped = 0;
  std::size_t assignments_deduped = 0;
  std::size_t users_removed = 0;
  std::size_t resources_removed = 0;
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 42;
  bool per_user_stratified = true;

  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

template <class Int>
inline bool parse_int(std::string_view s, Int& out) {
  s = trim_ascii(s);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::string lower_copy(std::string_view s) { return ascii_lower(s); }

// Splits file content into lines, tolerating \r\n and a missing trailing
// newline.  Keeps empty interior lines (they count as malformed rows).
inline std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IngestError("cannot open " + p.string());
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= content.size(); ++i) {
    if (i == content.size() || content[i] == '\n') {
      std::size_t end = i;
      if (end > start && content[end - 1] == '\r') --end;
      if (!(i == content.size() && start == i))
        lines.emplace_back(content.substr(start, end - start));
      start = i + 1;
    }
  }
  return lines;
}

// Ensures a row is valid UTF-8, reinterpreting it as Latin-1 when not.
inline std::string ensure_utf8(const std::string& row) {
  if (is_valid_utf8(row)) return row;
  return latin1_to_utf8(row);
}

struct HeaderInfo {
  std::vector<std::string> columns;  // lowercased
  int index_of(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
  bool has(std::string_view name) const { return index_of(name) >= 0; }
};

inline HeaderInfo parse_header(const std::string& line) {
  HeaderInfo h;
  // Materialized first: split_fields returns views into its argument.
  const std::string row = ensure_utf8(line);
  for (std::string_view f : split_fields(row))
    h.columns.push_back(lower_copy(trim_ascii(f)));
  return h;
}

}  // namespace detail

// Reads a HetRec-style directory of tab-separated files.  Files are
// recognized by header columns, not by name:
//   tag definitions:   columns include "id" and "value"
//   tag assignments:   columns include "userid", "bookmarkid", "tagid",
//                      "timestamp"
//   bookmarks (opt.):  columns include "id" and "url"
// Other files are ignored.  Malformed rows are skipped and counted; a file
// whose malformed rows exceed 1% of its data rows aborts the parse.  Ids are
// remapped to dense 0-based ranges in ascending original-id order.
inline Folksonomy parse_hetrec(const std::filesystem::path& dir,
                               ParseStats* stats_out = nullptr) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw IngestError("not a directory: " + dir.string());

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.filename().string() < b.filename().string();
            });

  fs::path tag_path, assign_path, bookmark_path;
  detail::HeaderInfo tag_hdr, assign_hdr, bookmark_hdr;
  for (const fs::path& p : files) {
    std::ifstream in(p, std::ios::binary);
    if (!in) continue;
    std::string first;
    if (!std::getline(in, first)) continue;
    if (!first.empty() && first.back() == '\r') first.pop_back();
    const auto h = detail::parse_header(first);
    if (tag_path.empty() && (h.has("id") || h.has("tagid")) &&
        h.has("value")) {
      tag_path = p;
      tag_hdr = h;
    } else if (assign_path.empty() && h.has("userid") && h.has("bookmarkid") &&
               h.has("tagid") && h.has("timestamp")) {
      assign_path = p;
      assign_hdr = h;
    } else if (bookmark_path.empty() && h.has("id") && h.has("url")) {
      bookmark_path = p;
      bookmark_hdr = h;
    }
  }
  if (tag_path.empty())
    throw IngestError("no tag-definition file (columns id, value) in " +
                      dir.string());
  if (assign_path.empty())
    throw IngestError(
        "no tag-assignment file (columns userID, bookmarkID, tagID, "
        "timestamp) in " +
        dir.string());

  ParseStats stats;
  stats.tag_file = tag_path.filename().string();
  stats.assignment_file = assign_path.filename().string();

  const auto check_budget = [&](const fs::path& p, const FileStats& fstat) {
    if (fstat.rows > 0 &&
        static_cast<double>(fstat.malformed) >
            0.01 * static_cast<double>(fstat.rows)) {
      throw IngestError(p.filename().string() + ": " +
                        std::to_string(fstat.malformed) + " of " +
                        std::to_string(fstat.rows) +
                        " rows malformed (budget is 1%)");
    }
  };

  // Tag definitions: file id -> string.  A repeated id keeps the last row.
  std::unordered_map<std::int64_t, std::string> raw_tags;
  {
    auto lines = detail::read_lines(tag_path);
    FileStats& fstat = stats.files[stats.tag_file];
    int col_id = tag_hdr.index_of("id");
    if (col_id < 0) col_id = tag_hdr.index_of("tagid");
    const int col_value = tag_hdr.index_of("value");
    const std::size_t ncols = tag_hdr.columns.size();
    for (std::size_t li = 1; li < lines.size(); ++li) {
      ++fstat.rows;
      const std::string row = detail::ensure_utf8(lines[li]);
      const auto fields = detail::split_fields(row);
      std::int64_t id = 0;
      if (fields.size() != ncols ||
          !detail::parse_int(fields[static_cast<std::size_t>(col_id)], id) ||
          trim_ascii(fields[static_cast<std::size_t>(col_value)]).empty()) {
        ++fstat.malformed;
        continue;
      }
      raw_tags[id] =
          std::string(fields[static_cast<std::size_t>(col_value)]);
    }
    check_budget(tag_path, fstat);
  }

  // Bookmarks (optional): only the ids matter; unreferenced resources are
  // retained here and removed by clean().
  std::vector<std::int64_t> raw_bookmark_ids;
  if (!bookmark_path.empty()) {
    stats.bookmark_file = bookmark_path.filename().string();
    auto lines = detail::read_lines(bookmark_path);
    FileStats& fstat = stats.files[stats.bookmark_file];
    const int col_id = bookmark_hdr.index_of("id");
    const std::size_t ncols = bookmark_hdr.columns.size();
    for (std::size_t li = 1; li < lines.size(); ++li) {
      ++fstat.rows;
      const std::string row = detail::ensure_utf8(lines[li]);
      const auto fields = detail::split_fields(row);
      std::int64_t id = 0;
      if (fields.size() != ncols ||
          !detail::parse_int(fields[static_cast<std::size_t>(col_id)], id)) {
        ++fstat.malformed;
        continue;
      }
      raw_bookmark_ids.push_back(id);
    }
    check_budget(bookmark_path, fstat);
  }

  // Assignments.
  struct RawAssignment {
    std::int64_t user, tag, resource, ts;
    auto operator<=>(const RawAssignment&) const = default;
  };
  std::vector<RawAssignment> raw_assign;
  {
    auto lines = detail::read_lines(assign_path);
    FileStats& fstat = stats.files[stats.assignment_file];
    const int cu = assign_hdr.index_of("userid");
    const int cb = assign_hdr.index_of("bookmarkid");
    const int ct = assign_hdr.index_of("tagid");
    const int cts = assign_hdr.index_of("timestamp");
    const std::size_t ncols = assign_hdr.columns.size();
    raw_assign.reserve(lines.size());
    for (std::size_t li = 1; li < lines.size(); ++li) {
      ++fstat.rows;
      const auto fields = detail::split_fields(lines[li]);
      RawAssignment a{};
      if (fields.size() != ncols ||
          !detail::parse_int(fields[static_cast<std::size_t>(cu)], a.user) ||
          !detail::parse_int(fields[static_cast<std::size_t>(cb)],
                             a.resource) ||
          !detail::parse_int(fields[static_cast<std::size_t>(ct)], a.tag) ||
          !detail::parse_int(fields[static_cast<std::size_t>(cts)], a.ts) ||
          a.ts < 0) {
        ++fstat.malformed;
        continue;
      }
      raw_assign.push_back(a);
    }
    check_budget(assign_path, fstat);
  }

  // Duplicate (user, tag, resource, timestamp) rows collapse to one.
  std::sort(raw_assign.begin(), raw_assign.end());
  {
    const auto last = std::unique(raw_assign.begin(), raw_assign.end());
    stats.duplicate_assignments =
        static_cast<std::size_t>(raw_assign.end() - last);
    raw_assign.erase(last, raw_assign.end());
  }

  // Build the dense id universe in ascending original-id order.
  std::vector<std::int64_t> user_orig, tag_orig, res_orig;
  for (const auto& a : raw_assign) {
    user_orig.push_back(a.user);
    tag_orig.push_back(a.tag);
    res_orig.push_back(a.resource);
  }
  for (const auto& [id, s] : raw_tags) tag_orig.push_back(id);
  for (std::int64_t id : raw_bookmark_ids) res_orig.push_back(id);
  const auto dedupe = [](std::vector<std::int64_t>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  dedupe(user_orig);
  dedupe(tag_orig);
  dedupe(res_orig);

  std::unordered_map<std::int64_t, std::int32_t> user_map, tag_map, res_map;
  user_map.reserve(user_orig.size());
  tag_map.reserve(tag_orig.size());
  res_map.reserve(res_orig.size());
  for (std::size_t i = 0; i < user_orig.size(); ++i)
    user_map[user_orig[i]] = static_cast<std::int32_t>(i);
  for (std::size_t i = 0; i < tag_orig.size(); ++i)
    tag_map[tag_orig[i]] = static_cast<std::int32_t>(i);
  for (std::size_t i = 0; i < res_orig.size(); ++i)
    res_map[res_orig[i]] = static_cast<std::int32_t>(i);

  Folksonomy f;
  f.users.resize(user_orig.size());
  for (std::size_t i = 0; i < user_orig.size(); ++i)
    f.users[i] = static_cast<std::int32_t>(i);
  f.resources.resize(res_orig.size());
  for (std::size_t i = 0; i < res_orig.size(); ++i)
    f.resources[i] = static_cast<std::int32_t>(i);
  f.tags.reserve(tag_orig.size());
  for (std::size_t i = 0; i < tag_orig.size(); ++i) {
    const std::int64_t orig = tag_orig[i];
    auto it = raw_tags.find(orig);
    if (it != raw_tags.end()) {
      f.tags.emplace_back(static_cast<std::int32_t>(i), it->second);
    } else {
      ++stats.placeholder_tags;
      f.tags.emplace_back(static_cast<std::int32_t>(i),
                          std::to_string(orig));
    }
  }
  f.assignments.reserve(raw_assign.size());
  for (const auto& a : raw_assign) {
    f.assignments.push_back(Assignment{user_map[a.user], tag_map[a.tag],
                                       res_map[a.resource], a.ts});
  }
  f.sort_canonical();

  if (stats_out) *stats_out = std::move(stats);
  return f;
}

// Normalizes tag strings and prunes degenerate entities:
//   - trims ASCII whitespace, lowercases ASCII letters
//   - drops tags that normalize to empty, exceed max_tag_length scalars, or
//     contain no alphanumeric/non-ASCII character
//   - merges tags with identical normalized strings into the lowest tag id
//   - removes users and resources left with zero assignments (tags without
//     assignments are kept; graph construction ignores them anyway)
//   - remaps all ids to dense ranges and canonically sorts assignments
// Running clean on its own output is the identity.
inline Folksonomy clean(const Folksonomy& f, const CleaningRules& rules = {},
                        CleanStats* stats_out = nullptr) {
  CleanStats stats;

  // Pass 1: normalize strings, decide keep/drop, pick merge representatives.
  const std::int32_t n_tags = static_cast<std::int32_t>(f.tags.size());
  std::vector<std::string> norm(static_cast<std::size_t>(n_tags));
  std::vector<bool> kept(static_cast<std::size_t>(n_tags), false);
  std::unordered_map<std::string, std::int32_t> rep_of_string;
  std::vector<std::int32_t> target(static_cast<std::size_t>(n_tags), -1);
  for (std::int32_t i = 0; i < n_tags; ++i) {
    std::string s = f.tags[static_cast<std::size_t>(i)].second;
    if (rules.trim_whitespace) s = std::string(trim_ascii(s));
    if (rules.lowercase) s = ascii_lower(s);
    if (s.empty()) {
      ++stats.tags_dropped;
      continue;
    }
    const auto cps = decode_utf8(s);
    if (cps.size() > rules.max_tag_length) {
      ++stats.tags_dropped;
      continue;
    }
    if (rules.drop_tags_without_content && !has_content_char(cps)) {
      ++stats.tags_dropped;
      continue;
    }
    norm[static_cast<std::size_t>(i)] = std::move(s);
    kept[static_cast<std::size_t>(i)] = true;
    auto [it, inserted] =
        rep_of_string.try_emplace(norm[static_cast<std::size_t>(i)], i);
    if (inserted) {
      target[static_cast<std::size_t>(i)] = i;  // tag ids ascend, so the
    } else {                                    // first hit is the lowest id
      target[static_cast<std::size_t>(i)] = it->second;
      ++stats.tags_merged;
    }
  }

  // Pass 2: rewrite assignments; drop those whose tag vanished.
  std::vector<Assignment> assigns;
  assigns.reserve(f.assignments.size());
  for (const Assignment& a : f.assignments) {
    // Tag ids are dense positions in f.tags only after ingest; general
    // folksonomies need a lookup.
    const auto it = std::lower_bound(
        f.tags.begin(), f.tags.end(), a.tag,
        [](const auto& p, TagId v) { return p.first < v; });
    const std::size_t pos = static_cast<std::size_t>(it - f.tags.begin());
    if (it == f.tags.end() || it->first != a.tag || !kept[pos]) {
      ++stats.assignments_dropped;
      continue;
    }
    Assignment b = a;
    b.tag = f.tags[static_cast<std::size_t>(target[pos])].first;
    assigns.push_back(b);
  }
  std::sort(assigns.begin(), assigns.end());
  {
    const auto last = std::unique(assigns.begin(), assigns.end());
    stats.assignments_deduped =
        static_cast<std::size_t>(assigns.end() - last);
    assigns.erase(last, assigns.end());
  }

  // Pass 3: collect surviving entities.
  std::vector<UserId> used_users;
  std::vector<ResourceId> used_resources;
  for (const Assignment& a : assigns) {
    used_users.push_back(a.user);
    used_resources.push_back(a.resource);
  }
  const auto dedupe = [](auto& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  dedupe(used_users);
  dedupe(used_resources);
  stats.users_removed = f.users.size() - used_users.size();
  stats.resources_removed = f.resources.size() - used_resources.size();

  std::vector<std::pair<TagId, std::string>> kept_tags;
  for (std::int32_t i = 0; i < n_tags; ++i) {
    if (kept[static_cast<std::size_t>(i)] &&
        target[static_cast<std::size_t>(i)] == i)
      kept_tags.emplace_back(f.tags[static_cast<std::size_t>(i)].first,
                             norm[static_cast<std::size_t>(i)]);
  }

  // Pass 4: dense remap in ascending current-id order.
  std::unordered_map<UserId, UserId> umap;
  std::unordered_map<ResourceId, ResourceId> rmap;
  std::unordered_map<TagId, TagId> tmap;
  for (std::size_t i = 0; i < used_users.size(); ++i)
    umap[used_users[i]] = static_cast<UserId>(i);
  for (std::size_t i = 0; i < used_resources.size(); ++i)
    rmap[used_resources[i]] = static_cast<ResourceId>(i);
  for (std::size_t i = 0; i < kept_tags.size(); ++i)
    tmap[kept_tags[i].first] = static_cast<TagId>(i);

  Folksonomy out;
  out.users.resize(used_users.size());
  for (std::size_t i = 0; i < used_users.size(); ++i)
    out.users[i] = static_cast<UserId>(i);
  out.resources.resize(used_resources.size());
  for (std::size_t i = 0; i < used_resources.size(); ++i)
    out.resources[i] = static_cast<ResourceId>(i);
  out.tags.reserve(kept_tags.size());
  for (std::size_t i = 0; i < kept_tags.size(); ++i)
    out.tags.emplace_back(static_cast<TagId>(i), kept_tags[i].second);
  out.assignments.reserve(assigns.size());
  for (const Assignment& a : assigns) {
    out.assignments.push_back(
        Assignment{umap[a.user], tmap[a.tag], rmap[a.resource], a.timestamp});
  }
  out.sort_canonical();

  if (stats_out) *stats_out = stats;
  return out;
}

// Splits assignments into train and test.  Stratified mode samples each
// user independently with a seed derived from (seed, user id), so a user's
// split does not depend on which other users exist.  Each user keeps
// ceil(train_fraction * n) assignments in train, hence users with a single
// assignment always land in train.  Both halves share the full id universe.
inline std::pair<Folksonomy, Folksonomy> split(const Folksonomy& f,
                                               const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0) || spec.train_fraction > 1.0)
    throw std::invalid_argument("split: train_fraction must be in (0, 1]");

  const auto take_count = [&](std::size_t n) {
    if (n == 0) return static_cast<std::size_t>(0);
    const double raw = spec.train_fraction * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    if (k < 1) k = 1;
    if (k > n) k = n;
    return k;
  };

  Folksonomy train, test;
  train.users = test.users = f.users;
  train.tags = test.tags = f.tags;
  train.resources = test.resources = f.resources;

  if (spec.per_user_stratified) {
    std::vector<Assignment> sorted = f.assignments;
    std::sort(sorted.begin(), sorted.end());  // groups by user
    std::size_t i = 0;
    while (i < sorted.size()) {
      const UserId u = sorted[i].user;
      std::size_t j = i;
      while (j < sorted.size() && sorted[j].user == u) ++j;
      std::vector<Assignment> mine(sorted.begin() + static_cast<std::ptrdiff_t>(i),
                                   sorted.begin() + static_cast<std::ptrdiff_t>(j));
      // Shuffle order must not depend on global context: sort by
      // (timestamp, tag, resource) then shuffle with a per-user stream.
      std::sort(mine.begin(), mine.end(), [](const Assignment& a,
                                             const Assignment& b) {
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        if (a.tag != b.tag) return a.tag < b.tag;
        return a.resource < b.resource;
      });
      Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(
                                      static_cast<std::uint32_t>(u))));
      rng.shuffle(mine);
      const std::size_t k = take_count(mine.size());
      train.assignments.insert(train.assignments.end(), mine.begin(),
                               mine.begin() + static_cast<std::ptrdiff_t>(k));
      test.assignments.insert(test.assignments.end(),
                              mine.begin() + static_cast<std::ptrdiff_t>(k),
                              mine.end());
      i = j;
    }
  } else {
    std::vector<Assignment> all = f.assignments;
    std::sort(all.begin(), all.end());
    Rng rng(mix_seed(spec.seed, ~0ULL));
    rng.shuffle(all);
    const std::size_t k = take_count(all.size());
    train.assignments.assign(all.begin(),
                             all.begin() + static_cast<std::ptrdiff_t>(k));
    test.assignments.assign(all.begin() + static_cast<std::ptrdiff_t>(k),
                            all.end());
  }

  train.sort_canonical();
  test.sort_canonical();
  return {std::move(train), std::move(test)};
}

}  // namespace tagrec
