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

// Seeded synthetic corpora for tests: in-memory folksonomies with
// community structure, and raw tab-separated dataset directories in the
// same shape as the real bookmark corpus (tags.dat / bookmarks.dat /
// bookmark_tags.dat).

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tagrec/folksonomy.hpp"
#include "tagrec/rng.hpp"
#include "tagrec/text.hpp"

namespace synth {

// Random tag name: mixed-alphabet, length 3..14, occasionally with a
// non-ASCII scalar so Unicode paths stay exercised.  Names are diverse
// enough that near-duplicates (edit similarity >= 0.8) stay rare, like
// real-world tag vocabularies.
inline std::string random_tag_name(tagrec::Rng& rng) {
  static constexpr char kAlpha[] = "abcdefghijklmnopqrstuvwxyz0123456789-_";
  const std::size_t len = 3 + rng.next_below(12);
  std::string s;
  for (std::size_t i = 0; i < len; ++i) {
    if (rng.next_below(24) == 0) {
      // A scalar from a small non-ASCII pool.
      static constexpr char32_t kPool[] = {0x00E9, 0x00FC, 0x4E2D, 0x0416,
                                           0x1F600};
      tagrec::append_utf8(kPool[rng.next_below(5)], s);
    } else {
      s += kAlpha[rng.next_below(sizeof(kAlpha) - 1)];
    }
  }
  return s;
}

struct CorpusSpec {
  std::size_t users = 50;
  std::size_t tags = 80;
  std::size_t resources = 150;
  std::size_t assignments = 1500;
  std::size_t groups = 4;  // soft community structure
  std::uint64_t seed = 1;
  tagrec::Timestamp start_ms = 1'000'000'000'000;  // arbitrary epoch offset
  tagrec::Timestamp span_ms = 365LL * 86'400'000;
  unsigned stray_percent = 10;  // share of cross-group assignments
};

// Folksonomy with grouped tag/resource usage so graphs have communities.
// Already canonical and validated by construction.
inline tagrec::Folksonomy make_folksonomy(const CorpusSpec& spec) {
  using namespace tagrec;
  Rng rng(mix_seed(spec.seed, 0x636f7270));
  Folksonomy f;
  for (std::size_t u = 0; u < spec.users; ++u)
    f.users.push_back(static_cast<UserId>(u));
  std::vector<std::string> names;
  for (std::size_t t = 0; t < spec.tags; ++t) {
    std::string name = random_tag_name(rng);
    // Uniqueness by suffixing the index keeps ids stable and collisions
    // impossible without a dedupe pass.
    name += '.';
    name += std::to_string(t);
    f.tags.emplace_back(static_cast<TagId>(t), name);
  }
  for (std::size_t r = 0; r < spec.resources; ++r)
    f.resources.push_back(static_cast<ResourceId>(r));

  const std::size_t groups = std::max<std::size_t>(1, spec.groups);
  const std::size_t tags_per = std::max<std::size_t>(1, spec.tags / groups);
  const std::size_t res_per =
      std::max<std::size_t>(1, spec.resources / groups);
  for (std::size_t n = 0; n < spec.assignments; ++n) {
    const std::size_t group = rng.next_below(groups);
    const bool stray = rng.next_below(100) < spec.stray_percent;
    const std::size_t tg = stray ? rng.next_below(groups) : group;
    const std::size_t rg = stray ? rng.next_below(groups) : group;
    const TagId t = static_cast<TagId>(
        std::min(spec.tags - 1, tg * tags_per + rng.next_below(tags_per)));
    const ResourceId r = static_cast<ResourceId>(
        std::min(spec.resources - 1, rg * res_per + rng.next_below(res_per)));
    const UserId u = static_cast<UserId>(rng.next_below(spec.users));
    const Timestamp ts =
        spec.start_ms +
        static_cast<Timestamp>(rng.next_below(
            static_cast<std::uint64_t>(spec.span_ms)));
    f.assignments.push_back({u, t, r, ts});
  }
  f.sort_canonical();
  return f;
}

// Raw-dataset serialization knobs: original ids are spaced out to exercise
// the dense remapping, and a share of tag ids can be left out of tags.dat
// to exercise placeholder naming.
struct RawDirSpec {
  CorpusSpec corpus;
  std::int64_t id_stride = 7;  // original_id = 100 + stride * dense_id
  unsigned missing_tag_rows_percent = 0;
  std::size_t duplicate_assignment_rows = 0;
};

inline std::int64_t raw_id(std::int32_t dense, std::int64_t stride) {
  return 100 + stride * static_cast<std::int64_t>(dense);
}

// Writes tags.dat, bookmarks.dat, and bookmark_tags.dat for the corpus.
inline tagrec::Folksonomy write_raw_dir(const std::filesystem::path& dir,
                                        const RawDirSpec& spec) {
  using namespace tagrec;
  const Folksonomy f = make_folksonomy(spec.corpus);
  std::filesystem::create_directories(dir);
  Rng rng(mix_seed(spec.corpus.seed, 0x72617764));

  {
    std::ofstream out(dir / "tags.dat", std::ios::binary);
    out << "id\tvalue\n";
    for (const auto& [id, name] : f.tags) {
      if (spec.missing_tag_rows_percent > 0 &&
          rng.next_below(100) < spec.missing_tag_rows_percent)
        continue;
      out << raw_id(id, spec.id_stride) << '\t' << name << '\n';
    }
  }
  {
    std::ofstream out(dir / "bookmarks.dat", std::ios::binary);
    out << "id\tmd5\ttitle\turl\tmd5Principal\turlPrincipal\n";
    for (ResourceId r : f.resources) {
      const std::int64_t orig = raw_id(r, spec.id_stride);
      out << orig << "\tdeadbeef\ttitle" << orig << "\thttp://example.com/"
          << orig << "\tdeadbeef\texample.com\n";
    }
  }
  {
    std::ofstream out(dir / "bookmark_tags.dat", std::ios::binary);
    out << "userID\tbookmarkID\ttagID\ttimestamp\n";
    const auto row = [&](const Assignment& a) {
      out << raw_id(a.user, spec.id_stride) << '\t'
          << raw_id(a.resource, spec.id_stride) << '\t'
          << raw_id(a.tag, spec.id_stride) << '\t' << a.timestamp << '\n';
    };
    for (const Assignment& a : f.assignments) row(a);
    for (std::size_t i = 0;
         i < spec.duplicate_assignment_rows && !f.assignments.empty(); ++i)
      row(f.assignments[rng.next_below(f.assignments.size())]);
  }
  return f;
}

}  // namespace synth
