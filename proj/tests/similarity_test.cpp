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

#include "tagrec/similarity.hpp"

#include <gtest/gtest.h>

#include <map>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "synth.hpp"
#include "tagrec/rng.hpp"

namespace tagrec {
namespace {

// Random scalar-level edits keep distances small so the banded DP's
// interesting region gets exercised, not just the early-out.
std::string mutate(const std::string& base, Rng& rng, std::size_t edits) {
  auto cps = decode_utf8(base);
  static constexpr char32_t kPool[] = {U'a', U'b', U'z', U'0',
                                       0x00E9, 0x4E2D, 0x1F600};
  for (std::size_t e = 0; e < edits; ++e) {
    const auto op = rng.next_below(3);
    if (op == 0 && !cps.empty()) {
      cps[rng.next_below(cps.size())] = kPool[rng.next_below(7)];
    } else if (op == 1 && !cps.empty()) {
      cps.erase(cps.begin() +
                static_cast<std::ptrdiff_t>(rng.next_below(cps.size())));
    } else {
      cps.insert(cps.begin() + static_cast<std::ptrdiff_t>(
                                   rng.next_below(cps.size() + 1)),
                 kPool[rng.next_below(7)]);
    }
  }
  std::string out;
  for (char32_t c : cps) append_utf8(c, out);
  return out;
}

TEST(Levenshtein, HandValues) {
  EXPECT_EQ(levenshtein("kitten", "sitting"), 3u);
  EXPECT_EQ(levenshtein("flaw", "lawn"), 2u);
  EXPECT_EQ(levenshtein("", ""), 0u);
  EXPECT_EQ(levenshtein("", "abc"), 3u);
  EXPECT_EQ(levenshtein("abc", ""), 3u);
  EXPECT_EQ(levenshtein("same", "same"), 0u);
  // Multibyte scalars count once each.
  EXPECT_EQ(levenshtein("caf\xC3\xA9", "cafe"), 1u);
  EXPECT_EQ(levenshtein("\xF0\x9F\x98\x80", ""), 1u);
  // An invalid byte decodes to U+FFFD, identical to a literal U+FFFD.
  EXPECT_EQ(levenshtein("\xFF", "\xEF\xBF\xBD"), 0u);
}

TEST(Levenshtein, MatchesFullMatrixOracle) {
  Rng rng(mix_seed(2026, 0x6c657631));
  for (int trial = 0; trial < 600; ++trial) {
    const std::string a = synth::random_tag_name(rng);
    const std::string b = (trial % 2 == 0)
                              ? mutate(a, rng, rng.next_below(5))
                              : synth::random_tag_name(rng);
    EXPECT_EQ(levenshtein(a, b), oracle::levenshtein(a, b))
        << "a=" << a << " b=" << b;
    const double s = sim_lev(a, b);
    EXPECT_EQ(s, oracle::sim_lev(a, b)) << "a=" << a << " b=" << b;
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Levenshtein, MetricProperties) {
  Rng rng(mix_seed(2026, 0x6c657632));
  for (int trial = 0; trial < 400; ++trial) {
    const std::string a = synth::random_tag_name(rng);
    const std::string b = mutate(a, rng, 1 + rng.next_below(4));
    const std::string c = synth::random_tag_name(rng);
    const auto dab = levenshtein(a, b);
    const auto dba = levenshtein(b, a);
    const auto dbc = levenshtein(b, c);
    const auto dac = levenshtein(a, c);
    EXPECT_EQ(levenshtein(a, a), 0u);
    EXPECT_EQ(dab, dba);
    EXPECT_LE(dac, dab + dbc);
    const std::size_t la = decode_utf8(a).size();
    const std::size_t lb = decode_utf8(b).size();
    EXPECT_LE(dab, std::max(la, lb));
    EXPECT_GE(dab, la > lb ? la - lb : lb - la);
  }
}

TEST(Levenshtein, BoundedAgreesWithExactUnderLimit) {
  Rng rng(mix_seed(2026, 0x6c657633));
  for (int trial = 0; trial < 500; ++trial) {
    const std::string a = synth::random_tag_name(rng);
    const std::string b = (trial % 3 == 0)
                              ? synth::random_tag_name(rng)
                              : mutate(a, rng, rng.next_below(6));
    const auto ca = decode_utf8(a);
    const auto cb = decode_utf8(b);
    const std::size_t exact = oracle::levenshtein_cps(ca, cb);
    for (std::size_t limit : {0u, 1u, 2u, 3u, 5u}) {
      const std::size_t got = detail::levenshtein_bounded(ca, cb, limit);
      if (exact <= limit) {
        EXPECT_EQ(got, exact) << "a=" << a << " b=" << b << " lim=" << limit;
      } else {
        EXPECT_GT(got, limit) << "a=" << a << " b=" << b << " lim=" << limit;
      }
    }
  }
}

TEST(Levenshtein, BoundedLengthGapEarlyOut) {
  const auto a = decode_utf8("abcdefghij");
  const auto b = decode_utf8("ab");
  EXPECT_GT(detail::levenshtein_bounded(a, b, 3), 3u);
  EXPECT_EQ(detail::levenshtein_bounded(a, b, 8), 8u);
}

TEST(SimLev, HandValues) {
  EXPECT_DOUBLE_EQ(sim_lev("", ""), 1.0);
  EXPECT_DOUBLE_EQ(sim_lev("", "ab"), 0.0);
  EXPECT_DOUBLE_EQ(sim_lev("jazz", "jaz"), 0.75);
  EXPECT_DOUBLE_EQ(sim_lev("kitten", "sitting"), 1.0 - 3.0 / 7.0);
  EXPECT_DOUBLE_EQ(sim_lev("rock", "rock"), 1.0);
}

// Fixture: resource sets and latest timestamps controlled per tag.
//   tag 0: r0@1000, r1@1000, r2@5000
//   tag 1: r1@1500, r2@5501, r3@9999
//   tag 2: unused
Folksonomy time_fixture() {
  Folksonomy f;
  f.users = {0};
  f.tags = {{0, "a"}, {1, "b"}, {2, "unused"}};
  f.resources = {0, 1, 2, 3};
  f.assignments = {
      {0, 0, 0, 1000}, {0, 0, 1, 400}, {0, 0, 1, 1000}, {0, 0, 2, 5000},
      {0, 1, 1, 1500}, {0, 1, 2, 5501}, {0, 1, 3, 9999},
  };
  f.sort_canonical();
  return f;
}

TEST(Jaccard, HandValues) {
  const Folksonomy f = time_fixture();
  const FolkIndex ix = FolkIndex::build(f);
  // tag0 {0,1,2} vs tag1 {1,2,3}: 2 shared of 4 total.
  EXPECT_DOUBLE_EQ(jaccard(0, 1, ix), 0.5);
  EXPECT_DOUBLE_EQ(jaccard(0, 0, ix), 1.0);
  EXPECT_DOUBLE_EQ(jaccard(0, 2, ix), 0.0);  // one side empty
  EXPECT_DOUBLE_EQ(jaccard(2, 2, ix), 0.0);  // both sides empty
}

TEST(SimTime, WindowBoundaryIsInclusive) {
  const Folksonomy f = time_fixture();
  const FolkIndex ix = FolkIndex::build(f);
  // Shared resources: r1 (last 1000 vs 1500, gap 500), r2 (5000 vs 5501,
  // gap 501).  The last assignment wins, not the first.
  EXPECT_DOUBLE_EQ(sim_time(0, 1, ix, 500), 0.5);
  EXPECT_DOUBLE_EQ(sim_time(0, 1, ix, 499), 0.0);
  EXPECT_DOUBLE_EQ(sim_time(0, 1, ix, 501), 1.0);
  EXPECT_DOUBLE_EQ(sim_time(0, 2, ix, 1000), 0.0);  // no shared resource
  EXPECT_EQ(nco(0, 1, ix, 500), (std::vector<ResourceId>{1}));
  EXPECT_EQ(nco(0, 1, ix, 501), (std::vector<ResourceId>{1, 2}));
  EXPECT_TRUE(nco(0, 1, ix, 0).empty());
}

TEST(SimilarityKernels, MatchRawDataOracles) {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    synth::CorpusSpec cs;
    cs.seed = seed;
    cs.users = 20;
    cs.tags = 40;
    cs.resources = 60;
    cs.assignments = 600;
    const Folksonomy f = synth::make_folksonomy(cs);
    const FolkIndex ix = FolkIndex::build(f);

    // Reference views straight from the assignment list.
    std::map<TagId, std::map<ResourceId, Timestamp>> last;
    for (const auto& a : f.assignments) {
      auto& m = last[a.tag];
      const auto it = m.find(a.resource);
      if (it == m.end() || it->second < a.timestamp)
        m[a.resource] = a.timestamp;
    }
    const auto resources_of = [&](TagId t) {
      std::vector<ResourceId> v;
      for (const auto& [r, ts] : last[t]) v.push_back(r);
      return v;
    };

    constexpr std::int64_t kTau = 40LL * 86'400'000;
    for (TagId t1 = 0; t1 < 40; ++t1) {
      for (TagId t2 = t1; t2 < 40; ++t2) {
        EXPECT_DOUBLE_EQ(jaccard(t1, t2, ix),
                         oracle::jaccard(resources_of(t1), resources_of(t2)))
            << "seed=" << seed << " t1=" << t1 << " t2=" << t2;
        EXPECT_DOUBLE_EQ(sim_time(t1, t2, ix, kTau),
                         oracle::sim_time(last[t1], last[t2], kTau))
            << "seed=" << seed << " t1=" << t1 << " t2=" << t2;
        EXPECT_DOUBLE_EQ(jaccard(t1, t2, ix), jaccard(t2, t1, ix));
        EXPECT_DOUBLE_EQ(sim_time(t1, t2, ix, kTau),
                         sim_time(t2, t1, ix, kTau));
      }
    }
  }
}

TEST(SimParams, ValidateRejectsBadKnobs) {
  SimParams p;
  EXPECT_NO_THROW(p.validate());
  p.tau_ms = -1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = SimParams{};
  p.lambda = 1.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = SimParams{};
  p.alpha_co = -0.1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = SimParams{};
  p.alpha_nonco = 2.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace tagrec
