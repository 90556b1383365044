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
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "tagrec/folksonomy.hpp"
#include "tagrec/text.hpp"

namespace tagrec {

// 30 days in milliseconds: the default co-assignment closeness window.
inline constexpr std::int64_t kDefaultTauMs = 30LL * 24 * 60 * 60 * 1000;

// Knobs shared by graph construction.  use_lexical / use_time select the
// ablation variant: both on is the full model, time off drops the temporal
// term, lexical off additionally ignores string similarity everywhere.
struct SimParams {
  std::int64_t tau_ms = kDefaultTauMs;
  double lambda = 0.5;       // mix between similarity and temporal terms
  double alpha_co = 0.7;     // lexical gate for co-occurring pairs
  double alpha_nonco = 0.8;  // lexical gate for non-co-occurring pairs
  bool use_lexical = true;
  bool use_time = true;

  void validate() const {
    if (tau_ms < 0) throw std::invalid_argument("tau_ms must be >= 0");
    if (!(lambda >= 0.0 && lambda <= 1.0))
      throw std::invalid_argument("lambda must be in [0, 1]");
    if (!(alpha_co >= 0.0 && alpha_co <= 1.0))
      throw std::invalid_argument("alpha_co must be in [0, 1]");
    if (!(alpha_nonco >= 0.0 && alpha_nonco <= 1.0))
      throw std::invalid_argument("alpha_nonco must be in [0, 1]");
  }

  friend bool operator==(const SimParams&, const SimParams&) = default;
};

// |R(t1) ∩ R(t2)| / |R(t1) ∪ R(t2)| over the resource sets carrying each
// tag.  Both sets empty yields 0.
inline double jaccard(TagId t1, TagId t2, const FolkIndex& ix) {
  const auto a = ix.resources_of_tag(t1);
  const auto b = ix.resources_of_tag(t2);
  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace detail {

// Classic two-row dynamic program over already-decoded scalar sequences.
inline std::size_t levenshtein_cps(const std::vector<char32_t>& a,
                                   const std::vector<char32_t>& b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// Banded variant: returns the exact distance when it is <= limit, otherwise
// any value > limit.  Cells outside the diagonal band cannot contribute to
// a distance within the limit, so they are skipped.
inline std::size_t levenshtein_bounded(const std::vector<char32_t>& a,
                                       const std::vector<char32_t>& b,
                                       std::size_t limit) {
  const std::size_t n = a.size(), m = b.size();
  const std::size_t diff = n > m ? n - m : m - n;
  if (diff > limit) return limit + 1;
  if (n == 0) return m;
  if (m == 0) return n;
  const std::size_t big = limit + 1;
  std::vector<std::size_t> prev(m + 1, big), cur(m + 1, big);
  for (std::size_t j = 0; j <= std::min(m, limit); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    const std::size_t lo = i > limit ? i - limit : 1;
    const std::size_t hi = std::min(m, i + limit);
    if (lo > hi) return big;
    // Column 0 is a real cell (value i) while the band still touches it;
    // only cells strictly left of the band are poisoned.
    cur[lo - 1] = lo == 1 ? std::min(i, big) : big;
    std::size_t row_min = big;
    for (std::size_t j = lo; j <= hi; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      std::size_t v = sub;
      if (prev[j] + 1 < v) v = prev[j] + 1;
      if (cur[j - 1] + 1 < v) v = cur[j - 1] + 1;
      if (v > big) v = big;
      cur[j] = v;
      if (v < row_min) row_min = v;
    }
    if (hi < m) cur[hi + 1] = big;
    if (row_min > limit) return big;
    std::swap(prev, cur);
  }
  return prev[m];
}

}  // namespace detail

// Edit distance over Unicode scalar values (each insertion, deletion, or
// substitution of one scalar costs 1).  Invalid UTF-8 bytes decode to
// U+FFFD, so malformed input still has a well-defined distance.
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a == b) return 0;
  const auto ca = decode_utf8(a);
  const auto cb = decode_utf8(b);
  return detail::levenshtein_cps(ca, cb);
}

// 1 - d(a, b) / max(|a|, |b|) in scalars; two empty strings are identical.
inline double sim_lev(std::string_view a, std::string_view b) {
  const auto ca = decode_utf8(a);
  const auto cb = decode_utf8(b);
  const std::size_t mx = std::max(ca.size(), cb.size());
  if (mx == 0) return 1.0;
  const std::size_t d = detail::levenshtein_cps(ca, cb);
  return 1.0 - static_cast<double>(d) / static_cast<double>(mx);
}

// Resources where both tags appear and their latest assignments fall within
// tau_ms of each other.  Sorted ascending.
inline std::vector<ResourceId> nco(TagId t1, TagId t2, const FolkIndex& ix,
                                   std::int64_t tau_ms) {
  const auto r1 = ix.resources_of_tag(t1);
  const auto s1 = ix.last_timestamps_of_tag(t1);
  const auto r2 = ix.resources_of_tag(t2);
  const auto s2 = ix.last_timestamps_of_tag(t2);
  std::vector<ResourceId> out;
  std::size_t i = 0, j = 0;
  while (i < r1.size() && j < r2.size()) {
    if (r1[i] < r2[j]) {
      ++i;
    } else if (r2[j] < r1[i]) {
      ++j;
    } else {
      const Timestamp d = s1[i] >= s2[j] ? s1[i] - s2[j] : s2[j] - s1[i];
      if (d <= tau_ms) out.push_back(r1[i]);
      ++i;
      ++j;
    }
  }
  return out;
}

// |nco| / |R(t1) ∩ R(t2)|: the fraction of shared resources tagged close in
// time.  Defined as 0 when the tags share no resource.
inline double sim_time(TagId t1, TagId t2, const FolkIndex& ix,
                       std::int64_t tau_ms) {
  const auto r1 = ix.resources_of_tag(t1);
  const auto s1 = ix.last_timestamps_of_tag(t1);
  const auto r2 = ix.resources_of_tag(t2);
  const auto s2 = ix.last_timestamps_of_tag(t2);
  std::size_t inter = 0, close = 0;
  std::size_t i = 0, j = 0;
  while (i < r1.size() && j < r2.size()) {
    if (r1[i] < r2[j]) {
      ++i;
    } else if (r2[j] < r1[i]) {
      ++j;
    } else {
      ++inter;
      const Timestamp d = s1[i] >= s2[j] ? s1[i] - s2[j] : s2[j] - s1[i];
      if (d <= tau_ms) ++close;
      ++i;
      ++j;
    }
  }
  if (inter == 0) return 0.0;
  return static_cast<double>(close) / static_cast<double>(inter);
}

}  // namespace tagrec
