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

// Independent reference implementations used to check the library.  These
// deliberately use the most direct formulation available (full-matrix DP,
// dense matrices, set algebra, exhaustive enumeration) and share no code
// with the implementations under test beyond basic types.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "tagrec/folksonomy.hpp"
#include "tagrec/tag_graph.hpp"
#include "tagrec/text.hpp"

namespace oracle {

// Full-matrix Levenshtein over Unicode scalar values.
inline std::size_t levenshtein_cps(const std::vector<char32_t>& a,
                                   const std::vector<char32_t>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<std::size_t>> d(n + 1,
                                          std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
    }
  }
  return d[n][m];
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein_cps(tagrec::decode_utf8(a), tagrec::decode_utf8(b));
}

inline double sim_lev(std::string_view a, std::string_view b) {
  const auto ca = tagrec::decode_utf8(a);
  const auto cb = tagrec::decode_utf8(b);
  const std::size_t mx = std::max(ca.size(), cb.size());
  if (mx == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein_cps(ca, cb)) /
                   static_cast<double>(mx);
}

// Jaccard via std::set algebra.
inline double jaccard(const std::vector<tagrec::ResourceId>& a,
                      const std::vector<tagrec::ResourceId>& b) {
  const std::set<tagrec::ResourceId> sa(a.begin(), a.end());
  const std::set<tagrec::ResourceId> sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (tagrec::ResourceId r : sa) inter += sb.count(r);
  const std::size_t uni = sa.size() + sb.size() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Temporal closeness from raw (resource, last timestamp) maps.
inline double sim_time(
    const std::map<tagrec::ResourceId, tagrec::Timestamp>& a,
    const std::map<tagrec::ResourceId, tagrec::Timestamp>& b,
    tagrec::Timestamp tau_ms) {
  std::size_t inter = 0, close = 0;
  for (const auto& [r, ta] : a) {
    const auto it = b.find(r);
    if (it == b.end()) continue;
    ++inter;
    const tagrec::Timestamp d =
        ta >= it->second ? ta - it->second : it->second - ta;
    if (d <= tau_ms) ++close;
  }
  if (inter == 0) return 0.0;
  return static_cast<double>(close) / static_cast<double>(inter);
}

// Dense-matrix Newman-Girvan modularity over ordered pairs.  `assign` maps
// every node to a community.  Diagonal entries carry twice the self-loop
// weight (none exist in user-facing graphs).
inline double modularity(const tagrec::TagGraph& g,
                         const std::map<tagrec::TagId, int>& assign) {
  const std::size_t n = g.num_nodes();
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  std::map<tagrec::TagId, std::size_t> slot;
  for (std::size_t i = 0; i < n; ++i) slot[g.node_ids[i]] = i;
  for (const auto& e : g.edges) {
    a[slot.at(e.a)][slot.at(e.b)] += e.weight;
    a[slot.at(e.b)][slot.at(e.a)] += e.weight;
  }
  double m2 = 0.0;
  std::vector<double> k(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) k[i] += a[i][j];
    m2 += k[i];
  }
  if (m2 == 0.0) return 0.0;
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (assign.at(g.node_ids[i]) != assign.at(g.node_ids[j])) continue;
      q += a[i][j] / m2 - (k[i] / m2) * (k[j] / m2);
    }
  }
  return q;
}

// Enumerates every partition of `ids` (restricted growth strings) and
// returns the best modularity found.  Feasible up to ~10 nodes.
inline double best_partition_q(const tagrec::TagGraph& g) {
  const std::size_t n = g.num_nodes();
  std::vector<int> rgs(n, 0);
  double best = -1.0;
  const auto eval = [&] {
    std::map<tagrec::TagId, int> assign;
    for (std::size_t i = 0; i < n; ++i) assign[g.node_ids[i]] = rgs[i];
    best = std::max(best, modularity(g, assign));
  };
  // Restricted growth: rgs[0] = 0, rgs[i] <= 1 + max(rgs[0..i-1]).
  const auto max_prefix = [&](std::size_t i) {
    int mx = -1;
    for (std::size_t j = 0; j < i; ++j) mx = std::max(mx, rgs[j]);
    return mx;
  };
  for (;;) {
    eval();
    std::size_t i = n;
    while (i > 1) {
      --i;
      if (rgs[i] <= max_prefix(i)) {
        ++rgs[i];
        for (std::size_t j = i + 1; j < n; ++j) rgs[j] = 0;
        break;
      }
      if (i == 1) return best;
    }
    if (n <= 1) return best;
  }
}

// All-pairs graph built straight from the pairwise weight definition.
inline tagrec::TagGraph brute_force_graph(const tagrec::FolkIndex& ix,
                                          const tagrec::SimParams& params) {
  std::vector<tagrec::TagId> nodes;
  for (tagrec::TagId t : ix.tag_ids()) {
    if (!ix.resources_of_tag(t).empty()) nodes.push_back(t);
  }
  std::vector<tagrec::TagGraph::Edge> edges;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      const double w = tagrec::edge_weight(nodes[i], nodes[j], ix, params);
      if (w > 0.0) edges.push_back({nodes[i], nodes[j], w});
    }
  }
  return tagrec::TagGraph::from_edges(std::move(nodes), std::move(edges));
}

}  // namespace oracle
