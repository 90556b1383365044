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
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tagrec/folksonomy.hpp"
#include "tagrec/similarity.hpp"

namespace tagrec {

// Weighted undirected tag graph.  Edges are stored once with a < b, sorted
// by (a, b); adjacency mirrors every edge in both directions.
struct TagGraph {
  struct Edge {
    TagId a = 0;
    TagId b = 0;
    double weight = 0.0;

    friend bool operator==(const Edge&, const Edge&) = default;
  };

  std::vector<TagId> node_ids;  // sorted, unique
  std::vector<Edge> edges;      // sorted by (a, b), a < b, weight in (0, 1]

  std::vector<std::size_t> adj_offsets;           // per node slot
  std::vector<std::pair<TagId, double>> adjacency;  // sorted by neighbor id

  std::size_t num_nodes() const { return node_ids.size(); }
  std::size_t num_edges() const { return edges.size(); }

  bool has_node(TagId t) const {
    return std::binary_search(node_ids.begin(), node_ids.end(), t);
  }

  std::size_t slot(TagId t) const {
    const auto it = std::lower_bound(node_ids.begin(), node_ids.end(), t);
    if (it == node_ids.end() || *it != t)
      throw std::out_of_range("unknown graph node " + std::to_string(t));
    return static_cast<std::size_t>(it - node_ids.begin());
  }

  std::span<const std::pair<TagId, double>> neighbors(TagId t) const {
    const std::size_t s = slot(t);
    return {adjacency.data() + adj_offsets[s],
            adj_offsets[s + 1] - adj_offsets[s]};
  }
  std::span<const std::pair<TagId, double>> neighbors_slot(
      std::size_t s) const {
    return {adjacency.data() + adj_offsets[s],
            adj_offsets[s + 1] - adj_offsets[s]};
  }

  // Builds a graph from a node set and edge list, sorting edges and
  // validating structure: endpoints must be known nodes, a < b, no
  // duplicates, weights finite in (0, 1].
  static TagGraph from_edges(std::vector<TagId> nodes,
                             std::vector<Edge> edge_list) {
    TagGraph g;
    g.node_ids = std::move(nodes);
    if (!detail::is_sorted_unique(g.node_ids))
      throw std::invalid_argument("graph nodes not sorted/unique");
    g.edges = std::move(edge_list);
    std::sort(g.edges.begin(), g.edges.end(),
              [](const Edge& x, const Edge& y) {
                if (x.a != y.a) return x.a < y.a;
                return x.b < y.b;
              });
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
      const Edge& e = g.edges[i];
      if (e.a >= e.b)
        throw std::invalid_argument("graph edge endpoints not ordered");
      if (!g.has_node(e.a) || !g.has_node(e.b))
        throw std::invalid_argument("graph edge references unknown node");
      if (!(e.weight > 0.0) || !std::isfinite(e.weight) || e.weight > 1.0)
        throw std::invalid_argument("graph edge weight outside (0, 1]");
      if (i > 0 && g.edges[i - 1].a == e.a && g.edges[i - 1].b == e.b)
        throw std::invalid_argument("duplicate graph edge");
    }
    g.build_adjacency();
    return g;
  }

  void build_adjacency() {
    const std::size_t n = node_ids.size();
    std::vector<std::size_t> deg(n, 0);
    for (const Edge& e : edges) {
      ++deg[slot(e.a)];
      ++deg[slot(e.b)];
    }
    adj_offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i)
      adj_offsets[i + 1] = adj_offsets[i] + deg[i];
    adjacency.assign(adj_offsets[n], {0, 0.0});
    std::vector<std::size_t> cursor(adj_offsets.begin(),
                                    adj_offsets.end() - 1);
    // Edges are sorted by (a, b); filling a-side then b-side in two passes
    // keeps each node's neighbor list sorted by neighbor id.
    for (const Edge& e : edges)
      adjacency[cursor[slot(e.a)]++] = {e.b, e.weight};
    for (const Edge& e : edges)
      adjacency[cursor[slot(e.b)]++] = {e.a, e.weight};
    // The b-side pass appends neighbors with ids that may interleave the
    // a-side ones, so sort each node's list once.
    for (std::size_t i = 0; i < n; ++i) {
      std::sort(adjacency.begin() + static_cast<std::ptrdiff_t>(adj_offsets[i]),
                adjacency.begin() + static_cast<std::ptrdiff_t>(adj_offsets[i + 1]));
    }
  }
};

namespace detail {

// Shared-resource statistics for a tag pair.
struct PairStats {
  std::size_t inter = 0;  // |R(a) ∩ R(b)|
  std::size_t uni = 0;    // |R(a) ∪ R(b)|
  std::size_t close = 0;  // shared resources with close last assignments
};

inline PairStats pair_stats(std::span<const ResourceId> r1,
                            std::span<const Timestamp> s1,
                            std::span<const ResourceId> r2,
                            std::span<const Timestamp> s2,
                            std::int64_t tau_ms) {
  PairStats st;
  std::size_t i = 0, j = 0;
  while (i < r1.size() && j < r2.size()) {
    if (r1[i] < r2[j]) {
      ++i;
    } else if (r2[j] < r1[i]) {
      ++j;
    } else {
      ++st.inter;
      const Timestamp d = s1[i] >= s2[j] ? s1[i] - s2[j] : s2[j] - s1[i];
      if (d <= tau_ms) ++st.close;
      ++i;
      ++j;
    }
  }
  st.uni = r1.size() + r2.size() - st.inter;
  return st;
}

// Computes sim_lev(a, b) only when it can reach `alpha`; returns whether
// the gate passes and stores the exact similarity value.  The value is
// bit-identical to sim_lev() because it uses the same final expression.
inline bool sim_lev_gate(const std::vector<char32_t>& ca,
                         const std::vector<char32_t>& cb, double alpha,
                         double* value) {
  const std::size_t mx = std::max(ca.size(), cb.size());
  if (mx == 0) {
    *value = 1.0;
    return 1.0 >= alpha;
  }
  const std::size_t diff =
      ca.size() > cb.size() ? ca.size() - cb.size() : cb.size() - ca.size();
  const double best = 1.0 - static_cast<double>(diff) / static_cast<double>(mx);
  if (best < alpha) return false;
  // Small nudge so an exact threshold distance is never rejected by the
  // band; over-admission is corrected by the final comparison.
  const auto limit = static_cast<std::size_t>(
      std::floor((1.0 - alpha) * static_cast<double>(mx) + 1e-9));
  const std::size_t d = levenshtein_bounded(ca, cb, limit);
  if (d > limit) return false;
  const double v = 1.0 - static_cast<double>(d) / static_cast<double>(mx);
  *value = v;
  return v >= alpha;
}

inline bool sim_lev_gate(std::string_view a, std::string_view b, double alpha,
                         double* value) {
  const auto ca = decode_utf8(a);
  const auto cb = decode_utf8(b);
  return sim_lev_gate(ca, cb, alpha, value);
}

// The piecewise weight rule.  `have_lev` means the lexical gate for the
// applicable branch passed and `lev` holds the exact similarity.
inline double combine_weight(bool co_occurring, double jac, bool have_lev,
                             double lev, double time_frac,
                             const SimParams& p) {
  if (co_occurring) {
    double s = jac;
    if (p.use_lexical && have_lev && lev > s) s = lev;
    if (p.use_time) return p.lambda * s + (1.0 - p.lambda) * time_frac;
    return s;
  }
  if (!p.use_lexical) return 0.0;
  if (have_lev) return p.lambda * lev;
  return 0.0;
}

}  // namespace detail

// Weight of the (t1, t2) edge under `params`.  Tags sharing at least one
// resource mix set/lexical similarity with temporal affinity; tags that
// never co-occur connect only through strong lexical similarity.  Returns 0
// when no edge should exist.  t1 != t2 required.
inline double edge_weight(TagId t1, TagId t2, const FolkIndex& ix,
                          const SimParams& p) {
  if (t1 == t2) throw std::invalid_argument("edge_weight: t1 == t2");
  const auto st = detail::pair_stats(
      ix.resources_of_tag(t1), ix.last_timestamps_of_tag(t1),
      ix.resources_of_tag(t2), ix.last_timestamps_of_tag(t2), p.tau_ms);
  const bool co = st.inter > 0;
  const double jac =
      st.uni == 0 ? 0.0
                  : static_cast<double>(st.inter) / static_cast<double>(st.uni);
  const double tf =
      co ? static_cast<double>(st.close) / static_cast<double>(st.inter) : 0.0;
  double lev = 0.0;
  bool have = false;
  if (p.use_lexical) {
    const double alpha = co ? p.alpha_co : p.alpha_nonco;
    have = detail::sim_lev_gate(ix.tag_string(t1), ix.tag_string(t2), alpha,
                                &lev);
  }
  return detail::combine_weight(co, jac, have, lev, tf, p);
}

// All unordered tag pairs sharing at least one resource, sorted by
// (first id, second id).
inline std::vector<std::pair<TagId, TagId>> co_occurring_pairs(
    const FolkIndex& ix) {
  const std::size_t n_tags = ix.num_tags();
  const std::size_t n_res = ix.num_resources();
  // resource slot -> tag slots (ascending, because tags are scanned in
  // ascending slot order).
  std::vector<std::size_t> counts(n_res + 1, 0);
  const auto res_ids = ix.resource_ids();
  const auto res_slot_of = [&](ResourceId r) {
    return static_cast<std::size_t>(
        std::lower_bound(res_ids.begin(), res_ids.end(), r) - res_ids.begin());
  };
  for (std::size_t ts = 0; ts < n_tags; ++ts) {
    for (ResourceId r : ix.resources_of_tag_slot(ts)) ++counts[res_slot_of(r) + 1];
  }
  for (std::size_t i = 0; i < n_res; ++i) counts[i + 1] += counts[i];
  std::vector<std::uint32_t> bucket(counts[n_res]);
  {
    std::vector<std::size_t> cursor(counts.begin(), counts.end() - 1);
    for (std::size_t ts = 0; ts < n_tags; ++ts) {
      for (ResourceId r : ix.resources_of_tag_slot(ts))
        bucket[cursor[res_slot_of(r)]++] = static_cast<std::uint32_t>(ts);
    }
  }
  std::vector<std::uint64_t> keys;
  for (std::size_t rs = 0; rs < n_res; ++rs) {
    const std::size_t lo = counts[rs], hi = counts[rs + 1];
    for (std::size_t i = lo; i < hi; ++i) {
      for (std::size_t j = i + 1; j < hi; ++j) {
        keys.push_back((static_cast<std::uint64_t>(bucket[i]) << 32) |
                       bucket[j]);
      }
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::vector<std::pair<TagId, TagId>> out;
  out.reserve(keys.size());
  const auto tag_ids = ix.tag_ids();
  for (std::uint64_t k : keys) {
    out.emplace_back(tag_ids[static_cast<std::size_t>(k >> 32)],
                     tag_ids[static_cast<std::size_t>(k & 0xFFFFFFFFULL)]);
  }
  return out;
}

// Edit-distance similarity join: returns exactly the unordered pairs of
// distinct tag ids whose sim_lev is >= alpha, sorted by id pair.
//
// Candidate generation combines a length filter with character-bigram
// blocking.  For a pair with lengths (la <= lb) the distance budget is
// d = floor((1 - alpha) * lb); if la - 1 - 2*d >= 1 the shorter string has
// more bigrams than edits can destroy or miss, so the pair must share a
// bigram and the inverted index finds it.  Length pairs without that
// guarantee (very short strings, or permissive alpha) are compared
// exhaustively, so the join never loses a qualifying pair.
inline std::vector<std::pair<TagId, TagId>> lexical_candidate_pairs(
    const std::vector<std::pair<TagId, std::string>>& tags, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("alpha must be in [0, 1]");
  const std::size_t n = tags.size();
  {
    std::vector<TagId> ids;
    ids.reserve(n);
    for (const auto& [id, s] : tags) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
      throw std::invalid_argument("duplicate tag id in lexical join input");
  }

  std::vector<std::vector<char32_t>> cps(n);
  std::vector<std::size_t> len(n);
  std::size_t max_len = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cps[i] = decode_utf8(tags[i].second);
    len[i] = cps[i].size();
    max_len = std::max(max_len, len[i]);
  }

  const auto budget = [&](std::size_t mx) {
    return static_cast<std::size_t>(
        std::floor((1.0 - alpha) * static_cast<double>(mx) + 1e-9));
  };
  const auto length_ok = [&](std::size_t la, std::size_t lb) {
    const std::size_t mx = std::max(la, lb);
    const std::size_t diff = la > lb ? la - lb : lb - la;
    return diff <= budget(mx);
  };
  const auto blocking_complete = [&](std::size_t la, std::size_t lb) {
    const std::size_t mn = std::min(la, lb);
    const std::size_t d = budget(std::max(la, lb));
    return mn >= 2 + 2 * d;
  };

  std::vector<std::pair<std::uint32_t, std::uint32_t>> found;
  const auto try_pair = [&](std::size_t i, std::size_t j) {
    double v;
    if (detail::sim_lev_gate(cps[i], cps[j], alpha, &v))
      found.emplace_back(static_cast<std::uint32_t>(i),
                         static_cast<std::uint32_t>(j));
  };

  // Bigram blocking over pairs with the completeness guarantee (and any
  // others that happen to share a bigram; duplicates are removed at the
  // end).
  {
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> postings;
    postings.reserve(n * 4);
    std::vector<std::uint32_t> stamp(n, 0xFFFFFFFFu);
    std::vector<std::uint64_t> grams;
    for (std::size_t i = 0; i < n; ++i) {
      grams.clear();
      for (std::size_t k = 0; k + 1 < cps[i].size(); ++k) {
        grams.push_back((static_cast<std::uint64_t>(cps[i][k]) << 21) |
                        static_cast<std::uint64_t>(cps[i][k + 1]));
      }
      std::sort(grams.begin(), grams.end());
      grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
      for (std::uint64_t g : grams) {
        auto it = postings.find(g);
        if (it != postings.end()) {
          for (std::uint32_t j : it->second) {
            if (stamp[j] == i) continue;
            stamp[j] = static_cast<std::uint32_t>(i);
            if (length_ok(len[j], len[i])) try_pair(j, i);
          }
        }
      }
      for (std::uint64_t g : grams) postings[g].push_back(static_cast<std::uint32_t>(i));
    }
  }

  // Exhaustive pass for length pairs the index cannot guarantee.
  {
    std::unordered_map<std::size_t, std::vector<std::uint32_t>> by_len;
    for (std::size_t i = 0; i < n; ++i)
      by_len[len[i]].push_back(static_cast<std::uint32_t>(i));
    std::vector<std::size_t> lens;
    lens.reserve(by_len.size());
    for (const auto& [l, v] : by_len) lens.push_back(l);
    std::sort(lens.begin(), lens.end());
    for (std::size_t x = 0; x < lens.size(); ++x) {
      for (std::size_t y = x; y < lens.size(); ++y) {
        const std::size_t la = lens[x], lb = lens[y];
        if (!length_ok(la, lb) || blocking_complete(la, lb)) continue;
        const auto& va = by_len[la];
        const auto& vb = by_len[lb];
        if (la == lb) {
          for (std::size_t i = 0; i < va.size(); ++i)
            for (std::size_t j = i + 1; j < va.size(); ++j)
              try_pair(va[i], va[j]);
        } else {
          for (std::uint32_t i : va)
            for (std::uint32_t j : vb) try_pair(i, j);
        }
      }
    }
  }

  std::vector<std::pair<TagId, TagId>> out;
  out.reserve(found.size());
  for (const auto& [i, j] : found) {
    TagId a = tags[i].first, b = tags[j].first;
    if (a > b) std::swap(a, b);
    out.emplace_back(a, b);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace detail {

// Enumerates (tag slot, tag slot, close flag) for every shared resource,
// packs them into sortable keys, and reduces runs into per-pair statistics.
// Returns compact parallel arrays sorted by pair.
struct CoPairTable {
  std::vector<std::uint64_t> pair_key;  // (slot_a << 32) | slot_b
  std::vector<std::uint32_t> inter;
  std::vector<std::uint32_t> close;
};

inline CoPairTable co_pair_table(const FolkIndex& ix, std::int64_t tau_ms) {
  const std::size_t n_tags = ix.num_tags();
  const std::size_t n_res = ix.num_resources();
  const auto res_ids = ix.resource_ids();

  // resource -> (tag slot, last ts), tag slots ascending per resource.
  std::vector<std::size_t> offsets(n_res + 1, 0);
  const auto res_slot_of = [&](ResourceId r) {
    return static_cast<std::size_t>(
        std::lower_bound(res_ids.begin(), res_ids.end(), r) - res_ids.begin());
  };
  for (std::size_t ts = 0; ts < n_tags; ++ts) {
    for (ResourceId r : ix.resources_of_tag_slot(ts))
      ++offsets[res_slot_of(r) + 1];
  }
  for (std::size_t i = 0; i < n_res; ++i) offsets[i + 1] += offsets[i];
  std::vector<std::uint32_t> rt_tag(offsets[n_res]);
  std::vector<Timestamp> rt_ts(offsets[n_res]);
  {
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (std::size_t ts = 0; ts < n_tags; ++ts) {
      const auto rs = ix.resources_of_tag_slot(ts);
      const auto tss = ix.last_timestamps_of_tag_slot(ts);
      for (std::size_t k = 0; k < rs.size(); ++k) {
        const std::size_t slot = res_slot_of(rs[k]);
        rt_tag[cursor[slot]] = static_cast<std::uint32_t>(ts);
        rt_ts[cursor[slot]] = tss[k];
        ++cursor[slot];
      }
    }
  }

  // Pack (pair, close) into one key: pair in the high bits, closeness in
  // bit 0, so sorting groups pairs and close flags count cheaply.
  std::vector<std::uint64_t> keys;
  for (std::size_t rs = 0; rs < n_res; ++rs) {
    const std::size_t lo = offsets[rs], hi = offsets[rs + 1];
    for (std::size_t i = lo; i < hi; ++i) {
      const std::uint64_t a = rt_tag[i];
      const Timestamp ta = rt_ts[i];
      for (std::size_t j = i + 1; j < hi; ++j) {
        const Timestamp tb = rt_ts[j];
        const Timestamp d = ta >= tb ? ta - tb : tb - ta;
        const std::uint64_t close = d <= tau_ms ? 1u : 0u;
        keys.push_back((a << 33) |
                       (static_cast<std::uint64_t>(rt_tag[j]) << 1) | close);
      }
    }
  }
  std::sort(keys.begin(), keys.end());

  CoPairTable t;
  std::size_t i = 0;
  while (i < keys.size()) {
    const std::uint64_t pair = keys[i] >> 1;
    const std::uint64_t slot_a = pair >> 32;
    const std::uint64_t slot_b = pair & 0xFFFFFFFFULL;
    std::uint32_t cnt = 0, cls = 0;
    while (i < keys.size() && (keys[i] >> 1) == pair) {
      ++cnt;
      cls += static_cast<std::uint32_t>(keys[i] & 1u);
      ++i;
    }
    t.pair_key.push_back((slot_a << 32) | slot_b);
    t.inter.push_back(cnt);
    t.close.push_back(cls);
  }
  return t;
}

template <class Fn>
inline void parallel_chunks(std::size_t total, int threads, Fn&& fn) {
  const int t = std::max(1, threads);
  if (t == 1 || total == 0) {
    fn(0, static_cast<std::size_t>(0), total);
    return;
  }
  const std::size_t per = (total + static_cast<std::size_t>(t) - 1) /
                          static_cast<std::size_t>(t);
  std::vector<std::thread> pool;
  for (int c = 0; c < t; ++c) {
    const std::size_t lo = std::min(total, static_cast<std::size_t>(c) * per);
    const std::size_t hi = std::min(total, lo + per);
    if (lo >= hi) break;
    pool.emplace_back([&fn, c, lo, hi] { fn(c, lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// Builds the tag graph over every tag with at least one assignment.  The
// result is identical to evaluating edge_weight on all pairs and keeping
// positive weights, but co-occurring pairs are enumerated through shared
// resources and lexical-only pairs through the similarity join.  Chunk
// results are concatenated in slot order, so the thread count never
// changes the output.
inline TagGraph build_graph(const FolkIndex& ix, const SimParams& p,
                            int threads = 1) {
  p.validate();

  std::vector<TagId> nodes;
  std::vector<std::size_t> node_slots;
  for (std::size_t ts = 0; ts < ix.num_tags(); ++ts) {
    if (!ix.resources_of_tag_slot(ts).empty()) {
      nodes.push_back(ix.tag_ids()[ts]);
      node_slots.push_back(ts);
    }
  }

  const detail::CoPairTable table = detail::co_pair_table(ix, p.tau_ms);
  const auto tag_ids = ix.tag_ids();

  std::vector<std::vector<TagGraph::Edge>> chunk_edges(
      static_cast<std::size_t>(std::max(1, threads)));
  detail::parallel_chunks(
      table.pair_key.size(), threads,
      [&](int chunk, std::size_t lo, std::size_t hi) {
        auto& out = chunk_edges[static_cast<std::size_t>(chunk)];
        std::vector<char32_t> ca, cb;
        for (std::size_t i = lo; i < hi; ++i) {
          const auto slot_a =
              static_cast<std::size_t>(table.pair_key[i] >> 32);
          const auto slot_b =
              static_cast<std::size_t>(table.pair_key[i] & 0xFFFFFFFFULL);
          const std::size_t deg_a = ix.resources_of_tag_slot(slot_a).size();
          const std::size_t deg_b = ix.resources_of_tag_slot(slot_b).size();
          const std::size_t inter = table.inter[i];
          const std::size_t uni = deg_a + deg_b - inter;
          const double jac =
              static_cast<double>(inter) / static_cast<double>(uni);
          const double tf = static_cast<double>(table.close[i]) /
                            static_cast<double>(inter);
          double lev = 0.0;
          bool have = false;
          if (p.use_lexical) {
            have = detail::sim_lev_gate(ix.tag_string_at(slot_a),
                                        ix.tag_string_at(slot_b), p.alpha_co,
                                        &lev);
          }
          const double w =
              detail::combine_weight(true, jac, have, lev, tf, p);
          if (w > 0.0) {
            out.push_back(TagGraph::Edge{tag_ids[slot_a], tag_ids[slot_b], w});
          }
        }
      });

  std::vector<TagGraph::Edge> edges;
  {
    std::size_t total = 0;
    for (const auto& v : chunk_edges) total += v.size();
    edges.reserve(total);
    for (auto& v : chunk_edges) {
      edges.insert(edges.end(), v.begin(), v.end());
      v.clear();
      v.shrink_to_fit();
    }
  }

  if (p.use_lexical) {
    std::vector<std::pair<TagId, std::string>> node_tags;
    node_tags.reserve(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k)
      node_tags.emplace_back(nodes[k], ix.tag_string_at(node_slots[k]));
    const auto cands = lexical_candidate_pairs(node_tags, p.alpha_nonco);

    // Drop candidates that already co-occur; their edge exists above.
    const auto& keys = table.pair_key;
    std::vector<std::pair<TagId, TagId>> lex_only;
    for (const auto& [a, b] : cands) {
      const std::uint64_t k =
          (static_cast<std::uint64_t>(ix.tag_slot(a)) << 32) |
          static_cast<std::uint64_t>(ix.tag_slot(b));
      if (!std::binary_search(keys.begin(), keys.end(), k))
        lex_only.emplace_back(a, b);
    }

    std::vector<std::vector<TagGraph::Edge>> lex_chunks(
        static_cast<std::size_t>(std::max(1, threads)));
    detail::parallel_chunks(
        lex_only.size(), threads, [&](int chunk, std::size_t lo, std::size_t hi) {
          auto& out = lex_chunks[static_cast<std::size_t>(chunk)];
          for (std::size_t i = lo; i < hi; ++i) {
            const auto [a, b] = lex_only[i];
            const double w = edge_weight(a, b, ix, p);
            if (w > 0.0) out.push_back(TagGraph::Edge{a, b, w});
          }
        });
    for (auto& v : lex_chunks)
      edges.insert(edges.end(), v.begin(), v.end());
  }

  return TagGraph::from_edges(std::move(nodes), std::move(edges));
}

}  // namespace tagrec
