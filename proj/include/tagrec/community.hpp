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
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tagrec/rng.hpp"
#include "tagrec/tag_graph.hpp"

namespace tagrec {

// Disjoint communities covering every graph node.  Community ids are dense
// 0..K-1, ordered by each community's minimum member tag id.
struct Partition {
  std::vector<std::pair<TagId, CommunityId>> community_of;  // sorted by tag
  std::vector<std::vector<TagId>> communities;  // [id] -> sorted members
  double modularity = 0.0;  // as tracked by the producer

  std::size_t num_communities() const { return communities.size(); }

  CommunityId community(TagId t) const {
    const auto it = std::lower_bound(
        community_of.begin(), community_of.end(), t,
        [](const auto& p, TagId v) { return p.first < v; });
    if (it == community_of.end() || it->first != t)
      throw std::out_of_range("tag " + std::to_string(t) +
                              " not in partition");
    return it->second;
  }

  bool contains(TagId t) const {
    const auto it = std::lower_bound(
        community_of.begin(), community_of.end(), t,
        [](const auto& p, TagId v) { return p.first < v; });
    return it != community_of.end() && it->first == t;
  }

  // Canonicalizes an arbitrary tag -> community labeling: labels become
  // dense ids ordered by minimum member tag id.
  static Partition from_pairs(std::vector<std::pair<TagId, CommunityId>> pairs,
                              double q = 0.0) {
    std::sort(pairs.begin(), pairs.end());
    for (std::size_t i = 1; i < pairs.size(); ++i) {
      if (pairs[i - 1].first == pairs[i].first)
        throw std::invalid_argument("tag assigned to two communities");
    }
    // First occurrence in ascending tag order == ascending min member order.
    std::vector<std::pair<CommunityId, CommunityId>> relabel;  // old -> new
    Partition part;
    part.modularity = q;
    part.community_of.reserve(pairs.size());
    for (const auto& [t, c] : pairs) {
      CommunityId dense = -1;
      for (const auto& [oldc, newc] : relabel) {
        if (oldc == c) {
          dense = newc;
          break;
        }
      }
      if (dense < 0) {
        dense = static_cast<CommunityId>(part.communities.size());
        relabel.emplace_back(c, dense);
        part.communities.emplace_back();
      }
      part.community_of.emplace_back(t, dense);
      part.communities[static_cast<std::size_t>(dense)].push_back(t);
    }
    return part;
  }
};

inline double total_weight(const TagGraph& g) {
  double m = 0.0;
  for (const auto& e : g.edges) m += e.weight;
  return m;
}

// Weighted degree: sum of incident edge weights.
inline double degree(const TagGraph& g, TagId t) {
  double k = 0.0;
  for (const auto& [n, w] : g.neighbors(t)) k += w;
  return k;
}

// Newman modularity over the ordered-pair adjacency convention:
//   Q = sum_c [ in_c / (2m) - (tot_c / (2m))^2 ]
// where in_c counts both orientations of internal edges.  An edgeless graph
// has Q = 0 by definition.  Every graph node must be assigned.
inline double modularity(const TagGraph& g, const Partition& part) {
  const std::size_t n = g.num_nodes();
  std::vector<CommunityId> comm(n);
  for (std::size_t s = 0; s < n; ++s) comm[s] = part.community(g.node_ids[s]);
  std::size_t n_comm = 0;
  for (CommunityId c : comm)
    n_comm = std::max(n_comm, static_cast<std::size_t>(c) + 1);

  std::vector<double> deg(n, 0.0);
  std::vector<double> in(n_comm, 0.0);
  double m = 0.0;
  for (const auto& e : g.edges) {
    const std::size_t sa = g.slot(e.a), sb = g.slot(e.b);
    deg[sa] += e.weight;
    deg[sb] += e.weight;
    m += e.weight;
    if (comm[sa] == comm[sb])
      in[static_cast<std::size_t>(comm[sa])] += 2.0 * e.weight;
  }
  if (m == 0.0) return 0.0;

  std::vector<double> tot(n_comm, 0.0);
  for (std::size_t s = 0; s < n; ++s)
    tot[static_cast<std::size_t>(comm[s])] += deg[s];

  const double m2 = 2.0 * m;
  double q = 0.0;
  for (std::size_t c = 0; c < n_comm; ++c) {
    const double frac = tot[c] / m2;
    q += in[c] / m2 - frac * frac;
  }
  return q;
}

struct LouvainTrace {
  std::vector<double> phase_q;  // Q before any move, then after each phase
  std::vector<std::size_t> phase_moves;
  std::size_t levels = 0;
};

namespace detail {

// Mutable multigraph for the aggregation levels.  Self weights use the
// ordered-pair convention (a collapsed community's internal mass).
struct LevelGraph {
  std::size_t n = 0;
  std::vector<std::size_t> offsets;
  std::vector<std::uint32_t> nbr;
  std::vector<double> w;
  std::vector<double> self_w;
  std::vector<double> k;  // weighted degree incl. self weight
  double m2 = 0.0;        // sum of k()

  void finalize_degrees() {
    k.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = self_w[i];
      for (std::size_t e = offsets[i]; e < offsets[i + 1]; ++e) s += w[e];
      k[i] = s;
    }
    m2 = 0.0;
    for (double v : k) m2 += v;
  }
};

inline double level_q(const std::vector<double>& in,
                      const std::vector<double>& tot, double m2) {
  double q = 0.0;
  for (std::size_t c = 0; c < in.size(); ++c) {
    if (tot[c] == 0.0 && in[c] == 0.0) continue;
    const double frac = tot[c] / m2;
    q += in[c] / m2 - frac * frac;
  }
  return q;
}

}  // namespace detail

// Louvain community detection.  Node visit order is shuffled with a
// deterministic PRNG seeded by `seed`; all other choices are tie-broken by
// lowest community id, so the result depends only on (graph, seed).  A
// phase's sweeps stop when a full sweep improves Q by less than 1e-7; the
// algorithm stops when a phase moves no node.  The returned partition's
// modularity field carries the internally tracked Q.
inline Partition louvain(const TagGraph& g, std::uint64_t seed,
                         LouvainTrace* trace_out = nullptr) {
  if (g.num_nodes() == 0)
    throw std::invalid_argument("louvain: graph has no nodes");
  constexpr double kPhaseGainThreshold = 1e-7;

  const std::size_t n0 = g.num_nodes();
  LouvainTrace trace;

  if (g.edges.empty()) {
    std::vector<std::pair<TagId, CommunityId>> pairs;
    pairs.reserve(n0);
    for (std::size_t s = 0; s < n0; ++s)
      pairs.emplace_back(g.node_ids[s],
                         static_cast<CommunityId>(s));
    trace.phase_q = {0.0};
    if (trace_out) *trace_out = std::move(trace);
    return Partition::from_pairs(std::move(pairs), 0.0);
  }

  // Level 0 working graph from the input graph.
  detail::LevelGraph lg;
  lg.n = n0;
  lg.offsets.assign(n0 + 1, 0);
  for (const auto& e : g.edges) {
    ++lg.offsets[g.slot(e.a) + 1];
    ++lg.offsets[g.slot(e.b) + 1];
  }
  for (std::size_t i = 0; i < n0; ++i) lg.offsets[i + 1] += lg.offsets[i];
  lg.nbr.resize(lg.offsets[n0]);
  lg.w.resize(lg.offsets[n0]);
  {
    std::vector<std::size_t> cur(lg.offsets.begin(), lg.offsets.end() - 1);
    for (const auto& e : g.edges) {
      const std::size_t sa = g.slot(e.a), sb = g.slot(e.b);
      lg.nbr[cur[sa]] = static_cast<std::uint32_t>(sb);
      lg.w[cur[sa]++] = e.weight;
      lg.nbr[cur[sb]] = static_cast<std::uint32_t>(sa);
      lg.w[cur[sb]++] = e.weight;
    }
  }
  lg.self_w.assign(n0, 0.0);
  lg.finalize_degrees();

  std::vector<std::uint32_t> assign(n0);  // original slot -> level community
  for (std::size_t i = 0; i < n0; ++i) assign[i] = static_cast<std::uint32_t>(i);

  Rng rng(seed);
  double tracked_q = 0.0;

  for (;;) {
    const std::size_t n = lg.n;
    std::vector<std::uint32_t> comm(n);
    std::vector<double> tot(n), in(n);
    for (std::size_t i = 0; i < n; ++i) {
      comm[i] = static_cast<std::uint32_t>(i);
      tot[i] = lg.k[i];
      in[i] = lg.self_w[i];
    }
    double q = detail::level_q(in, tot, lg.m2);
    if (trace.phase_q.empty()) trace.phase_q.push_back(q);

    std::vector<std::uint32_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
    rng.shuffle(order);

    // Scratch for neighbor-community weights, epoch-stamped.
    std::vector<double> nw(n, 0.0);
    std::vector<std::uint32_t> nstamp(n, 0xFFFFFFFFu);
    std::vector<std::uint32_t> touched;
    touched.reserve(64);

    std::size_t phase_moves = 0;
    for (std::uint32_t epoch = 0;; ++epoch) {
      std::size_t sweep_moves = 0;
      for (std::size_t oi = 0; oi < n; ++oi) {
        const std::uint32_t i = order[oi];
        const std::uint32_t old_c = comm[i];

        touched.clear();
        for (std::size_t e = lg.offsets[i]; e < lg.offsets[i + 1]; ++e) {
          const std::uint32_t c = comm[lg.nbr[e]];
          if (nstamp[c] == epoch + 1) {
            nw[c] += lg.w[e];
          } else {
            nstamp[c] = epoch + 1;
            nw[c] = lg.w[e];
            touched.push_back(c);
          }
        }
        const double k_i_old =
            nstamp[old_c] == epoch + 1 ? nw[old_c] : 0.0;

        // Remove i from its community.
        tot[old_c] -= lg.k[i];
        in[old_c] -= 2.0 * k_i_old + lg.self_w[i];

        // Score candidates (own community included) with i removed:
        //   score(C) = k_iC - tot_C * k_i / m2
        // the community-dependent part of the modularity gain.  Staying
        // wins ties against moving; among equally scored move targets the
        // lowest community id wins.
        const double ki_over = lg.k[i] / lg.m2;
        std::uint32_t best_c = old_c;
        double best_score = k_i_old - tot[old_c] * ki_over;
        for (const std::uint32_t c : touched) {
          if (c == old_c) continue;
          const double score = nw[c] - tot[c] * ki_over;
          if (score > best_score ||
              (score == best_score && best_c != old_c && c < best_c)) {
            best_score = score;
            best_c = c;
          }
        }

        const double k_i_best =
            nstamp[best_c] == epoch + 1 ? nw[best_c] : 0.0;
        tot[best_c] += lg.k[i];
        in[best_c] += 2.0 * k_i_best + lg.self_w[i];
        comm[i] = best_c;
        if (best_c != old_c) ++sweep_moves;

        // Reset stamps for next node by bumping the epoch marker via
        // per-node unique markers: reuse epoch+1 across the sweep would
        // leak community weights between nodes, so clear touched entries.
        for (const std::uint32_t c : touched) nstamp[c] = 0xFFFFFFFFu;
      }
      phase_moves += sweep_moves;
      const double q_new = detail::level_q(in, tot, lg.m2);
      const double gained = q_new - q;
      q = q_new;
      if (sweep_moves == 0 || gained < kPhaseGainThreshold) break;
    }
    tracked_q = q;
    trace.phase_q.push_back(q);
    trace.phase_moves.push_back(phase_moves);
    ++trace.levels;

    if (phase_moves == 0) break;

    // Renumber level communities densely by first occurrence (ascending
    // minimum member slot) and aggregate.
    std::vector<std::uint32_t> dense(n, 0xFFFFFFFFu);
    std::uint32_t n_next = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (dense[comm[i]] == 0xFFFFFFFFu) dense[comm[i]] = n_next++;
    }
    for (std::size_t i = 0; i < n0; ++i) assign[i] = dense[comm[assign[i]]];

    if (n_next == static_cast<std::uint32_t>(n)) break;  // nothing collapsed

    // Aggregate edges between dense communities.
    std::vector<double> self_next(n_next, 0.0);
    std::vector<std::pair<std::uint64_t, double>> agg;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t ci = dense[comm[i]];
      self_next[ci] += lg.self_w[i];
      for (std::size_t e = lg.offsets[i]; e < lg.offsets[i + 1]; ++e) {
        const std::uint32_t j = lg.nbr[e];
        if (j < i) continue;  // each undirected edge once (no self edges)
        const std::uint32_t cj = dense[comm[j]];
        if (ci == cj) {
          self_next[ci] += 2.0 * lg.w[e];
        } else {
          const std::uint64_t a = std::min(ci, cj), b = std::max(ci, cj);
          agg.emplace_back((a << 32) | b, lg.w[e]);
        }
      }
    }
    std::sort(agg.begin(), agg.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });

    detail::LevelGraph next;
    next.n = n_next;
    next.self_w = std::move(self_next);
    next.offsets.assign(n_next + 1, 0);
    std::vector<std::pair<std::uint64_t, double>> folded;
    {
      std::size_t i2 = 0;
      while (i2 < agg.size()) {
        const std::uint64_t key = agg[i2].first;
        double sum = 0.0;
        while (i2 < agg.size() && agg[i2].first == key) sum += agg[i2++].second;
        folded.emplace_back(key, sum);
      }
    }
    for (const auto& [key, wsum] : folded) {
      ++next.offsets[(key >> 32) + 1];
      ++next.offsets[(key & 0xFFFFFFFFULL) + 1];
    }
    for (std::size_t i = 0; i < n_next; ++i) next.offsets[i + 1] += next.offsets[i];
    next.nbr.resize(next.offsets[n_next]);
    next.w.resize(next.offsets[n_next]);
    {
      std::vector<std::size_t> cur(next.offsets.begin(), next.offsets.end() - 1);
      for (const auto& [key, wsum] : folded) {
        const auto a = static_cast<std::uint32_t>(key >> 32);
        const auto b = static_cast<std::uint32_t>(key & 0xFFFFFFFFULL);
        next.nbr[cur[a]] = b;
        next.w[cur[a]++] = wsum;
        next.nbr[cur[b]] = a;
        next.w[cur[b]++] = wsum;
      }
      // Neighbor lists must be sorted for deterministic accumulation.
      for (std::size_t i = 0; i < n_next; ++i) {
        const std::size_t lo = next.offsets[i], hi = next.offsets[i + 1];
        std::vector<std::pair<std::uint32_t, double>> tmp;
        tmp.reserve(hi - lo);
        for (std::size_t e2 = lo; e2 < hi; ++e2)
          tmp.emplace_back(next.nbr[e2], next.w[e2]);
        std::sort(tmp.begin(), tmp.end());
        for (std::size_t t2 = 0; t2 < tmp.size(); ++t2) {
          next.nbr[lo + t2] = tmp[t2].first;
          next.w[lo + t2] = tmp[t2].second;
        }
      }
    }
    next.finalize_degrees();
    lg = std::move(next);
  }

  std::vector<std::pair<TagId, CommunityId>> pairs;
  pairs.reserve(n0);
  for (std::size_t s = 0; s < n0; ++s)
    pairs.emplace_back(g.node_ids[s], static_cast<CommunityId>(assign[s]));
  Partition part = Partition::from_pairs(std::move(pairs), tracked_q);
  if (trace_out) *trace_out = std::move(trace);
  return part;
}

}  // namespace tagrec
