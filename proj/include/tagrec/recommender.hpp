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
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tagrec/community.hpp"
#include "tagrec/folksonomy.hpp"

namespace tagrec {

// N(r, c): how many tag assignments on resource r use a tag of community c,
// counting assignment multiplicity.
inline std::map<CommunityId, std::int64_t> community_counts(
    ResourceId r, const Partition& part, const FolkIndex& ix) {
  ix.resource_slot(r);  // reject unknown resources
  std::map<CommunityId, std::int64_t> out;
  for (std::size_t ts = 0; ts < ix.num_tags(); ++ts) {
    const auto res = ix.resources_of_tag_slot(ts);
    const auto it = std::lower_bound(res.begin(), res.end(), r);
    if (it == res.end() || *it != r) continue;
    const auto cnt =
        ix.assignment_counts_of_tag_slot(ts)[static_cast<std::size_t>(
            it - res.begin())];
    out[part.community(ix.tag_ids()[ts])] += cnt;
  }
  return out;
}

// Pr(r, c) = N(r, c) / sum_c' N(r, c').  Sums to 1 over communities for any
// resource with at least one assignment.
inline std::map<CommunityId, double> membership(ResourceId r,
                                                const Partition& part,
                                                const FolkIndex& ix) {
  const auto counts = community_counts(r, part, ix);
  std::int64_t total = 0;
  for (const auto& [c, n] : counts) total += n;
  std::map<CommunityId, double> out;
  for (const auto& [c, n] : counts)
    out[c] = static_cast<double>(n) / static_cast<double>(total);
  return out;
}

// Community-membership rows for every resource with at least one
// assignment.  Entries are (community, probability) sorted by community;
// mass(slot) is the post-prune probability sum in that fixed order, the
// exact value the Ellenberg computation uses.
class MembershipTable {
 public:
  static MembershipTable build(const Partition& part, const FolkIndex& ix) {
    MembershipTable t;
    t.prune_threshold_ = 0.0;

    // (resource slot << 32 | community) -> multiplicity-weighted count.
    std::vector<std::pair<std::uint64_t, std::int64_t>> acc;
    acc.reserve(ix.num_assignments());
    const auto res_ids = ix.resource_ids();
    for (std::size_t ts = 0; ts < ix.num_tags(); ++ts) {
      const auto res = ix.resources_of_tag_slot(ts);
      if (res.empty()) continue;
      const auto cnt = ix.assignment_counts_of_tag_slot(ts);
      const auto c = static_cast<std::uint64_t>(
          static_cast<std::uint32_t>(part.community(ix.tag_ids()[ts])));
      for (std::size_t k = 0; k < res.size(); ++k) {
        const auto rslot = static_cast<std::uint64_t>(
            std::lower_bound(res_ids.begin(), res_ids.end(), res[k]) -
            res_ids.begin());
        acc.emplace_back((rslot << 32) | c, cnt[k]);
      }
    }
    std::sort(acc.begin(), acc.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::size_t i = 0;
    while (i < acc.size()) {
      const std::size_t rslot = static_cast<std::size_t>(acc[i].first >> 32);
      const std::size_t row_begin = i;
      std::int64_t total = 0;
      while (i < acc.size() &&
             static_cast<std::size_t>(acc[i].first >> 32) == rslot) {
        total += acc[i].second;
        ++i;
      }
      t.resource_ids_.push_back(res_ids[rslot]);
      t.offsets_.push_back(t.entries_.size());
      double mass = 0.0;
      std::size_t j = row_begin;
      while (j < i) {
        const std::uint64_t key = acc[j].first;
        std::int64_t n = 0;
        while (j < i && acc[j].first == key) {
          n += acc[j].second;
          ++j;
        }
        const double p =
            static_cast<double>(n) / static_cast<double>(total);
        t.entries_.emplace_back(
            static_cast<CommunityId>(key & 0xFFFFFFFFULL), p);
        mass += p;
      }
      t.mass_.push_back(mass);
    }
    t.offsets_.push_back(t.entries_.size());
    return t;
  }

  std::size_t num_resources() const { return resource_ids_.size(); }
  std::span<const ResourceId> resource_ids() const { return resource_ids_; }
  double prune_threshold() const { return prune_threshold_; }

  bool has(ResourceId r) const {
    return std::binary_search(resource_ids_.begin(), resource_ids_.end(), r);
  }

  std::size_t slot(ResourceId r) const {
    const auto it =
        std::lower_bound(resource_ids_.begin(), resource_ids_.end(), r);
    if (it == resource_ids_.end() || *it != r)
      throw std::out_of_range("resource " + std::to_string(r) +
                              " not in membership table");
    return static_cast<std::size_t>(it - resource_ids_.begin());
  }

  std::span<const std::pair<CommunityId, double>> memberships(
      ResourceId r) const {
    return memberships_slot(slot(r));
  }
  std::span<const std::pair<CommunityId, double>> memberships_slot(
      std::size_t s) const {
    return {entries_.data() + offsets_[s], offsets_[s + 1] - offsets_[s]};
  }

  ResourceId resource_at(std::size_t s) const { return resource_ids_[s]; }
  double mass_slot(std::size_t s) const { return mass_[s]; }
  double mass(ResourceId r) const { return mass_[slot(r)]; }

  friend MembershipTable prune(const MembershipTable& t, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0))
      throw std::invalid_argument("prune threshold must be in [0, 1]");
    MembershipTable out;
    out.prune_threshold_ = threshold;
    out.resource_ids_ = t.resource_ids_;
    out.offsets_.reserve(t.offsets_.size());
    for (std::size_t s = 0; s < t.resource_ids_.size(); ++s) {
      out.offsets_.push_back(out.entries_.size());
      double mass = 0.0;
      for (const auto& [c, p] : t.memberships_slot(s)) {
        if (p < threshold) continue;  // dropped mass is NOT renormalized
        out.entries_.emplace_back(c, p);
        mass += p;
      }
      out.mass_.push_back(mass);
    }
    out.offsets_.push_back(out.entries_.size());
    return out;
  }

  friend bool operator==(const MembershipTable& a, const MembershipTable& b) {
    return a.resource_ids_ == b.resource_ids_ && a.offsets_ == b.offsets_ &&
           a.entries_ == b.entries_ && a.mass_ == b.mass_ &&
           a.prune_threshold_ == b.prune_threshold_;
  }

 private:
  std::vector<ResourceId> resource_ids_;  // sorted
  std::vector<std::size_t> offsets_;
  std::vector<std::pair<CommunityId, double>> entries_;
  std::vector<double> mass_;
  double prune_threshold_ = 0.0;
};

// Ellenberg similarity over weighted community memberships:
//   (common/2) / (common/2 + b + c)
// where common sums Pr(r1,·)+Pr(r2,·) over shared communities and b, c are
// each resource's exclusive mass.  Exclusive mass is computed as total mass
// minus shared mass so the fast path can reproduce the value bitwise.
inline double ellenberg(ResourceId r1, ResourceId r2,
                        const MembershipTable& t) {
  const std::size_t s1 = t.slot(r1), s2 = t.slot(r2);
  const auto m1 = t.memberships_slot(s1);
  const auto m2 = t.memberships_slot(s2);
  double common = 0.0, shared1 = 0.0, shared2 = 0.0;
  std::size_t i = 0, j = 0;
  while (i < m1.size() && j < m2.size()) {
    if (m1[i].first < m2[j].first) {
      ++i;
    } else if (m2[j].first < m1[i].first) {
      ++j;
    } else {
      common += m1[i].second + m2[j].second;
      shared1 += m1[i].second;
      shared2 += m2[j].second;
      ++i;
      ++j;
    }
  }
  const double b = t.mass_slot(s1) - shared1;
  const double c = t.mass_slot(s2) - shared2;
  const double half = common / 2.0;
  const double denom = half + b + c;
  if (denom == 0.0) return 0.0;
  return half / denom;
}

// |U(r1) ∩ U(r2)| / max(|U(r1)|, |U(r2)|).
inline double sim_users(ResourceId r1, ResourceId r2, const FolkIndex& ix) {
  const auto u1 = ix.users_of_resource(r1);
  const auto u2 = ix.users_of_resource(r2);
  const std::size_t mx = std::max(u1.size(), u2.size());
  if (mx == 0) return 0.0;
  std::size_t inter = 0, i = 0, j = 0;
  while (i < u1.size() && j < u2.size()) {
    if (u1[i] < u2[j]) {
      ++i;
    } else if (u2[j] < u1[i]) {
      ++j;
    } else {
      ++inter;
      ++i;
      ++j;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(mx);
}

// Communities of the distinct tags the user has used, sorted ascending.
inline std::vector<CommunityId> target_communities(UserId u,
                                                   const Partition& part,
                                                   const FolkIndex& ix) {
  const auto tags = ix.tags_of_user(u);
  std::vector<CommunityId> out;
  TagId prev = std::numeric_limits<TagId>::min();
  for (TagId t : tags) {
    if (t == prev) continue;  // multiset entries are sorted
    prev = t;
    out.push_back(part.community(t));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Most similar resource: argmax over candidates of
//   sim_users(r_i, r_j) + ellenberg(r_i, r_j)
// with ties broken toward the lowest resource id.  All-zero scores thus
// yield the lowest-id candidate at score 0.
inline std::pair<ResourceId, double> msr(ResourceId r_i,
                                         std::span<const ResourceId> candidates,
                                         const MembershipTable& t,
                                         const FolkIndex& ix) {
  if (candidates.empty())
    throw std::invalid_argument("msr: empty candidate set");
  t.slot(r_i);  // reject resources outside the table
  ResourceId best_r = 0;
  double best_score = -1.0;
  for (ResourceId r_j : candidates) {
    const double score = sim_users(r_i, r_j, ix) + ellenberg(r_i, r_j, t);
    if (score > best_score || (score == best_score && r_j < best_r)) {
      best_score = score;
      best_r = r_j;
    }
  }
  return {best_r, best_score};
}

struct RecommendationList {
  UserId user = 0;
  std::vector<std::pair<ResourceId, double>> items;  // score desc, id asc

  friend bool operator==(const RecommendationList&,
                         const RecommendationList&) = default;
};

namespace detail {

// Sorts (resource, score) winners into the final presentation order and
// truncates to k.
inline void finish_recommendations(
    std::vector<std::pair<ResourceId, double>>& items, int k) {
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  if (items.size() > static_cast<std::size_t>(k))
    items.resize(static_cast<std::size_t>(k));
}

}  // namespace detail

// Reference implementation of the per-user recommender: for each training
// resource of u, pick the most similar candidate among the resources of
// the user's target communities (minus resources u already has), merge the
// winners keeping each resource's best score, sort, truncate to k.
// Quadratic; the Recommender class below is the production path and must
// produce identical output.
inline RecommendationList recommend(UserId u, int k, const Partition& part,
                                    const MembershipTable& t,
                                    const FolkIndex& ix) {
  if (k < 1) throw std::invalid_argument("recommend: k must be >= 1");
  RecommendationList out;
  out.user = u;
  const auto r_tu = ix.resources_of_user(u);
  if (r_tu.empty()) return out;

  const auto tc = target_communities(u, part, ix);
  std::vector<ResourceId> candidates;
  for (std::size_t s = 0; s < t.num_resources(); ++s) {
    const ResourceId r = t.resource_at(s);
    if (std::binary_search(r_tu.begin(), r_tu.end(), r)) continue;
    bool in_tc = false;
    for (const auto& [c, p] : t.memberships_slot(s)) {
      if (std::binary_search(tc.begin(), tc.end(), c)) {
        in_tc = true;
        break;
      }
    }
    if (in_tc) candidates.push_back(r);
  }
  if (candidates.empty()) return out;

  std::map<ResourceId, double> best;
  for (ResourceId r_i : r_tu) {
    if (!t.has(r_i)) continue;
    const auto [r, score] = msr(r_i, candidates, t, ix);
    const auto it = best.find(r);
    if (it == best.end() || score > it->second) best[r] = score;
  }
  out.items.assign(best.begin(), best.end());
  detail::finish_recommendations(out.items, k);
  return out;
}

// Production recommender.  Shares an immutable model (community-inverted
// membership lists and id lookups) between copies; each instance carries
// its own scratch, so clone one per thread.  Output is identical to the
// free recommend() including floating-point bits: accumulations visit
// communities in the same ascending order the merge walks use.
class Recommender {
 public:
  Recommender(const Partition& part, const MembershipTable& table,
              const FolkIndex& ix)
      : model_(std::make_shared<Model>(part, table, ix)) {
    reset_scratch();
  }

  Recommender(const Recommender& other) : model_(other.model_) {
    reset_scratch();
  }
  Recommender& operator=(const Recommender&) = delete;

  RecommendationList recommend(UserId u, int k) {
    if (k < 1) throw std::invalid_argument("recommend: k must be >= 1");
    const Model& m = *model_;
    RecommendationList out;
    out.user = u;
    const auto r_tu = m.ix->resources_of_user(u);
    if (r_tu.empty()) return out;

    // Target communities from the user's distinct tags.
    tc_.clear();
    {
      TagId prev = std::numeric_limits<TagId>::min();
      for (TagId t : m.ix->tags_of_user(u)) {
        if (t == prev) continue;
        prev = t;
        tc_.push_back(m.part->community(t));
      }
      std::sort(tc_.begin(), tc_.end());
      tc_.erase(std::unique(tc_.begin(), tc_.end()), tc_.end());
    }

    // Mark the user's own resources, then every candidate resource in the
    // target communities.
    ++epoch_;
    for (ResourceId r : r_tu) {
      const std::ptrdiff_t s = m.table_slot(r);
      if (s >= 0) own_stamp_[static_cast<std::size_t>(s)] = epoch_;
    }
    std::size_t n_candidates = 0;
    ResourceId min_candidate = std::numeric_limits<ResourceId>::max();
    for (CommunityId c : tc_) {
      for (const auto& [rslot, p] : m.comm_entries(c)) {
        (void)p;
        if (own_stamp_[rslot] == epoch_ || cand_stamp_[rslot] == epoch_)
          continue;
        cand_stamp_[rslot] = epoch_;
        ++n_candidates;
        const ResourceId rid = m.table->resource_at(rslot);
        if (rid < min_candidate) min_candidate = rid;
      }
    }
    if (n_candidates == 0) return out;

    // One msr pass per training resource.
    winners_.clear();
    for (ResourceId r_i : r_tu) {
      const std::ptrdiff_t si_raw = m.table_slot(r_i);
      if (si_raw < 0) continue;
      const auto si = static_cast<std::size_t>(si_raw);
      ++pass_;
      touched_.clear();
      shared_users_.clear();

      // Community-sharing candidates: walk r_i's communities in ascending
      // order so per-candidate sums add terms in merge-walk order.
      for (const auto& [c, pi] : m.table->memberships_slot(si)) {
        for (const auto& [rslot, pj] : m.comm_entries(c)) {
          if (cand_stamp_[rslot] != epoch_) continue;
          if (acc_stamp_[rslot] != pass_) {
            acc_stamp_[rslot] = pass_;
            acc_common_[rslot] = 0.0;
            acc_si_[rslot] = 0.0;
            acc_sj_[rslot] = 0.0;
            touched_.push_back(rslot);
          }
          acc_common_[rslot] += pi + pj;
          acc_si_[rslot] += pi;
          acc_sj_[rslot] += pj;
        }
      }

      // User-sharing candidates.
      for (UserId u2 : m.ix->users_of_resource(r_i)) {
        for (ResourceId r_j : m.ix->resources_of_user(u2)) {
          const std::ptrdiff_t sj_raw = m.table_slot(r_j);
          if (sj_raw < 0) continue;
          const auto sj = static_cast<std::size_t>(sj_raw);
          if (cand_stamp_[sj] != epoch_) continue;
          if (user_stamp_[sj] == pass_) continue;
          user_stamp_[sj] = pass_;
          shared_users_.push_back(sj);
        }
      }

      const double mass_i = m.table->mass_slot(si);
      ResourceId best_r = 0;
      double best_score = -1.0;
      const auto consider = [&](std::size_t sj, double score) {
        const ResourceId rid = m.table->resource_at(sj);
        if (score > best_score ||
            (score == best_score && rid < best_r)) {
          best_score = score;
          best_r = rid;
        }
      };
      for (const std::size_t sj : touched_) {
        const double half = acc_common_[sj] / 2.0;
        const double b = mass_i - acc_si_[sj];
        const double cc = m.table->mass_slot(sj) - acc_sj_[sj];
        const double denom = half + b + cc;
        const double ellen = denom == 0.0 ? 0.0 : half / denom;
        const double su = user_stamp_[sj] == pass_
                              ? sim_users(m.table->resource_at(si),
                                          m.table->resource_at(sj), *m.ix)
                              : 0.0;
        consider(sj, su + ellen);
      }
      for (const std::size_t sj : shared_users_) {
        if (acc_stamp_[sj] == pass_) continue;  // scored above
        const double su = sim_users(m.table->resource_at(si),
                                    m.table->resource_at(sj), *m.ix);
        consider(sj, su + 0.0);
      }
      if (best_score <= 0.0) {
        // Every candidate scores 0: the lowest-id candidate wins at 0.
        best_r = min_candidate;
        best_score = 0.0;
      }

      const auto it = winners_.find(best_r);
      if (it == winners_.end() || best_score > it->second)
        winners_[best_r] = best_score;
    }

    out.items.assign(winners_.begin(), winners_.end());
    detail::finish_recommendations(out.items, k);
    return out;
  }

 private:
  struct Model {
    const Partition* part;
    const MembershipTable* table;
    const FolkIndex* ix;

    std::vector<std::size_t> comm_offsets;
    std::vector<std::pair<std::size_t, double>> comm_entries_store;
    std::size_t n_comm = 0;

    // resource id -> table slot (dense array; ids are dense in practice)
    std::vector<std::ptrdiff_t> slot_of_id;

    Model(const Partition& p, const MembershipTable& t, const FolkIndex& i)
        : part(&p), table(&t), ix(&i) {
      n_comm = p.num_communities();
      std::vector<std::size_t> counts(n_comm + 1, 0);
      for (std::size_t s = 0; s < t.num_resources(); ++s) {
        for (const auto& [c, prob] : t.memberships_slot(s))
          ++counts[static_cast<std::size_t>(c) + 1];
      }
      for (std::size_t c = 0; c < n_comm; ++c) counts[c + 1] += counts[c];
      comm_offsets = counts;
      comm_entries_store.resize(comm_offsets[n_comm]);
      std::vector<std::size_t> cur(comm_offsets.begin(),
                                   comm_offsets.end() - 1);
      // Resource slots ascend within each community because the outer loop
      // ascends over table slots.
      for (std::size_t s = 0; s < t.num_resources(); ++s) {
        for (const auto& [c, prob] : t.memberships_slot(s))
          comm_entries_store[cur[static_cast<std::size_t>(c)]++] = {s, prob};
      }

      ResourceId max_id = -1;
      for (std::size_t s = 0; s < t.num_resources(); ++s)
        max_id = std::max(max_id, t.resource_at(s));
      slot_of_id.assign(static_cast<std::size_t>(max_id) + 1, -1);
      for (std::size_t s = 0; s < t.num_resources(); ++s)
        slot_of_id[static_cast<std::size_t>(t.resource_at(s))] =
            static_cast<std::ptrdiff_t>(s);
    }

    std::span<const std::pair<std::size_t, double>> comm_entries(
        CommunityId c) const {
      const auto cc = static_cast<std::size_t>(c);
      if (cc >= n_comm) return {};
      return {comm_entries_store.data() + comm_offsets[cc],
              comm_offsets[cc + 1] - comm_offsets[cc]};
    }

    std::ptrdiff_t table_slot(ResourceId r) const {
      if (r < 0 || static_cast<std::size_t>(r) >= slot_of_id.size())
        return -1;
      return slot_of_id[static_cast<std::size_t>(r)];
    }
  };

  void reset_scratch() {
    const std::size_t n = model_->table->num_resources();
    own_stamp_.assign(n, 0);
    cand_stamp_.assign(n, 0);
    acc_stamp_.assign(n, 0);
    user_stamp_.assign(n, 0);
    acc_common_.assign(n, 0.0);
    acc_si_.assign(n, 0.0);
    acc_sj_.assign(n, 0.0);
    epoch_ = 0;
    pass_ = 0;
  }

  std::shared_ptr<const Model> model_;
  std::vector<std::uint64_t> own_stamp_, cand_stamp_, acc_stamp_, user_stamp_;
  std::vector<double> acc_common_, acc_si_, acc_sj_;
  std::vector<CommunityId> tc_;
  std::vector<std::size_t> touched_, shared_users_;
  std::map<ResourceId, double> winners_;
  std::uint64_t epoch_ = 0, pass_ = 0;
};

}  // namespace tagrec
