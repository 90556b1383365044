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
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tagrec/hashing.hpp"

namespace tagrec {

using UserId = std::int32_t;
using TagId = std::int32_t;
using ResourceId = std::int32_t;
using Timestamp = std::int64_t;  // epoch milliseconds, non-negative
using CommunityId = std::int32_t;

// One tagging event: user attached tag to resource at a point in time.
struct Assignment {
  UserId user = 0;
  TagId tag = 0;
  ResourceId resource = 0;
  Timestamp timestamp = 0;

  friend auto operator<=>(const Assignment&, const Assignment&) = default;
};

// Value-semantic tagging dataset.  Id vectors are sorted and duplicate-free;
// assignments are kept in canonical (user, tag, resource, timestamp) order
// by every producer in this library, which makes equality structural.
struct Folksonomy {
  std::vector<UserId> users;
  std::vector<std::pair<TagId, std::string>> tags;  // sorted by id
  std::vector<ResourceId> resources;
  std::vector<Assignment> assignments;

  friend bool operator==(const Folksonomy&, const Folksonomy&) = default;

  const std::string* find_tag(TagId id) const {
    auto it = std::lower_bound(
        tags.begin(), tags.end(), id,
        [](const auto& p, TagId v) { return p.first < v; });
    if (it == tags.end() || it->first != id) return nullptr;
    return &it->second;
  }

  void sort_canonical() {
    std::sort(assignments.begin(), assignments.end());
    assignments.erase(std::unique(assignments.begin(), assignments.end()),
                      assignments.end());
  }
};

namespace detail {

template <class T>
inline bool is_sorted_unique(const std::vector<T>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i - 1] < v[i])) return false;
  }
  return true;
}

template <class T>
inline bool sorted_contains(const std::vector<T>& v, const T& x) {
  return std::binary_search(v.begin(), v.end(), x);
}

}  // namespace detail

// Checks the representation invariants; throws std::invalid_argument with a
// description of the first violation found.  Duplicate assignments and
// dangling id references are rejected; empty datasets are fine.
inline void validate_folksonomy(const Folksonomy& f) {
  if (!detail::is_sorted_unique(f.users))
    throw std::invalid_argument("folksonomy: users not sorted/unique");
  if (!detail::is_sorted_unique(f.resources))
    throw std::invalid_argument("folksonomy: resources not sorted/unique");
  for (std::size_t i = 1; i < f.tags.size(); ++i) {
    if (!(f.tags[i - 1].first < f.tags[i].first))
      throw std::invalid_argument("folksonomy: tag ids not sorted/unique");
  }
  std::vector<Assignment> seen = f.assignments;
  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 1; i < seen.size(); ++i) {
    if (seen[i - 1] == seen[i])
      throw std::invalid_argument("folksonomy: duplicate assignment");
  }
  for (const Assignment& a : f.assignments) {
    if (a.timestamp < 0)
      throw std::invalid_argument("folksonomy: negative timestamp");
    if (!detail::sorted_contains(f.users, a.user))
      throw std::invalid_argument("folksonomy: assignment references unknown user " +
                                  std::to_string(a.user));
    if (!f.find_tag(a.tag))
      throw std::invalid_argument("folksonomy: assignment references unknown tag " +
                                  std::to_string(a.tag));
    if (!detail::sorted_contains(f.resources, a.resource))
      throw std::invalid_argument(
          "folksonomy: assignment references unknown resource " +
          std::to_string(a.resource));
  }
}

// Content hash over the canonical representation: ids, tag strings, and
// assignments in their stored order.  Used as a cache key and in report
// metadata.
inline std::uint64_t hash_folksonomy(const Folksonomy& f) {
  Fnv1a64 h;
  h.update("tagrec-folksonomy");
  h.update_u64(f.users.size());
  for (UserId u : f.users) h.update_i64(u);
  h.update_u64(f.tags.size());
  for (const auto& [id, s] : f.tags) {
    h.update_i64(id);
    h.update_u64(s.size());
    h.update(s);
  }
  h.update_u64(f.resources.size());
  for (ResourceId r : f.resources) h.update_i64(r);
  h.update_u64(f.assignments.size());
  for (const Assignment& a : f.assignments) {
    h.update_i64(a.user);
    h.update_i64(a.tag);
    h.update_i64(a.resource);
    h.update_i64(a.timestamp);
  }
  return h.digest();
}

// Read-optimized inverted views over a Folksonomy.  Construction sorts, so
// the result is identical for any permutation of the input assignments.
// All spans returned by accessors stay valid for the index lifetime.
class FolkIndex {
 public:
  FolkIndex() = default;

  static FolkIndex build(const Folksonomy& f) {
    FolkIndex ix;
    ix.tag_ids_.reserve(f.tags.size());
    ix.tag_strings_.reserve(f.tags.size());
    for (const auto& [id, s] : f.tags) {
      ix.tag_ids_.push_back(id);
      ix.tag_strings_.push_back(s);
    }
    ix.user_ids_ = f.users;
    ix.resource_ids_ = f.resources;
    ix.total_assignments_ = f.assignments.size();

    // tag -> (resource, last timestamp, assignment count)
    {
      struct Trt {
        TagId t;
        ResourceId r;
        Timestamp ts;
      };
      std::vector<Trt> v;
      v.reserve(f.assignments.size());
      for (const Assignment& a : f.assignments)
        v.push_back({a.tag, a.resource, a.timestamp});
      std::sort(v.begin(), v.end(), [](const Trt& x, const Trt& y) {
        if (x.t != y.t) return x.t < y.t;
        if (x.r != y.r) return x.r < y.r;
        return x.ts < y.ts;
      });
      ix.tag_offsets_.assign(ix.tag_ids_.size() + 1, 0);
      std::size_t i = 0;
      for (std::size_t slot = 0; slot < ix.tag_ids_.size(); ++slot) {
        ix.tag_offsets_[slot] = ix.tag_resources_.size();
        const TagId t = ix.tag_ids_[slot];
        while (i < v.size() && v[i].t == t) {
          const ResourceId r = v[i].r;
          Timestamp last = v[i].ts;
          std::int32_t cnt = 0;
          while (i < v.size() && v[i].t == t && v[i].r == r) {
            last = v[i].ts;  // sorted ascending, so last element is the max
            ++cnt;
            ++i;
          }
          ix.tag_resources_.push_back(r);
          ix.tag_last_ts_.push_back(last);
          ix.tag_counts_.push_back(cnt);
        }
      }
      ix.tag_offsets_[ix.tag_ids_.size()] = ix.tag_resources_.size();
    }

    // resource -> users (unique)
    {
      std::vector<std::pair<ResourceId, UserId>> v;
      v.reserve(f.assignments.size());
      for (const Assignment& a : f.assignments) v.push_back({a.resource, a.user});
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
      ix.res_offsets_.assign(ix.resource_ids_.size() + 1, 0);
      std::size_t i = 0;
      for (std::size_t slot = 0; slot < ix.resource_ids_.size(); ++slot) {
        ix.res_offsets_[slot] = ix.res_users_.size();
        while (i < v.size() && v[i].first == ix.resource_ids_[slot])
          ix.res_users_.push_back(v[i++].second);
      }
      ix.res_offsets_[ix.resource_ids_.size()] = ix.res_users_.size();
    }

    // user -> tags (multiset: one entry per assignment) and -> resources
    {
      std::vector<std::pair<UserId, TagId>> vt;
      std::vector<std::pair<UserId, ResourceId>> vr;
      vt.reserve(f.assignments.size());
      vr.reserve(f.assignments.size());
      for (const Assignment& a : f.assignments) {
        vt.push_back({a.user, a.tag});
        vr.push_back({a.user, a.resource});
      }
      std::sort(vt.begin(), vt.end());
      std::sort(vr.begin(), vr.end());
      vr.erase(std::unique(vr.begin(), vr.end()), vr.end());
      ix.user_tag_offsets_.assign(ix.user_ids_.size() + 1, 0);
      ix.user_res_offsets_.assign(ix.user_ids_.size() + 1, 0);
      std::size_t i = 0, j = 0;
      for (std::size_t slot = 0; slot < ix.user_ids_.size(); ++slot) {
        ix.user_tag_offsets_[slot] = ix.user_tags_.size();
        while (i < vt.size() && vt[i].first == ix.user_ids_[slot])
          ix.user_tags_.push_back(vt[i++].second);
        ix.user_res_offsets_[slot] = ix.user_resources_.size();
        while (j < vr.size() && vr[j].first == ix.user_ids_[slot])
          ix.user_resources_.push_back(vr[j++].second);
      }
      ix.user_tag_offsets_[ix.user_ids_.size()] = ix.user_tags_.size();
      ix.user_res_offsets_[ix.user_ids_.size()] = ix.user_resources_.size();
    }
    return ix;
  }

  std::span<const TagId> tag_ids() const { return tag_ids_; }
  std::span<const UserId> user_ids() const { return user_ids_; }
  std::span<const ResourceId> resource_ids() const { return resource_ids_; }

  std::size_t num_tags() const { return tag_ids_.size(); }
  std::size_t num_users() const { return user_ids_.size(); }
  std::size_t num_resources() const { return resource_ids_.size(); }
  std::size_t num_assignments() const { return total_assignments_; }

  bool has_tag(TagId t) const { return find_slot(tag_ids_, t) >= 0; }
  bool has_user(UserId u) const { return find_slot(user_ids_, u) >= 0; }
  bool has_resource(ResourceId r) const {
    return find_slot(resource_ids_, r) >= 0;
  }

  std::size_t tag_slot(TagId t) const {
    return checked_slot(tag_ids_, t, "tag");
  }
  std::size_t user_slot(UserId u) const {
    return checked_slot(user_ids_, u, "user");
  }
  std::size_t resource_slot(ResourceId r) const {
    return checked_slot(resource_ids_, r, "resource");
  }

  const std::string& tag_string(TagId t) const {
    return tag_strings_[tag_slot(t)];
  }
  const std::string& tag_string_at(std::size_t slot) const {
    return tag_strings_[slot];
  }

  // Resources carrying tag t, sorted ascending; aligned with
  // last_timestamps_of_tag / assignment_counts_of_tag.
  std::span<const ResourceId> resources_of_tag(TagId t) const {
    const std::size_t s = tag_slot(t);
    return {tag_resources_.data() + tag_offsets_[s],
            tag_offsets_[s + 1] - tag_offsets_[s]};
  }
  std::span<const ResourceId> resources_of_tag_slot(std::size_t s) const {
    return {tag_resources_.data() + tag_offsets_[s],
            tag_offsets_[s + 1] - tag_offsets_[s]};
  }
  std::span<const Timestamp> last_timestamps_of_tag(TagId t) const {
    const std::size_t s = tag_slot(t);
    return {tag_last_ts_.data() + tag_offsets_[s],
            tag_offsets_[s + 1] - tag_offsets_[s]};
  }
  std::span<const Timestamp> last_timestamps_of_tag_slot(std::size_t s) const {
    return {tag_last_ts_.data() + tag_offsets_[s],
            tag_offsets_[s + 1] - tag_offsets_[s]};
  }
  std::span<const std::int32_t> assignment_counts_of_tag(TagId t) const {
    const std::size_t s = tag_slot(t);
    return {tag_counts_.data() + tag_offsets_[s],
            tag_offsets_[s + 1] - tag_offsets_[s]};
  }
  std::span<const std::int32_t> assignment_counts_of_tag_slot(
      std::size_t s) const {
    return {tag_counts_.data() + tag_offsets_[s],
            tag_offsets_[s + 1] - tag_offsets_[s]};
  }

  // Latest timestamp among assignments of (t, r) across all users, or
  // nullopt when no user assigned t to r.
  std::optional<Timestamp> last_assignment(TagId t, ResourceId r) const {
    const auto res = resources_of_tag(t);
    const auto ts = last_timestamps_of_tag(t);
    const auto it = std::lower_bound(res.begin(), res.end(), r);
    if (it == res.end() || *it != r) return std::nullopt;
    return ts[static_cast<std::size_t>(it - res.begin())];
  }

  // Number of assignments of (t, r) across all users (0 when absent).
  std::int32_t assignment_count(TagId t, ResourceId r) const {
    const auto res = resources_of_tag(t);
    const auto cnt = assignment_counts_of_tag(t);
    const auto it = std::lower_bound(res.begin(), res.end(), r);
    if (it == res.end() || *it != r) return 0;
    return cnt[static_cast<std::size_t>(it - res.begin())];
  }

  // Users who assigned at least one tag to r, sorted ascending.
  std::span<const UserId> users_of_resource(ResourceId r) const {
    const std::size_t s = resource_slot(r);
    return {res_users_.data() + res_offsets_[s],
            res_offsets_[s + 1] - res_offsets_[s]};
  }

  // Multiset of tags used by u (one entry per assignment), sorted.
  std::span<const TagId> tags_of_user(UserId u) const {
    const std::size_t s = user_slot(u);
    return {user_tags_.data() + user_tag_offsets_[s],
            user_tag_offsets_[s + 1] - user_tag_offsets_[s]};
  }

  // Resources u has tagged at least once, sorted, unique.
  std::span<const ResourceId> resources_of_user(UserId u) const {
    const std::size_t s = user_slot(u);
    return {user_resources_.data() + user_res_offsets_[s],
            user_res_offsets_[s + 1] - user_res_offsets_[s]};
  }
  std::span<const ResourceId> resources_of_user_slot(std::size_t s) const {
    return {user_resources_.data() + user_res_offsets_[s],
            user_res_offsets_[s + 1] - user_res_offsets_[s]};
  }

  friend bool operator==(const FolkIndex& a, const FolkIndex& b) {
    return a.tag_ids_ == b.tag_ids_ && a.tag_strings_ == b.tag_strings_ &&
           a.user_ids_ == b.user_ids_ && a.resource_ids_ == b.resource_ids_ &&
           a.tag_offsets_ == b.tag_offsets_ &&
           a.tag_resources_ == b.tag_resources_ &&
           a.tag_last_ts_ == b.tag_last_ts_ &&
           a.tag_counts_ == b.tag_counts_ &&
           a.res_offsets_ == b.res_offsets_ && a.res_users_ == b.res_users_ &&
           a.user_tag_offsets_ == b.user_tag_offsets_ &&
           a.user_tags_ == b.user_tags_ &&
           a.user_res_offsets_ == b.user_res_offsets_ &&
           a.user_resources_ == b.user_resources_ &&
           a.total_assignments_ == b.total_assignments_;
  }

 private:
  template <class T>
  static std::ptrdiff_t find_slot(const std::vector<T>& ids, T id) {
    auto it = std::lower_bound(ids.begin(), ids.end(), id);
    if (it == ids.end() || *it != id) return -1;
    return it - ids.begin();
  }

  template <class T>
  static std::size_t checked_slot(const std::vector<T>& ids, T id,
                                  const char* kind) {
    const std::ptrdiff_t s = find_slot(ids, id);
    if (s < 0)
      throw std::out_of_range(std::string("unknown ") + kind + " id " +
                              std::to_string(id));
    return static_cast<std::size_t>(s);
  }

  std::vector<TagId> tag_ids_;
  std::vector<std::string> tag_strings_;
  std::vector<UserId> user_ids_;
  std::vector<ResourceId> resource_ids_;

  std::vector<std::size_t> tag_offsets_;
  std::vector<ResourceId> tag_resources_;
  std::vector<Timestamp> tag_last_ts_;
  std::vector<std::int32_t> tag_counts_;

  std::vector<std::size_t> res_offsets_;
  std::vector<UserId> res_users_;

  std::vector<std::size_t> user_tag_offsets_;
  std::vector<TagId> user_tags_;
  std::vector<std::size_t> user_res_offsets_;
  std::vector<ResourceId> user_resources_;

  std::size_t total_assignments_ = 0;
};

}  // namespace tagrec
