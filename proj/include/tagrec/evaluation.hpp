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
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "tagrec/community.hpp"
#include "tagrec/ingest.hpp"
#include "tagrec/recommender.hpp"
#include "tagrec/similarity.hpp"
#include "tagrec/tag_graph.hpp"

namespace tagrec {

class CompareError : public std::runtime_error {
 public:
  explicit CompareError(const std::string& what) : std::runtime_error(what) {}
};

// The three ablation variants: semantic-only, semantic+lexical, and the
// full model with the temporal term.
enum class Variant { kSemCdr, kLexsemCdr, kCdrTime };

struct VariantSpec {
  Variant variant = Variant::kCdrTime;

  std::string name() const {
    switch (variant) {
      case Variant::kSemCdr:
        return "SEM_CDR";
      case Variant::kLexsemCdr:
        return "LEXSEM_CDR";
      case Variant::kCdrTime:
        return "CDR_TIME";
    }
    return "CDR_TIME";
  }

  static VariantSpec from_name(std::string_view name) {
    if (name == "SEM_CDR") return {Variant::kSemCdr};
    if (name == "LEXSEM_CDR") return {Variant::kLexsemCdr};
    if (name == "CDR_TIME") return {Variant::kCdrTime};
    throw std::invalid_argument(
        "unknown variant '" + std::string(name) +
        "' (expected SEM_CDR, LEXSEM_CDR, or CDR_TIME)");
  }

  bool use_lexical() const { return variant != Variant::kSemCdr; }
  bool use_time() const { return variant == Variant::kCdrTime; }

  void apply(SimParams& p) const {
    p.use_lexical = use_lexical();
    p.use_time = use_time();
  }

  friend bool operator==(const VariantSpec&, const VariantSpec&) = default;
};

// P@k and R@k for one user.  Conventionally p = hits / min(k, returned) and
// r = hits / |test|; `swap_pr_denominators` exchanges the two denominators
// (precision over the test-set size, recall over the returned prefix).
// Empty recommendations score (0, 0).
inline std::pair<double, double> precision_recall_at_k(
    std::span<const ResourceId> recommended,
    const std::vector<ResourceId>& test_set_sorted, int k,
    bool swap_pr_denominators = false) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const std::size_t n =
      std::min(recommended.size(), static_cast<std::size_t>(k));
  if (n == 0) return {0.0, 0.0};
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::binary_search(test_set_sorted.begin(), test_set_sorted.end(),
                           recommended[i]))
      ++hits;
  }
  const double by_rank = static_cast<double>(hits) / static_cast<double>(n);
  const double by_test =
      test_set_sorted.empty()
          ? 0.0
          : static_cast<double>(hits) /
                static_cast<double>(test_set_sorted.size());
  if (swap_pr_denominators) return {by_test, by_rank};
  return {by_rank, by_test};
}

struct PerUserRow {
  UserId user = 0;
  std::vector<double> precision;  // aligned with k_values
  std::vector<double> recall;
  std::size_t test_size = 0;
  std::size_t recommended = 0;

  friend bool operator==(const PerUserRow&, const PerUserRow&) = default;
};

struct RunMeta {
  std::string variant;
  SimParams sim;  // with variant switches applied
  double prune_threshold = 0.0;
  std::uint64_t louvain_seed = 0;
  std::vector<int> k_values;
  bool swap_pr_denominators = false;

  std::uint64_t train_hash = 0;
  std::uint64_t test_hash = 0;
  std::uint64_t dataset_hash = 0;  // combines both

  std::size_t train_assignments = 0, test_assignments = 0;
  std::size_t num_tags = 0, num_users = 0, num_resources = 0;
  std::size_t graph_nodes = 0, graph_edges = 0;
  std::size_t communities = 0;
  double modularity_q = 0.0;

  std::size_t users_with_test = 0;  // users with >= 1 test assignment
  std::size_t users_evaluated = 0;  // non-empty effective test set
  std::size_t users_excluded = 0;   // test resources all seen in training

  friend bool operator==(const RunMeta&, const RunMeta&) = default;
};

struct EvalReport {
  VariantSpec variant;
  std::vector<int> k_values;
  std::map<int, double> mean_precision;
  std::map<int, double> mean_recall;
  std::vector<PerUserRow> per_user;  // filled when requested
  RunMeta run_meta;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct EvalParams {
  SimParams sim;  // variant switches are overwritten by the variant
  double prune_threshold = 0.1;
  std::vector<int> k_values = {5, 10, 15, 20};
  std::uint64_t louvain_seed = 7;
  int threads = 1;
  bool swap_pr_denominators = false;
  bool include_per_user = false;
};

namespace detail {

// Neumaier-compensated sum; with the fixed user-order reduction it makes
// reported means bit-stable across thread counts and reruns.
struct NeumaierSum {
  double s = 0.0;
  double c = 0.0;
  void add(double x) {
    const double t = s + x;
    if (std::abs(s) >= std::abs(x)) {
      c += (s - t) + x;
    } else {
      c += (x - t) + s;
    }
    s = t;
  }
  double value() const { return s + c; }
};

inline std::string format_ratio(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10f", v);
  return buf;
}

}  // namespace detail

// Scoring core shared by run_experiment and the staged pipeline: compares
// per-user recommendation lists against each user's effective test set
// (test resources minus training resources).  Users without test
// assignments are ignored; users whose effective set is empty are counted
// as excluded; everyone else is averaged.  `recs` must be sorted by user;
// users without a row score as having an empty recommendation list.
struct ScoreSummary {
  std::map<int, double> mean_precision;
  std::map<int, double> mean_recall;
  std::size_t users_with_test = 0;
  std::size_t users_evaluated = 0;
  std::size_t users_excluded = 0;
  std::vector<PerUserRow> per_user;
};

inline ScoreSummary evaluate_recommendations(
    std::span<const RecommendationList> recs, const FolkIndex& train_ix,
    const FolkIndex& test_ix, const std::vector<int>& ks,
    bool swap_denominators, bool include_per_user) {
  for (std::size_t i = 1; i < recs.size(); ++i) {
    if (!(recs[i - 1].user < recs[i].user))
      throw std::invalid_argument("recommendation rows not sorted by user");
  }
  for (std::size_t i = 1; i < ks.size(); ++i) {
    if (!(ks[i - 1] < ks[i]))
      throw std::invalid_argument("k values not sorted/unique");
  }

  ScoreSummary out;
  std::vector<detail::NeumaierSum> psum(ks.size()), rsum(ks.size());
  std::vector<ResourceId> effective, rec_ids;
  for (UserId u : test_ix.user_ids()) {
    const auto test_res = test_ix.resources_of_user(u);
    if (test_res.empty()) continue;
    ++out.users_with_test;
    effective.clear();
    const auto train_res = train_ix.has_user(u)
                               ? train_ix.resources_of_user(u)
                               : std::span<const ResourceId>{};
    std::set_difference(test_res.begin(), test_res.end(), train_res.begin(),
                        train_res.end(), std::back_inserter(effective));
    if (effective.empty()) {
      ++out.users_excluded;
      continue;
    }
    ++out.users_evaluated;

    rec_ids.clear();
    const auto it = std::lower_bound(
        recs.begin(), recs.end(), u,
        [](const RecommendationList& r, UserId v) { return r.user < v; });
    if (it != recs.end() && it->user == u) {
      for (const auto& [r, s] : it->items) rec_ids.push_back(r);
    }

    PerUserRow row;
    row.user = u;
    row.test_size = effective.size();
    row.recommended = rec_ids.size();
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const auto [p, r] =
          precision_recall_at_k(rec_ids, effective, ks[i], swap_denominators);
      psum[i].add(p);
      rsum[i].add(r);
      if (include_per_user) {
        row.precision.push_back(p);
        row.recall.push_back(r);
      }
    }
    if (include_per_user) out.per_user.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double denom = out.users_evaluated == 0
                             ? 1.0
                             : static_cast<double>(out.users_evaluated);
    out.mean_precision[ks[i]] = psum[i].value() / denom;
    out.mean_recall[ks[i]] = rsum[i].value() / denom;
  }
  return out;
}

// Computes per-user recommendations for every user in ascending id order,
// parallelized over fixed-size blocks so the thread count cannot change any
// output.  `user_filter` (optional) skips users for whom no list is needed;
// skipped users get no row.
template <class Filter>
inline std::vector<RecommendationList> recommend_all(
    const Partition& part, const MembershipTable& table,
    const FolkIndex& train_ix, int k, int threads, Filter&& keep_user) {
  std::vector<UserId> users;
  for (UserId u : train_ix.user_ids()) {
    if (keep_user(u)) users.push_back(u);
  }
  std::vector<RecommendationList> rows(users.size());
  const Recommender proto(part, table, train_ix);
  const int t = std::max(1, threads);
  if (t == 1 || users.size() < 2) {
    Recommender rec(proto);
    for (std::size_t i = 0; i < users.size(); ++i)
      rows[i] = rec.recommend(users[i], k);
  } else {
    constexpr std::size_t kBlock = 32;
    std::atomic<std::size_t> next{0};
    const std::size_t n_blocks = (users.size() + kBlock - 1) / kBlock;
    std::vector<std::thread> pool;
    for (int c = 0; c < t; ++c) {
      pool.emplace_back([&] {
        Recommender rec(proto);
        for (;;) {
          const std::size_t b = next.fetch_add(1);
          if (b >= n_blocks) break;
          const std::size_t lo = b * kBlock;
          const std::size_t hi = std::min(users.size(), lo + kBlock);
          for (std::size_t i = lo; i < hi; ++i)
            rows[i] = rec.recommend(users[i], k);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  return rows;
}

// Normalizes a k grid: sorted, deduplicated, all >= 1, non-empty.
inline std::vector<int> normalize_k_values(const std::vector<int>& k_values) {
  if (k_values.empty())
    throw std::invalid_argument("k_values must be non-empty");
  std::vector<int> ks = k_values;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  for (int k : ks) {
    if (k < 1) throw std::invalid_argument("k values must be >= 1");
  }
  return ks;
}

// Scores precomputed recommendation rows and packages the result with the
// run's full configuration and corpus/model statistics.  Shared by the
// in-memory experiment runner and the staged artifact pipeline so that both
// produce identical reports from identical inputs.
inline EvalReport assemble_report(
    const VariantSpec& variant, const SimParams& sp_applied,
    double prune_threshold, std::uint64_t louvain_seed,
    const std::vector<int>& ks, bool swap_pr_denominators, bool include_per_user,
    const Folksonomy& train, const Folksonomy& test,
    const FolkIndex& train_ix, const FolkIndex& test_ix,
    std::size_t graph_nodes, std::size_t graph_edges, const Partition& part,
    std::span<const RecommendationList> recs) {
  const ScoreSummary score = evaluate_recommendations(
      recs, train_ix, test_ix, ks, swap_pr_denominators, include_per_user);

  EvalReport report;
  report.variant = variant;
  report.k_values = ks;
  report.mean_precision = score.mean_precision;
  report.mean_recall = score.mean_recall;
  report.per_user = score.per_user;

  RunMeta& meta = report.run_meta;
  meta.variant = variant.name();
  meta.sim = sp_applied;
  meta.prune_threshold = prune_threshold;
  meta.louvain_seed = louvain_seed;
  meta.k_values = ks;
  meta.swap_pr_denominators = swap_pr_denominators;
  meta.train_hash = hash_folksonomy(train);
  meta.test_hash = hash_folksonomy(test);
  meta.dataset_hash =
      Fnv1a64().update_u64(meta.train_hash).update_u64(meta.test_hash).digest();
  meta.train_assignments = train.assignments.size();
  meta.test_assignments = test.assignments.size();
  meta.num_tags = train.tags.size();
  meta.num_users = train.users.size();
  meta.num_resources = train.resources.size();
  meta.graph_nodes = graph_nodes;
  meta.graph_edges = graph_edges;
  meta.communities = part.num_communities();
  meta.modularity_q = part.modularity;
  meta.users_with_test = score.users_with_test;
  meta.users_evaluated = score.users_evaluated;
  meta.users_excluded = score.users_excluded;
  return report;
}

// Runs the full modeling pipeline on the training half and scores against
// the test half: graph -> communities -> memberships -> per-user
// recommendations -> P@k/R@k means.
inline EvalReport run_experiment(const VariantSpec& variant,
                                 const Folksonomy& train,
                                 const Folksonomy& test,
                                 const EvalParams& params) {
  SimParams sp = params.sim;
  variant.apply(sp);
  sp.validate();
  const std::vector<int> ks = normalize_k_values(params.k_values);

  const FolkIndex train_ix = FolkIndex::build(train);
  const TagGraph graph = build_graph(train_ix, sp, params.threads);
  const Partition part = louvain(graph, params.louvain_seed);
  const MembershipTable table =
      prune(MembershipTable::build(part, train_ix), params.prune_threshold);
  const FolkIndex test_ix = FolkIndex::build(test);

  // Recommendations are only needed for users that will actually be scored.
  const auto needs_recs = [&](UserId u) {
    if (!test_ix.has_user(u)) return false;
    const auto test_res = test_ix.resources_of_user(u);
    if (test_res.empty()) return false;
    std::vector<ResourceId> eff;
    const auto train_res = train_ix.resources_of_user(u);
    std::set_difference(test_res.begin(), test_res.end(), train_res.begin(),
                        train_res.end(), std::back_inserter(eff));
    return !eff.empty();
  };
  const std::vector<RecommendationList> recs = recommend_all(
      part, table, train_ix, ks.back(), params.threads, needs_recs);

  return assemble_report(variant, sp, params.prune_threshold,
                         params.louvain_seed, ks, params.swap_pr_denominators,
                         params.include_per_user, train, test, train_ix,
                         test_ix, graph.num_nodes(), graph.num_edges(), part,
                         recs);
}

// Report rows as TSV: variant <tab> k <tab> metric <tab> value.
inline std::string report_to_tsv(const EvalReport& r) {
  std::string out = "variant\tk\tmetric\tvalue\n";
  for (int k : r.k_values) {
    out += r.variant.name() + "\t" + std::to_string(k) + "\tprecision\t" +
           detail::format_ratio(r.mean_precision.at(k)) + "\n";
    out += r.variant.name() + "\t" + std::to_string(k) + "\trecall\t" +
           detail::format_ratio(r.mean_recall.at(k)) + "\n";
  }
  return out;
}

struct ComparisonTable {
  std::vector<int> k_values;
  struct Row {
    std::string variant;
    std::map<int, double> precision;
    std::map<int, double> recall;
    std::map<int, double> precision_delta;  // vs first row
    std::map<int, double> recall_delta;
  };
  std::vector<Row> rows;
};

// Validates that reports came from one experimental setting (same data,
// seeds, grid, knobs) and tabulates them with deltas against the first.
inline ComparisonTable compare(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2)
    throw CompareError("compare needs at least 2 reports");
  const RunMeta& base = reports[0].run_meta;
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const RunMeta& m = reports[i].run_meta;
    const auto fail = [&](const std::string& field) {
      throw CompareError("report " + std::to_string(i) + " (" + m.variant +
                         ") differs from report 0 (" + base.variant +
                         ") in " + field);
    };
    if (reports[i].k_values != reports[0].k_values) fail("k grid");
    if (m.dataset_hash != base.dataset_hash) fail("dataset hash");
    if (m.louvain_seed != base.louvain_seed) fail("louvain seed");
    if (m.prune_threshold != base.prune_threshold) fail("prune threshold");
    if (m.swap_pr_denominators != base.swap_pr_denominators)
      fail("metric convention");
    if (m.sim.tau_ms != base.sim.tau_ms) fail("tau_ms");
    if (m.sim.lambda != base.sim.lambda) fail("lambda");
    if (m.sim.alpha_co != base.sim.alpha_co) fail("alpha_co");
    if (m.sim.alpha_nonco != base.sim.alpha_nonco) fail("alpha_nonco");
  }
  ComparisonTable t;
  t.k_values = reports[0].k_values;
  for (const EvalReport& r : reports) {
    ComparisonTable::Row row;
    row.variant = r.variant.name();
    for (int k : t.k_values) {
      row.precision[k] = r.mean_precision.at(k);
      row.recall[k] = r.mean_recall.at(k);
      row.precision_delta[k] =
          r.mean_precision.at(k) - reports[0].mean_precision.at(k);
      row.recall_delta[k] =
          r.mean_recall.at(k) - reports[0].mean_recall.at(k);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// Aligned plain-text rendering; values as percentages for readability.
inline std::string comparison_to_text(const ComparisonTable& t) {
  std::string out;
  char buf[64];
  out += "variant      ";
  for (int k : t.k_values) {
    std::snprintf(buf, sizeof(buf), "  P@%-4d (delta) ", k);
    out += buf;
  }
  for (int k : t.k_values) {
    std::snprintf(buf, sizeof(buf), "  R@%-4d (delta) ", k);
    out += buf;
  }
  out += "\n";
  for (const auto& row : t.rows) {
    std::snprintf(buf, sizeof(buf), "%-13s", row.variant.c_str());
    out += buf;
    for (int k : t.k_values) {
      std::snprintf(buf, sizeof(buf), "  %6.2f%% (%+.2f)",
                    100.0 * row.precision.at(k),
                    100.0 * row.precision_delta.at(k));
      out += buf;
    }
    for (int k : t.k_values) {
      std::snprintf(buf, sizeof(buf), "  %6.2f%% (%+.2f)",
                    100.0 * row.recall.at(k), 100.0 * row.recall_delta.at(k));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

// When all three canonical variants are present, checks the expected
// quality ordering CDR_TIME >= LEXSEM_CDR >= SEM_CDR on P@k and R@k at the
// smallest k and reports OK or VIOLATION lines.  Informational: callers
// print it, they do not assert on it.
inline std::string ordering_check_text(const ComparisonTable& t) {
  if (t.k_values.empty()) return "";
  const auto find_row = [&](std::string_view name) -> const ComparisonTable::Row* {
    for (const auto& row : t.rows) {
      if (row.variant == name) return &row;
    }
    return nullptr;
  };
  const ComparisonTable::Row* sem = find_row("SEM_CDR");
  const ComparisonTable::Row* lex = find_row("LEXSEM_CDR");
  const ComparisonTable::Row* time = find_row("CDR_TIME");
  if (sem == nullptr || lex == nullptr || time == nullptr) return "";
  const int k = t.k_values.front();
  std::string out;
  char buf[256];
  const auto check = [&](const char* metric, double vt, double vl,
                         double vs) {
    const bool ok = vt >= vl && vl >= vs;
    std::snprintf(buf, sizeof(buf),
                  "ordering check %s@%d: %s (CDR_TIME %.4f, LEXSEM_CDR %.4f, "
                  "SEM_CDR %.4f; expected CDR_TIME >= LEXSEM_CDR >= "
                  "SEM_CDR)\n",
                  metric, k, ok ? "OK" : "VIOLATION", vt, vl, vs);
    out += buf;
  };
  check("P", time->precision.at(k), lex->precision.at(k),
        sem->precision.at(k));
  check("R", time->recall.at(k), lex->recall.at(k), sem->recall.at(k));
  return out;
}

inline std::string comparison_to_tsv(const ComparisonTable& t) {
  std::string out = "variant\tk\tmetric\tvalue\tdelta_vs_first\n";
  for (const auto& row : t.rows) {
    for (int k : t.k_values) {
      out += row.variant + "\t" + std::to_string(k) + "\tprecision\t" +
             detail::format_ratio(row.precision.at(k)) + "\t" +
             detail::format_ratio(row.precision_delta.at(k)) + "\n";
      out += row.variant + "\t" + std::to_string(k) + "\trecall\t" +
             detail::format_ratio(row.recall.at(k)) + "\t" +
             detail::format_ratio(row.recall_delta.at(k)) + "\n";
    }
  }
  return out;
}

}  // namespace tagrec
