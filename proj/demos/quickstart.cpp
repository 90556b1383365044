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

// Minimal library walkthrough: build a folksonomy in memory, derive the
// weighted tag graph, detect communities, and print recommendations for
// one user.

#include <cstdio>

#include "tagrec/community.hpp"
#include "tagrec/folksonomy.hpp"
#include "tagrec/recommender.hpp"
#include "tagrec/similarity.hpp"
#include "tagrec/tag_graph.hpp"

int main() {
  using namespace tagrec;

  constexpr Timestamp kDay = 86'400'000;
  Folksonomy f;
  f.users = {1, 2, 3};
  f.tags = {{1, "jazz"}, {2, "jaz"}, {3, "piano"}, {4, "cooking"},
            {5, "recipes"}};
  f.resources = {10, 11, 12, 13, 14};
  // user, tag, resource, timestamp
  f.assignments = {
      {1, 1, 10, 1 * kDay},  {1, 3, 10, 1 * kDay}, {1, 1, 11, 2 * kDay},
      {2, 2, 11, 2 * kDay},  {2, 3, 11, 3 * kDay}, {2, 1, 12, 3 * kDay},
      {3, 4, 13, 4 * kDay},  {3, 5, 13, 4 * kDay}, {3, 4, 14, 5 * kDay},
      {3, 5, 14, 6 * kDay},  {1, 3, 12, 7 * kDay},
  };
  f.sort_canonical();
  validate_folksonomy(f);

  const FolkIndex ix = FolkIndex::build(f);
  const SimParams params;  // defaults: tau = 30 days, lambda = 0.5
  const TagGraph graph = build_graph(ix, params);
  std::printf("graph: %zu nodes, %zu edges\n", graph.num_nodes(),
              graph.num_edges());
  for (const auto& e : graph.edges) {
    std::printf("  %s -- %s  w=%.4f\n", ix.tag_string(e.a).c_str(),
                ix.tag_string(e.b).c_str(), e.weight);
  }

  const Partition part = louvain(graph, /*seed=*/7);
  std::printf("communities: %zu (Q=%.4f)\n", part.num_communities(),
              part.modularity);
  for (std::size_t c = 0; c < part.communities.size(); ++c) {
    std::printf("  community %zu:", c);
    for (TagId t : part.communities[c])
      std::printf(" %s", ix.tag_string(t).c_str());
    std::printf("\n");
  }

  const MembershipTable table = prune(MembershipTable::build(part, ix), 0.1);
  Recommender rec(part, table, ix);
  const RecommendationList top = rec.recommend(/*user=*/2, /*k=*/3);
  std::printf("recommendations for user %d:\n", top.user);
  for (const auto& [resource, score] : top.items)
    std::printf("  resource %d  score %.6f\n", resource, score);
  return 0;
}
