#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "logcl/sampler.hpp"

using namespace logcl;

namespace {

// Straightforward restatement of the two-stage sampling rule, used as the
// ground truth for the indexed implementation.
std::vector<Triple> brute_force_subgraph(const std::vector<Quadruple>& history,
                                         const std::vector<QueryPair>& queries) {
  std::set<Triple> edges;
  for (const auto& [s, r] : queries) {
    for (const Quadruple& q : history)
      if (q.subject == s || q.object == s) edges.insert(Triple{q.subject, q.relation, q.object});
    std::set<EntityId> targets;
    for (const Quadruple& q : history)
      if (q.subject == s && q.relation == r) targets.insert(q.object);
    for (EntityId t : targets)
      for (const Quadruple& q : history)
        if (q.subject == t || q.object == t) edges.insert(Triple{q.subject, q.relation, q.object});
  }
  return {edges.begin(), edges.end()};
}

std::vector<Quadruple> random_history(std::mt19937& rng, int max_quads, int num_entities,
                                      int num_relations) {
  std::vector<Quadruple> hist;
  const int n = 1 + static_cast<int>(rng() % static_cast<unsigned>(max_quads));
  for (int i = 0; i < n; ++i)
    hist.push_back(Quadruple{static_cast<EntityId>(rng() % static_cast<unsigned>(num_entities)),
                             static_cast<RelationId>(rng() % static_cast<unsigned>(num_relations)),
                             static_cast<EntityId>(rng() % static_cast<unsigned>(num_entities)),
                             static_cast<TimeIndex>(rng() % 5)});
  return hist;
}

}  // namespace

TEST_CASE("one_hop_targets returns objects of matching (s, r) pairs") {
  std::vector<Quadruple> history{{1, 2, 3, 0}, {1, 2, 4, 5}};
  CHECK(one_hop_targets(history, 1, 2) == std::vector<EntityId>{3, 4});
  CHECK(one_hop_targets(history, 1, 9).empty());
}

TEST_CASE("one_hop_targets matches exhaustive scan through the index") {
  std::mt19937 rng(42);
  auto history = random_history(rng, 12, 6, 3);
  HistoryIndex index(6);
  for (const Quadruple& q : history)
    index.add_facts(std::vector<Triple>{{q.subject, q.relation, q.object}});
  for (EntityId s = 0; s < 6; ++s)
    for (RelationId r = 0; r < 3; ++r)
      CHECK(index.one_hop_targets(s, r) == one_hop_targets(history, s, r));
}

TEST_CASE("build_query_subgraph applies the two-stage incidence rule") {
  SUBCASE("empty history yields empty subgraph") {
    std::vector<QueryPair> queries{{1, 2}};
    auto sg = build_query_subgraph(std::vector<Quadruple>{}, queries, 10);
    CHECK(sg.edges.empty());
    CHECK(sg.node_set.empty());
    REQUIRE(sg.query_anchor_map.size() == 1);
    CHECK(sg.query_anchor_map[0] == 1);
  }
  SUBCASE("facts incident to the subject and to its one-hop targets are kept") {
    std::vector<Quadruple> history{{1, 2, 3, 0}, {3, 5, 7, 1}, {8, 6, 9, 1}};
    std::vector<QueryPair> queries{{1, 2}};
    auto sg = build_query_subgraph(history, queries, 10);
    CHECK(sg.edges == std::vector<Triple>{{1, 2, 3}, {3, 5, 7}});
    CHECK(sg.node_set == std::vector<EntityId>{1, 3, 7});
  }
  SUBCASE("repeated facts at different times collapse to one edge") {
    std::vector<Quadruple> history{{1, 2, 3, 0}, {1, 2, 3, 4}};
    std::vector<QueryPair> queries{{1, 2}};
    auto sg = build_query_subgraph(history, queries, 10);
    CHECK(sg.edges == std::vector<Triple>{{1, 2, 3}});
  }
}

TEST_CASE("subgraph equals brute force on random toy histories") {
  std::mt19937 rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    auto history = random_history(rng, 50, 9, 4);
    std::vector<QueryPair> queries;
    const int nq = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < nq; ++i)
      queries.push_back({static_cast<EntityId>(rng() % 9), static_cast<RelationId>(rng() % 4)});
    auto sg = build_query_subgraph(history, queries, 9);
    auto expect = brute_force_subgraph(history, queries);
    CHECK(sg.edges == expect);
  }
}

TEST_CASE("adding a query never removes edges") {
  std::mt19937 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    auto history = random_history(rng, 30, 8, 3);
    std::vector<QueryPair> base{{static_cast<EntityId>(rng() % 8), static_cast<RelationId>(rng() % 3)}};
    auto sg1 = build_query_subgraph(history, base, 8);
    base.push_back({static_cast<EntityId>(rng() % 8), static_cast<RelationId>(rng() % 3)});
    auto sg2 = build_query_subgraph(history, base, 8);
    CHECK(std::includes(sg2.edges.begin(), sg2.edges.end(), sg1.edges.begin(), sg1.edges.end()));
  }
}

TEST_CASE("subgraph construction is order independent") {
  std::mt19937 rng(5);
  auto history = random_history(rng, 40, 8, 3);
  std::vector<QueryPair> queries{{2, 1}, {5, 0}, {3, 2}};
  auto sg1 = build_query_subgraph(history, queries, 8);

  std::shuffle(history.begin(), history.end(), rng);
  std::vector<QueryPair> shuffled = {queries[2], queries[0], queries[1]};
  auto sg2 = build_query_subgraph(history, shuffled, 8);
  CHECK(sg1.edges == sg2.edges);
  CHECK(sg1.node_set == sg2.node_set);
}

TEST_CASE("incremental index matches one-shot construction") {
  std::mt19937 rng(9);
  auto history = random_history(rng, 40, 8, 3);
  std::sort(history.begin(), history.end(),
            [](const Quadruple& a, const Quadruple& b) { return a.time < b.time; });
  HistoryIndex index(8);
  std::vector<Triple> batch;
  TimeIndex cur = history.front().time;
  for (const Quadruple& q : history) {
    if (q.time != cur) {
      index.add_facts(batch);
      batch.clear();
      cur = q.time;
    }
    batch.push_back(Triple{q.subject, q.relation, q.object});
  }
  index.add_facts(batch);

  std::vector<QueryPair> queries{{1, 0}, {4, 2}};
  auto incremental = index.build_query_subgraph(queries);
  auto oneshot = build_query_subgraph(history, queries, 8);
  CHECK(incremental.edges == oneshot.edges);
}

TEST_CASE("debug dump is sorted s r o lines") {
  std::vector<Quadruple> history{{2, 1, 0, 0}, {0, 0, 2, 1}};
  std::vector<QueryPair> queries{{2, 1}};
  auto sg = build_query_subgraph(history, queries, 3);
  CHECK(sg.debug_dump() == "0 0 2\n2 1 0\n");
}
