#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "logcl/types.hpp"

namespace logcl {

// A (subject, relation) query pair awaiting an object.
using QueryPair = std::pair<EntityId, RelationId>;

// Timeless multigraph of historical facts relevant to a query batch: the union
// of facts incident to each query subject and of facts incident to that
// subject's historical one-hop answers for the query relation.
struct QuerySubgraph {
  std::vector<Triple> edges;       // deduplicated, sorted, time dropped
  std::vector<EntityId> node_set;  // sorted unique endpoints of `edges`
  std::vector<EntityId> query_anchor_map;  // query index -> its subject entity

  // Deterministic `s r o` line dump for oracle comparison.
  std::string debug_dump() const;
};

// Objects o with (s, r, o, t) in the history, sorted. Linear scan; the
// indexed equivalent lives on HistoryIndex.
std::vector<EntityId> one_hop_targets(std::span<const Quadruple> history, EntityId s,
                                      RelationId r);

// Incremental incidence index over historical facts with time dropped.
// Snapshots are fed in ascending time order between query batches; subgraph
// construction against a fixed index is read-only.
class HistoryIndex {
 public:
  explicit HistoryIndex(std::int64_t num_entities);

  void add_facts(std::span<const Triple> facts);
  void add_snapshot(const Snapshot& snap) { add_facts(snap.facts); }
  void clear();

  std::size_t num_edges() const { return edges_.size(); }

  std::vector<EntityId> one_hop_targets(EntityId s, RelationId r) const;
  QuerySubgraph build_query_subgraph(std::span<const QueryPair> queries) const;

 private:
  std::int64_t num_entities_;
  std::vector<Triple> edges_;                        // deduplicated union
  std::vector<std::vector<std::int32_t>> incident_;  // entity -> edge ids (either role)
  std::unordered_set<Triple, TripleHash> seen_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> pair_targets_;  // (s,r) -> objects
};

// One-shot construction from a quadruple history (times must all precede the
// query timestamp; the rule itself never reads them).
QuerySubgraph build_query_subgraph(std::span<const Quadruple> history,
                                   std::span<const QueryPair> queries,
                                   std::int64_t num_entities);

}  // namespace logcl
