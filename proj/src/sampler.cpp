#include "logcl/sampler.hpp"

#include <algorithm>
#include <sstream>

namespace logcl {

namespace {

std::uint64_t pair_key(EntityId s, RelationId r) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s)) << 32) |
         static_cast<std::uint64_t>(static_cast<std::uint32_t>(r));
}

}  // namespace

std::string QuerySubgraph::debug_dump() const {
  std::ostringstream out;
  for (const Triple& e : edges) out << e.subject << " " << e.relation << " " << e.object << "\n";
  return out.str();
}

std::vector<EntityId> one_hop_targets(std::span<const Quadruple> history, EntityId s,
                                      RelationId r) {
  std::vector<EntityId> out;
  for (const Quadruple& q : history)
    if (q.subject == s && q.relation == r) out.push_back(q.object);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

HistoryIndex::HistoryIndex(std::int64_t num_entities)
    : num_entities_(num_entities), incident_(static_cast<std::size_t>(num_entities)) {}

void HistoryIndex::add_facts(std::span<const Triple> facts) {
  for (const Triple& t : facts) {
    if (!seen_.insert(t).second) continue;  // time dropped: repeats collapse
    const auto id = static_cast<std::int32_t>(edges_.size());
    edges_.push_back(t);
    incident_[static_cast<std::size_t>(t.subject)].push_back(id);
    if (t.object != t.subject) incident_[static_cast<std::size_t>(t.object)].push_back(id);
    pair_targets_[pair_key(t.subject, t.relation)].push_back(t.object);
  }
}

void HistoryIndex::clear() {
  edges_.clear();
  seen_.clear();
  pair_targets_.clear();
  for (auto& v : incident_) v.clear();
}

std::vector<EntityId> HistoryIndex::one_hop_targets(EntityId s, RelationId r) const {
  auto it = pair_targets_.find(pair_key(s, r));
  if (it == pair_targets_.end()) return {};
  std::vector<EntityId> out = it->second;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

QuerySubgraph HistoryIndex::build_query_subgraph(std::span<const QueryPair> queries) const {
  QuerySubgraph sg;
  sg.query_anchor_map.reserve(queries.size());

  std::vector<EntityId> anchors;
  for (const QueryPair& q : queries) {
    sg.query_anchor_map.push_back(q.first);
    anchors.push_back(q.first);
    auto it = pair_targets_.find(pair_key(q.first, q.second));
    if (it != pair_targets_.end())
      anchors.insert(anchors.end(), it->second.begin(), it->second.end());
  }
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());

  std::vector<std::int32_t> edge_ids;
  for (EntityId e : anchors) {
    if (e < 0 || e >= num_entities_) continue;
    const auto& inc = incident_[static_cast<std::size_t>(e)];
    edge_ids.insert(edge_ids.end(), inc.begin(), inc.end());
  }
  std::sort(edge_ids.begin(), edge_ids.end());
  edge_ids.erase(std::unique(edge_ids.begin(), edge_ids.end()), edge_ids.end());

  sg.edges.reserve(edge_ids.size());
  for (std::int32_t id : edge_ids) sg.edges.push_back(edges_[static_cast<std::size_t>(id)]);
  std::sort(sg.edges.begin(), sg.edges.end());

  sg.node_set.reserve(sg.edges.size() * 2);
  for (const Triple& e : sg.edges) {
    sg.node_set.push_back(e.subject);
    sg.node_set.push_back(e.object);
  }
  std::sort(sg.node_set.begin(), sg.node_set.end());
  sg.node_set.erase(std::unique(sg.node_set.begin(), sg.node_set.end()), sg.node_set.end());
  return sg;
}

QuerySubgraph build_query_subgraph(std::span<const Quadruple> history,
                                   std::span<const QueryPair> queries,
                                   std::int64_t num_entities) {
  HistoryIndex index(num_entities);
  std::vector<Triple> facts;
  facts.reserve(history.size());
  for (const Quadruple& q : history) facts.push_back(Triple{q.subject, q.relation, q.object});
  index.add_facts(facts);
  return index.build_query_subgraph(queries);
}

}  // namespace logcl
