#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace logcl {

using EntityId = std::int32_t;
using RelationId = std::int32_t;
using TimeIndex = std::int64_t;

// A fact with its (normalized) timestamp.
struct Quadruple {
  EntityId subject = 0;
  RelationId relation = 0;
  EntityId object = 0;
  TimeIndex time = 0;

  friend bool operator==(const Quadruple&, const Quadruple&) = default;
  friend auto operator<=>(const Quadruple&, const Quadruple&) = default;
};

// A fact with time dropped.
struct Triple {
  EntityId subject = 0;
  RelationId relation = 0;
  EntityId object = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// All facts valid at one timestamp. Facts are kept sorted and deduplicated.
struct Snapshot {
  TimeIndex time = 0;
  std::vector<Triple> facts;

  bool empty() const { return facts.empty(); }
};

// All queries at one timestamp in one orientation, with ground-truth objects.
struct QueryBatch {
  TimeIndex t_q = 0;
  bool inverse = false;
  std::vector<EntityId> subjects;
  std::vector<RelationId> relations;
  std::vector<EntityId> objects;

  std::size_t size() const { return subjects.size(); }
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const {
    std::uint64_t k = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.subject)) << 40) ^
                      (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.relation)) << 20) ^
                      static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.object));
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    return static_cast<std::size_t>(k);
  }
};

}  // namespace logcl
