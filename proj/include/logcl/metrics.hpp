#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "logcl/types.hpp"

namespace logcl {

struct RankRecord {
  EntityId subject = 0;
  RelationId relation = 0;
  TimeIndex time = 0;
  bool inverse = false;
  EntityId truth = 0;
  double raw_rank = 0.0;
  double filtered_rank = 0.0;
};

struct MetricsReport {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  double raw_mrr = 0.0;
  double raw_hits1 = 0.0;
  double raw_hits3 = 0.0;
  double raw_hits10 = 0.0;
  std::size_t count = 0;
  std::map<TimeIndex, double> per_timestamp_mrr;
  std::string config_fingerprint;
};

// Rank of `truth` within `scores`, ties resolved as the mean rank of the tied
// block (an all-tied vector of length n ranks (n+1)/2).
double ranked_position(const Eigen::VectorXd& scores, EntityId truth);

// Same after removing every candidate e != truth with (s, r, e) true at the
// query's own timestamp. `co_true_at_t` must hold the ground-truth facts at
// that timestamp, in the query's orientation.
double time_aware_filtered_rank(const Eigen::VectorXd& scores, EntityId truth, EntityId subject,
                                RelationId relation,
                                const std::function<bool(EntityId)>& co_true_at_t);
// Convenience overload taking the fact set directly.
double time_aware_filtered_rank(const Eigen::VectorXd& scores, EntityId truth, EntityId subject,
                                RelationId relation, const std::vector<Triple>& facts_at_t);

// MRR and Hits@{1,3,10} under the filtered ranks, raw variants alongside,
// plus per-timestamp sub-aggregates. Throws on an empty input.
MetricsReport aggregate(const std::vector<RankRecord>& records);

}  // namespace logcl
