#include "logcl/metrics.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

namespace logcl {

double ranked_position(const Eigen::VectorXd& scores, EntityId truth) {
  if (truth < 0 || truth >= scores.size())
    throw std::invalid_argument("ranked_position: truth id out of range");
  const double s = scores(truth);
  std::int64_t better = 0, tied = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (scores(i) > s)
      ++better;
    else if (scores(i) == s)
      ++tied;  // includes the truth itself
  }
  return static_cast<double>(better) + 0.5 * static_cast<double>(tied + 1);
}

double time_aware_filtered_rank(const Eigen::VectorXd& scores, EntityId truth, EntityId subject,
                                RelationId relation,
                                const std::function<bool(EntityId)>& co_true_at_t) {
  if (truth < 0 || truth >= scores.size())
    throw std::invalid_argument("time_aware_filtered_rank: truth id out of range");
  (void)subject;
  (void)relation;
  const double s = scores(truth);
  std::int64_t better = 0, tied = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (i != truth && co_true_at_t(static_cast<EntityId>(i))) continue;  // filtered out
    if (scores(i) > s)
      ++better;
    else if (scores(i) == s)
      ++tied;
  }
  assert(tied >= 1);  // the truth is never filtered out
  return static_cast<double>(better) + 0.5 * static_cast<double>(tied + 1);
}

double time_aware_filtered_rank(const Eigen::VectorXd& scores, EntityId truth, EntityId subject,
                                RelationId relation, const std::vector<Triple>& facts_at_t) {
  return time_aware_filtered_rank(scores, truth, subject, relation, [&](EntityId e) {
    return std::binary_search(facts_at_t.begin(), facts_at_t.end(),
                              Triple{subject, relation, e});
  });
}

MetricsReport aggregate(const std::vector<RankRecord>& records) {
  if (records.empty()) throw std::invalid_argument("aggregate: no rank records");
  MetricsReport rep;
  rep.count = records.size();
  std::map<TimeIndex, std::pair<double, std::int64_t>> per_t;
  for (const RankRecord& r : records) {
    assert(r.filtered_rank >= 1.0 && r.filtered_rank <= r.raw_rank);
    rep.mrr += 1.0 / r.filtered_rank;
    rep.hits1 += r.filtered_rank <= 1.0 ? 1.0 : 0.0;
    rep.hits3 += r.filtered_rank <= 3.0 ? 1.0 : 0.0;
    rep.hits10 += r.filtered_rank <= 10.0 ? 1.0 : 0.0;
    rep.raw_mrr += 1.0 / r.raw_rank;
    rep.raw_hits1 += r.raw_rank <= 1.0 ? 1.0 : 0.0;
    rep.raw_hits3 += r.raw_rank <= 3.0 ? 1.0 : 0.0;
    rep.raw_hits10 += r.raw_rank <= 10.0 ? 1.0 : 0.0;
    auto& [sum, cnt] = per_t[r.time];
    sum += 1.0 / r.filtered_rank;
    ++cnt;
  }
  const double n = static_cast<double>(records.size());
  for (double* v : {&rep.mrr, &rep.hits1, &rep.hits3, &rep.hits10, &rep.raw_mrr, &rep.raw_hits1,
                    &rep.raw_hits3, &rep.raw_hits10})
    *v /= n;
  for (const auto& [t, acc] : per_t)
    rep.per_timestamp_mrr[t] = acc.first / static_cast<double>(acc.second);

  // Metric sanity, asserted on every aggregation.
  if (!(rep.hits1 <= rep.hits3 + 1e-12 && rep.hits3 <= rep.hits10 + 1e-12 && rep.hits10 <= 1.0))
    throw std::logic_error("aggregate: Hits@k ordering violated");
  if (!(rep.mrr >= 0.0 && rep.mrr <= 1.0))
    throw std::logic_error("aggregate: MRR outside [0, 1]");
  return rep;
}

}  // namespace logcl
