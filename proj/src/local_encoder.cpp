#include "logcl/local_encoder.hpp"

#include <algorithm>
#include <stdexcept>

namespace logcl {

using ad::Var;

SnapshotEdges prepare_edges(std::span<const Triple> facts, std::int64_t num_entities,
                            std::int64_t num_relations_total) {
  SnapshotEdges e;
  e.src.reserve(facts.size());
  e.rel.reserve(facts.size());
  e.dst.reserve(facts.size());
  Eigen::VectorXd in_degree = Eigen::VectorXd::Zero(num_entities);
  auto rel_ents = std::vector<std::vector<std::int32_t>>(
      static_cast<std::size_t>(num_relations_total));
  auto ent_rels = std::vector<std::vector<std::int32_t>>(static_cast<std::size_t>(num_entities));
  for (const Triple& t : facts) {
    if (t.subject < 0 || t.subject >= num_entities || t.object < 0 || t.object >= num_entities)
      throw std::invalid_argument("prepare_edges: entity id out of range");
    if (t.relation < 0 || t.relation >= num_relations_total)
      throw std::invalid_argument("prepare_edges: relation id out of range");
    e.src.push_back(t.subject);
    e.rel.push_back(t.relation);
    e.dst.push_back(t.object);
    in_degree(t.object) += 1.0;
    rel_ents[static_cast<std::size_t>(t.relation)].push_back(t.subject);
    rel_ents[static_cast<std::size_t>(t.relation)].push_back(t.object);
    ent_rels[static_cast<std::size_t>(t.subject)].push_back(t.relation);
  }
  e.inv_in_degree = in_degree.unaryExpr([](double c) { return c > 0.0 ? 1.0 / c : 0.0; });
  for (auto& v : rel_ents) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  for (auto& v : ent_rels) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  e.rel_entities =
      std::make_shared<const std::vector<std::vector<std::int32_t>>>(std::move(rel_ents));
  e.ent_relations =
      std::make_shared<const std::vector<std::vector<std::int32_t>>>(std::move(ent_rels));
  return e;
}

Var time_encode(TimeIndex t_i, TimeIndex t_q, Var w_t, Var b_t) {
  if (t_i >= t_q)
    throw std::invalid_argument("time_encode: snapshot time must precede the query time");
  const double interval = static_cast<double>(t_q - t_i);
  return ad::cos_v(ad::add(ad::scale(w_t, interval), b_t));
}

Var dynamic_embed(Var H, Var phi, Var W0) {
  Var phi_rows = ad::rowvec_broadcast(phi, H.rows());
  return ad::matmul(ad::concat_cols(H, phi_rows), W0);
}

namespace {

Var apply_activation(Var x, Activation act) {
  switch (act) {
    case Activation::RRelu:
      return ad::rrelu(x);
    case Activation::Identity:
      return x;
  }
  return x;
}

}  // namespace

Var rgcn_layer(const SnapshotEdges& edges, Var H_in, Var R_in,
               const RgcnLayerVars& p) {
  Var self_loop = ad::matmul(H_in, p.W2);
  Var pre = self_loop;
  if (!edges.empty()) {
    Var h_src = ad::gather_rows(H_in, ad::make_idx(std::vector<std::int32_t>(edges.src)));
    Var r_edge = ad::gather_rows(R_in, ad::make_idx(std::vector<std::int32_t>(edges.rel)));
    Var messages = ad::matmul(ad::add(h_src, r_edge), p.W1);
    Var agg = ad::scatter_sum_rows(messages, ad::make_idx(std::vector<std::int32_t>(edges.dst)),
                                   H_in.rows());
    pre = ad::add(ad::rowwise_scale_const(agg, edges.inv_in_degree), self_loop);
  }
  return ad::dropout(apply_activation(pre, p.activation), p.dropout);
}

Var evolve_entities(Var H, Var X, const GruVars& p) {
  Var z = ad::sigmoid(ad::add_rowvec(ad::add(ad::matmul(X, p.Wxz), ad::matmul(H, p.Whz)), p.bz));
  Var r = ad::sigmoid(ad::add_rowvec(ad::add(ad::matmul(X, p.Wxr), ad::matmul(H, p.Whr)), p.br));
  Var cand = ad::tanh_v(
      ad::add_rowvec(ad::add(ad::matmul(X, p.Wxn), ad::cmul(r, ad::matmul(H, p.Whn))), p.bn));
  return ad::add(ad::cmul(z, cand), ad::cmul(ad::one_minus(z), H));
}

Var relation_pool(const SnapshotEdges& edges, Var H_t, Var R0) {
  return ad::add(ad::group_mean_rows(H_t, edges.rel_entities), R0);
}

Var relation_gate(Var R_prime, Var R_t, const RelGateVars& p) {
  Var u = ad::sigmoid(ad::add_rowvec(ad::matmul(R_prime, p.W3), p.b3));
  return ad::add(ad::cmul(u, R_prime), ad::cmul(ad::one_minus(u), R_t));
}

Var evolve_relations(const SnapshotEdges& edges, Var H_t, Var R_t, Var R0,
                     const RelGateVars& p) {
  return relation_gate(relation_pool(edges, H_t, R0), R_t, p);
}

LocalTrace run_local_window(std::span<const SnapshotEdges> window,
                            std::span<const TimeIndex> times, TimeIndex t_q, Var H0, Var R0,
                            const LocalEncoderVars& p) {
  if (window.empty()) throw std::invalid_argument("run_local_window: empty window");
  if (window.size() != times.size())
    throw std::invalid_argument("run_local_window: one timestamp per snapshot required");
  LocalTrace trace;
  Var H = H0;
  Var R = R0;
  for (std::size_t i = 0; i < window.size(); ++i) {
    Var phi = time_encode(times[i], t_q, p.w_t, p.b_t);
    Var dyn = dynamic_embed(H, phi, p.W0);
    Var agg = rgcn_layer(window[i], dyn, R, p.layer0);
    agg = rgcn_layer(window[i], agg, R, p.layer1);
    Var H_next = evolve_entities(H, agg, p.gru);
    Var R_next = evolve_relations(window[i], H, R, R0, p.gate);
    trace.h_agg.push_back(agg);
    H = H_next;
    R = R_next;
  }
  trace.H_final = H;
  trace.R_final = R;
  trace.last_snapshot = &window.back();
  return trace;
}

Var local_query_vector(const LocalTrace& trace, const QueryBatch& batch,
                       Var W4) {
  const auto& ent_rels = *trace.last_snapshot->ent_relations;
  auto groups = std::make_shared<std::vector<std::vector<std::int32_t>>>();
  groups->reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& rels = ent_rels[static_cast<std::size_t>(batch.subjects[i])];
    if (rels.empty())
      groups->push_back({batch.relations[i]});  // absent entity: use the query relation
    else
      groups->push_back(rels);
  }
  Var rel_mean = ad::group_mean_rows(
      trace.R_final, std::shared_ptr<const std::vector<std::vector<std::int32_t>>>(groups));
  Var h_rows = ad::gather_rows(
      trace.H_final, ad::make_idx(std::vector<std::int32_t>(batch.subjects.begin(),
                                                            batch.subjects.end())));
  return ad::matmul(ad::concat_cols(rel_mean, h_rows), W4);
}

Var entity_aware_attention_local(const LocalTrace& trace, Var query_vec,
                                 const QueryBatch& batch, Var w5) {
  if (trace.h_agg.empty())
    throw std::invalid_argument("entity_aware_attention_local: empty trace");
  auto subj_idx =
      ad::make_idx(std::vector<std::int32_t>(batch.subjects.begin(), batch.subjects.end()));
  Var scores;
  std::vector<Var> step_rows;
  step_rows.reserve(trace.h_agg.size());
  for (std::size_t i = 0; i < trace.h_agg.size(); ++i) {
    Var rows = ad::gather_rows(trace.h_agg[i], subj_idx);
    step_rows.push_back(rows);
    Var s = ad::matmul(ad::add(rows, query_vec), w5);  // n x 1
    scores = (i == 0) ? s : ad::concat_cols(scores, s);
  }
  Var alpha = ad::softmax_rows(scores);  // n x k
  Var out = ad::gather_rows(trace.H_final, subj_idx);
  for (std::size_t i = 0; i < step_rows.size(); ++i) {
    Var a_i = ad::slice_cols(alpha, static_cast<Eigen::Index>(i), 1);
    out = ad::add(out, ad::rowwise_scale(step_rows[i], a_i));
  }
  return out;
}

std::pair<Var, LocalTrace> run_local_encoder(std::span<const SnapshotEdges> window,
                                             std::span<const TimeIndex> times, TimeIndex t_q,
                                             Var H0, Var R0, const LocalEncoderVars& p,
                                             const QueryBatch& batch, bool use_attention) {
  LocalTrace trace = run_local_window(window, times, t_q, H0, R0, p);
  auto subj_idx =
      ad::make_idx(std::vector<std::int32_t>(batch.subjects.begin(), batch.subjects.end()));
  if (!use_attention) return {ad::gather_rows(trace.H_final, subj_idx), std::move(trace)};
  Var qv = local_query_vector(trace, batch, p.W4);
  Var local = entity_aware_attention_local(trace, qv, batch, p.w5);
  return {local, std::move(trace)};
}

}  // namespace logcl
