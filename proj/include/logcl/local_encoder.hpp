#pragma once

#include <memory>
#include <span>
#include <vector>

#include "logcl/autodiff.hpp"
#include "logcl/types.hpp"

namespace logcl {

// Edge arrays and incidence groups for one snapshot (or one query subgraph),
// precomputed once so graph construction is pure index arithmetic.
struct SnapshotEdges {
  std::vector<std::int32_t> src, rel, dst;
  Eigen::VectorXd inv_in_degree;  // per entity, 0 where in-degree is 0
  // relation id -> unique entities it touches (either endpoint)
  std::shared_ptr<const std::vector<std::vector<std::int32_t>>> rel_entities;
  // entity -> unique relation ids it heads as subject
  std::shared_ptr<const std::vector<std::vector<std::int32_t>>> ent_relations;

  bool empty() const { return src.empty(); }
  std::size_t num_edges() const { return src.size(); }
};

SnapshotEdges prepare_edges(std::span<const Triple> facts, std::int64_t num_entities,
                            std::int64_t num_relations_total);

enum class Activation { RRelu, Identity };

struct RgcnLayerVars {
  ad::Var W1;  // message transform, d x d
  ad::Var W2;  // self-loop transform, d x d
  Activation activation = Activation::RRelu;
  double dropout = 0.0;
};

struct GruVars {
  ad::Var Wxz, Whz, bz;
  ad::Var Wxr, Whr, br;
  ad::Var Wxn, Whn, bn;
};

struct RelGateVars {
  ad::Var W3, b3;
};

// phi(t_q - t_i) = cos((t_q - t_i) * w_t + b_t), a 1 x d feature shared by all
// entities at this window step. Requires t_i < t_q.
ad::Var time_encode(TimeIndex t_i, TimeIndex t_q, ad::Var w_t, ad::Var b_t);

// Row-wise [H || phi] * W0, W0 is 2d x d.
ad::Var dynamic_embed(ad::Var H, ad::Var phi, ad::Var W0);

// One aggregation layer: per object entity the in-degree-normalized sum of
// W1 (h_s + r) messages plus the W2 self-loop, through the activation, then
// dropout. Entities without in-edges see only the self-loop term.
ad::Var rgcn_layer(const SnapshotEdges& edges, ad::Var H_in, ad::Var R_in,
                   const RgcnLayerVars& p);

// Row-wise gated recurrent cell: out = z (.) cand + (1 - z) (.) H with
// z = sigmoid(X Wxz + H Whz + bz), r = sigmoid(X Wxr + H Whr + br),
// cand = tanh(X Wxn + r (.) (H Whn) + bn). X is the aggregated input.
ad::Var evolve_entities(ad::Var H, ad::Var X, const GruVars& p);

// r' = mean of entity embeddings touching r in the snapshot, plus the static
// relation row (relations absent from the snapshot keep the static row alone).
ad::Var relation_pool(const SnapshotEdges& edges, ad::Var H_t, ad::Var R0);

// Time gate: R_next = U (.) R' + (1 - U) (.) R with U = sigmoid(R' W3 + b3).
ad::Var relation_gate(ad::Var R_prime, ad::Var R_t, const RelGateVars& p);

// relation_pool followed by relation_gate.
ad::Var evolve_relations(const SnapshotEdges& edges, ad::Var H_t, ad::Var R_t,
                         ad::Var R0, const RelGateVars& p);

// Per-window-step products of the recurrent encoder.
struct LocalTrace {
  std::vector<ad::Var> h_agg;  // aggregated |E| x d matrices, one per step
  ad::Var H_final;             // evolved entity matrix at t_q
  ad::Var R_final;             // evolved relation matrix at t_q
  const SnapshotEdges* last_snapshot = nullptr;  // most recent window snapshot

  std::size_t steps() const { return h_agg.size(); }
};

struct LocalEncoderVars {
  ad::Var w_t, b_t, W0;
  RgcnLayerVars layer0, layer1;
  GruVars gru;
  RelGateVars gate;
  ad::Var W4;  // query vector map, 2d x d
  ad::Var w5;  // attention scorer, d x 1
};

// Evolves (H0, R0) across the window snapshots in time order. `window` must
// be the prepared edges of snapshot_window(t_q, m), ascending; `times` their
// timestamps.
LocalTrace run_local_window(std::span<const SnapshotEdges> window,
                            std::span<const TimeIndex> times, TimeIndex t_q, ad::Var H0,
                            ad::Var R0, const LocalEncoderVars& p);

// W4 [mean of current embeddings of relations incident to e_q in the last
// window snapshot || H_tq[e_q]]; queries whose subject is absent from that
// snapshot fall back to the query relation embedding for the mean.
ad::Var local_query_vector(const LocalTrace& trace, const QueryBatch& batch,
                           ad::Var W4);

// Softmax attention over the window steps conditioned on the query vector;
// returns H_tq[e_q] + sum_i alpha_i h_agg_i[e_q], one row per query.
ad::Var entity_aware_attention_local(const LocalTrace& trace, ad::Var query_vec,
                                     const QueryBatch& batch, ad::Var w5);

// Window evolution plus per-query attention; returns the n x d local query
// representations alongside the trace for downstream contrast and decoding.
std::pair<ad::Var, LocalTrace> run_local_encoder( std::span<const SnapshotEdges> window,
                                                 std::span<const TimeIndex> times, TimeIndex t_q,
                                                 ad::Var H0, ad::Var R0,
                                                 const LocalEncoderVars& p,
                                                 const QueryBatch& batch, bool use_attention);

}  // namespace logcl
