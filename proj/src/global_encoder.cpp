#include "logcl/global_encoder.hpp"

namespace logcl {

using ad::Var;

Var rgcn_global(const SnapshotEdges& subgraph, Var H0, Var R0,
                const GlobalEncoderVars& p) {
  Var h = rgcn_layer(subgraph, H0, R0, p.layer0);
  return rgcn_layer(subgraph, h, R0, p.layer1);
}

Var entity_gate(Var h_g_rows, Var h_ref_rows, Var w6) {
  return ad::sigmoid(ad::matmul(ad::add(h_g_rows, h_ref_rows), w6));
}

Var entity_aware_attention_global(Var H_g_agg, Var H_ref, const QueryBatch& batch,
                                  Var w6, bool use_attention) {
  auto subj_idx =
      ad::make_idx(std::vector<std::int32_t>(batch.subjects.begin(), batch.subjects.end()));
  Var rows = ad::gather_rows(H_g_agg, subj_idx);
  if (!use_attention) return rows;
  Var beta = entity_gate(rows, ad::gather_rows(H_ref, subj_idx), w6);
  return ad::rowwise_scale(rows, beta);
}

}  // namespace logcl
