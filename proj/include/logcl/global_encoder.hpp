#pragma once

#include "logcl/autodiff.hpp"
#include "logcl/local_encoder.hpp"
#include "logcl/sampler.hpp"
#include "logcl/types.hpp"

namespace logcl {

struct GlobalEncoderVars {
  RgcnLayerVars layer0, layer1;  // independent of the local encoder's layers
  ad::Var w6;                    // gate scorer, d x 1
};

// Two stacked aggregation layers over the timeless query subgraph, fed with
// the initial embeddings. Entities without subgraph in-edges pass through the
// self-loop path alone; output has one row per entity.
ad::Var rgcn_global(const SnapshotEdges& subgraph, ad::Var H0, ad::Var R0,
                    const GlobalEncoderVars& p);

// beta = sigmoid((h_g_rows + h_ref_rows) . w6), one scalar gate per row.
ad::Var entity_gate(ad::Var h_g_rows, ad::Var h_ref_rows, ad::Var w6);

// Gated per-query global representation beta * H_g_agg[e_q]. `H_ref` supplies
// the gate's comparison state (the evolved local matrix by default, the
// initial embeddings when the local encoder is off). With use_attention off,
// the rows are returned ungated.
ad::Var entity_aware_attention_global(ad::Var H_g_agg, ad::Var H_ref,
                                      const QueryBatch& batch, ad::Var w6, bool use_attention);

}  // namespace logcl
