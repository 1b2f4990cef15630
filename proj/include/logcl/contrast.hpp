#pragma once

#include <vector>

#include "logcl/autodiff.hpp"

namespace logcl {

struct MlpVars {
  ad::Var W1, b1, W2, b2;
  enum class Activation { Tanh, Identity } activation = Activation::Tanh;
};

// Two-layer perceptron on the (row-wise) input followed by L2 normalization
// onto the unit sphere. Zero rows are guarded by the normalizer's epsilon and
// counted on the graph.
ad::Var project(ad::Var x, const MlpVars& p);

// Supervised contrastive loss. Positives for anchor i are the candidates j
// with labels[j] == labels[i]; cross-view the same index is always a positive
// (it shares the label trivially), same-view j == i is excluded. The
// denominator runs over all candidates, minus the anchor itself in the
// same-view case. Anchors without positives contribute zero.
ad::Var supcon_loss(ad::Var anchors, ad::Var candidates,
                    const std::vector<std::int32_t>& labels, double tau, bool same_view);

// (L_lg + L_gl + L_ll + L_gg) / 4. With cross_view_label_positives off, the
// two cross-view losses treat only the same query index as positive.
ad::Var contrastive_total(ad::Var z_local, ad::Var z_global,
                          const std::vector<std::int32_t>& labels, double tau,
                          bool cross_view_label_positives = true);

}  // namespace logcl
