#pragma once

#include <vector>

#include "logcl/autodiff.hpp"
#include "logcl/param.hpp"

namespace logcl {

// lambda * h_global + (1 - lambda) * h_local, elementwise over matching rows.
ad::Var fuse(ad::Var h_local, ad::Var h_global, double lambda);

// Convolutional translational scorer: the query vector and its relation vector
// form a two-channel length-d map run through width-3 kernels (unit padding),
// flattened, projected back to d and activated; candidate scores are dot
// products against the candidate matrix.
struct ScorerVars {
  ad::Var kernels;  // K x 6
  ad::Var kbias;    // 1 x K
  ad::Var Wfc;      // (K*d) x d
  ad::Var bfc;      // 1 x d
  double dropout = 0.0;
  // Optional batch normalization following the usual ConvTransE layout.
  bool use_batchnorm = false;
  ad::Var bn0_gamma, bn0_beta, bn1_gamma, bn1_beta, bn2_gamma, bn2_beta;
  Parameter* bn0_mean = nullptr;
  Parameter* bn0_var = nullptr;
  Parameter* bn1_mean = nullptr;
  Parameter* bn1_var = nullptr;
  Parameter* bn2_mean = nullptr;
  Parameter* bn2_var = nullptr;
};

// Projected n x d feature rows for a batch of (query vector, relation vector)
// pairs; the piece of the scorer shared by training and ranking paths.
ad::Var convtranse_features(ad::Var h, ad::Var r, const ScorerVars& p);

// Raw candidate logits: features . H_candidates^T, n x |E|.
ad::Var convtranse_logits(ad::Var h, ad::Var r, ad::Var H_candidates, const ScorerVars& p);

// Softmax-normalized probabilistic scores over all candidate entities.
ad::Var convtranse_score(ad::Var h, ad::Var r, ad::Var H_candidates, const ScorerVars& p);

// Sum over the batch of -log(score of the true entity); takes the normalized
// score rows produced by convtranse_score.
ad::Var tkg_loss(ad::Var scores, const std::vector<EntityId>& truths);

// Numerically fused equivalent working from raw logits.
ad::Var tkg_nll_from_logits(ad::Var logits, const std::vector<EntityId>& truths);

// L = L_tkg + L_cl; both inputs must be finite 1x1 nodes.
ad::Var total_loss(ad::Var l_tkg, ad::Var l_cl);

}  // namespace logcl
