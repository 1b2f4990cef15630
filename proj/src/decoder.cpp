#include "logcl/decoder.hpp"

#include <cmath>
#include <stdexcept>

#include "logcl/types.hpp"

namespace logcl {

using ad::Var;

Var fuse(Var h_local, Var h_global, double lambda) {
  if (lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("fuse: lambda must lie in [0, 1]");
  return ad::add(ad::scale(h_global, lambda), ad::scale(h_local, 1.0 - lambda));
}

Var convtranse_features(Var h, Var r, const ScorerVars& p) {
  const Eigen::Index d = h.cols();
  Var a = h, b = r;
  if (p.use_batchnorm) {
    Var stacked = ad::batchnorm_channels(ad::concat_cols(a, b), 2, p.bn0_gamma, p.bn0_beta,
                                         *p.bn0_mean, *p.bn0_var);
    a = ad::slice_cols(stacked, 0, d);
    b = ad::slice_cols(stacked, d, d);
  }
  a = ad::dropout(a, p.dropout);
  b = ad::dropout(b, p.dropout);
  Var conv = ad::conv2x3(a, b, p.kernels, p.kbias);  // n x (K*d)
  if (p.use_batchnorm)
    conv = ad::batchnorm_channels(conv, p.kernels.rows(), p.bn1_gamma, p.bn1_beta, *p.bn1_mean,
                                  *p.bn1_var);
  conv = ad::dropout(ad::relu(conv), p.dropout);
  Var feat = ad::add_rowvec(ad::matmul(conv, p.Wfc), p.bfc);
  feat = ad::dropout(feat, p.dropout);
  if (p.use_batchnorm)
    feat = ad::batchnorm_channels(feat, d, p.bn2_gamma, p.bn2_beta, *p.bn2_mean, *p.bn2_var);
  return ad::relu(feat);
}

Var convtranse_logits(Var h, Var r, Var H_candidates, const ScorerVars& p) {
  if (h.cols() != H_candidates.cols())
    throw std::invalid_argument("convtranse_logits: dimension mismatch with candidates");
  return ad::matmul_nt(convtranse_features(h, r, p), H_candidates);
}

Var convtranse_score(Var h, Var r, Var H_candidates, const ScorerVars& p) {
  return ad::softmax_rows(convtranse_logits(h, r, H_candidates, p));
}

namespace {

ad::IdxVec truth_idx(const std::vector<EntityId>& truths, Eigen::Index num_entities) {
  std::vector<std::int32_t> idx(truths.begin(), truths.end());
  for (std::int32_t t : idx)
    if (t < 0 || t >= num_entities)
      throw std::invalid_argument("truth entity id out of range: " + std::to_string(t));
  return ad::make_idx(std::move(idx));
}

}  // namespace

Var tkg_loss(Var scores, const std::vector<EntityId>& truths) {
  if (static_cast<Eigen::Index>(truths.size()) != scores.rows())
    throw std::invalid_argument("tkg_loss: one truth per query required");
  Var picked = ad::gather_cols_per_row(scores, truth_idx(truths, scores.cols()));
  return ad::scale(ad::sum_all(ad::log_v(picked)), -1.0);
}

Var tkg_nll_from_logits(Var logits, const std::vector<EntityId>& truths) {
  if (static_cast<Eigen::Index>(truths.size()) != logits.rows())
    throw std::invalid_argument("tkg_nll_from_logits: one truth per query required");
  Var picked =
      ad::gather_cols_per_row(ad::log_softmax_rows(logits), truth_idx(truths, logits.cols()));
  return ad::scale(ad::sum_all(picked), -1.0);
}

Var total_loss(Var l_tkg, Var l_cl) {
  if (!std::isfinite(l_tkg.val()(0, 0)) || !std::isfinite(l_cl.val()(0, 0)))
    throw std::domain_error("total_loss: non-finite component loss");
  return ad::add(l_tkg, l_cl);
}

}  // namespace logcl
