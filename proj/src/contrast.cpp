#include "logcl/contrast.hpp"

#include <numeric>
#include <stdexcept>

namespace logcl {

using ad::Var;

Var project(Var x, const MlpVars& p) {
  Var h = ad::add_rowvec(ad::matmul(x, p.W1), p.b1);
  if (p.activation == MlpVars::Activation::Tanh) h = ad::tanh_v(h);
  Var out = ad::add_rowvec(ad::matmul(h, p.W2), p.b2);
  return ad::l2_normalize_rows(out);
}

Var supcon_loss(Var anchors, Var candidates, const std::vector<std::int32_t>& labels, double tau,
                bool same_view) {
  if (tau <= 0.0) throw std::invalid_argument("supcon_loss: temperature must be positive");
  if (anchors.rows() != candidates.rows())
    throw std::invalid_argument("supcon_loss: anchor/candidate counts disagree");
  if (static_cast<Eigen::Index>(labels.size()) != anchors.rows())
    throw std::invalid_argument("supcon_loss: one label per query required");
  Var sim = ad::scale(ad::matmul_nt(anchors, candidates), 1.0 / tau);
  return ad::supcon_from_sim(sim, std::make_shared<const std::vector<std::int32_t>>(labels),
                             same_view);
}

Var contrastive_total(Var z_local, Var z_global, const std::vector<std::int32_t>& labels,
                      double tau, bool cross_view_label_positives) {
  if (z_local.rows() == 0) throw std::invalid_argument("contrastive_total: empty batch");
  std::vector<std::int32_t> cross_labels = labels;
  if (!cross_view_label_positives) {
    std::iota(cross_labels.begin(), cross_labels.end(), 0);  // same-index positives only
  }
  Var l_lg = supcon_loss(z_local, z_global, cross_labels, tau, /*same_view=*/false);
  Var l_gl = supcon_loss(z_global, z_local, cross_labels, tau, /*same_view=*/false);
  Var l_ll = supcon_loss(z_local, z_local, labels, tau, /*same_view=*/true);
  Var l_gg = supcon_loss(z_global, z_global, labels, tau, /*same_view=*/true);
  return ad::scale(ad::add(ad::add(l_lg, l_gl), ad::add(l_ll, l_gg)), 0.25);
}

}  // namespace logcl
