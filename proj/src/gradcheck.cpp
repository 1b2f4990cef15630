#include "logcl/gradcheck.hpp"

#include <cmath>

namespace logcl {

GradCheckResult gradcheck(const std::vector<Parameter*>& params,
                          const std::function<ad::Var(ad::Graph&)>& build_loss, double h,
                          double floor) {
  for (Parameter* p : params) p->zero_grad();
  {
    ad::Graph g(/*training=*/false, nullptr, /*enable_grad=*/true);
    ad::Var loss = build_loss(g);
    g.backward(loss);
  }
  auto eval_loss = [&]() {
    ad::Graph g(/*training=*/false, nullptr, /*enable_grad=*/false);
    return build_loss(g).val()(0, 0);
  };

  GradCheckResult res;
  for (Parameter* p : params) {
    for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
        const double saved = p->value(i, j);
        p->value(i, j) = saved + h;
        const double lp = eval_loss();
        p->value(i, j) = saved - h;
        const double lm = eval_loss();
        p->value(i, j) = saved;
        const double numeric = (lp - lm) / (2.0 * h);
        const double analytic = p->grad(i, j);
        const double rel =
            std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
        if (rel > res.max_rel_err) {
          res.max_rel_err = rel;
          res.worst_param = p->name;
          res.worst_row = i;
          res.worst_col = j;
          res.analytic = analytic;
          res.numeric = numeric;
        }
      }
    }
  }
  return res;
}

}  // namespace logcl
