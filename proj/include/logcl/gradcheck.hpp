#pragma once

#include <functional>
#include <string>
#include <vector>

#include "logcl/autodiff.hpp"
#include "logcl/param.hpp"

namespace logcl {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  Eigen::Index worst_row = 0, worst_col = 0;
  double analytic = 0.0, numeric = 0.0;
};

// Compares reverse-mode gradients of a scalar-valued builder against central
// finite differences for every element of the listed parameters. The builder
// is invoked on fresh eval-mode graphs (stochastic layers disabled) and must
// be deterministic. Relative error uses |a - f| / max(|a|, |f|, floor).
GradCheckResult gradcheck(const std::vector<Parameter*>& params,
                          const std::function<ad::Var(ad::Graph&)>& build_loss, double h = 1e-5,
                          double floor = 1e-3);

}  // namespace logcl
