#include "logcl/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace logcl::ad {

namespace {

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

bool same_graph(Var a, Var b) { return a.g == b.g; }

}  // namespace

const Mat& Var::val() const { return g->node(id).value; }

std::mt19937_64& Graph::rng() {
  if (!rng_) throw std::logic_error("graph has no rng bound (needed for stochastic layers)");
  return *rng_;
}

Var Graph::constant(Mat v) { return make(std::move(v), false, {}); }

Var Graph::leaf(Parameter& p) {
  Var v = make(p.value, grad_enabled_, [param = &p](Graph& g, std::int32_t self) {
    param->grad += g.node(self).grad;
  });
  node(v.id).param = &p;
  return v;
}

Var Graph::make(Mat value, bool requires_grad, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

void Graph::backward(Var loss) {
  check(loss.g == this, "backward: loss from another graph");
  check(loss.val().rows() == 1 && loss.val().cols() == 1, "backward: loss must be 1x1");
  if (backward_done_) throw std::logic_error("backward already ran on this graph");
  backward_done_ = true;
  if (!grad_enabled_) return;
  accum(loss.id, Mat::Ones(1, 1));
  for (std::int32_t i = loss.id; i >= 0; --i) {
    Node& n = node(i);
    if (n.grad_alloc && n.backward) n.backward(*this, i);
    // Values above the sweep point can no longer be read; release storage so
    // peak memory stays near the forward footprint.
    n.value.resize(0, 0);
    n.grad.resize(0, 0);
    n.grad_alloc = false;
  }
}

IdxVec make_idx(std::vector<std::int32_t> v) {
  return std::make_shared<const std::vector<std::int32_t>>(std::move(v));
}

namespace {

bool any_req(std::initializer_list<Var> vs) {
  for (Var v : vs)
    if (v.g->needs_grad(v.id)) return true;
  return false;
}

}  // namespace

Var matmul(Var a, Var b) {
  check(same_graph(a, b), "matmul: graph mismatch");
  check(a.cols() == b.rows(), "matmul: inner dimensions disagree");
  Mat v = a.val() * b.val();
  return a.g->make(std::move(v), any_req({a, b}),
                   [a = a.id, b = b.id](Graph& g, std::int32_t self) {
                     const Mat& go = g.node(self).grad;
                     if (g.needs_grad(a)) g.accum(a, go * g.node(b).value.transpose());
                     if (g.needs_grad(b)) g.accum(b, g.node(a).value.transpose() * go);
                   });
}

Var matmul_nt(Var a, Var b) {
  check(same_graph(a, b), "matmul_nt: graph mismatch");
  check(a.cols() == b.cols(), "matmul_nt: inner dimensions disagree");
  Mat v = a.val() * b.val().transpose();
  return a.g->make(std::move(v), any_req({a, b}),
                   [a = a.id, b = b.id](Graph& g, std::int32_t self) {
                     const Mat& go = g.node(self).grad;
                     if (g.needs_grad(a)) g.accum(a, go * g.node(b).value);
                     if (g.needs_grad(b)) g.accum(b, go.transpose() * g.node(a).value);
                   });
}

Var add(Var a, Var b) {
  check(same_graph(a, b), "add: graph mismatch");
  check(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  Mat v = a.val() + b.val();
  return a.g->make(std::move(v), any_req({a, b}),
                   [a = a.id, b = b.id](Graph& g, std::int32_t self) {
                     const Mat& go = g.node(self).grad;
                     g.accum(a, go);
                     g.accum(b, go);
                   });
}

Var sub(Var a, Var b) {
  check(same_graph(a, b), "sub: graph mismatch");
  check(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  Mat v = a.val() - b.val();
  return a.g->make(std::move(v), any_req({a, b}),
                   [a = a.id, b = b.id](Graph& g, std::int32_t self) {
                     const Mat& go = g.node(self).grad;
                     g.accum(a, go);
                     g.accum(b, -go);
                   });
}

Var cmul(Var a, Var b) {
  check(same_graph(a, b), "cmul: graph mismatch");
  check(a.rows() == b.rows() && a.cols() == b.cols(), "cmul: shape mismatch");
  Mat v = a.val().cwiseProduct(b.val());
  return a.g->make(std::move(v), any_req({a, b}),
                   [a = a.id, b = b.id](Graph& g, std::int32_t self) {
                     const Mat& go = g.node(self).grad;
                     if (g.needs_grad(a)) g.accum(a, go.cwiseProduct(g.node(b).value));
                     if (g.needs_grad(b)) g.accum(b, go.cwiseProduct(g.node(a).value));
                   });
}

Var scale(Var a, double s) {
  Mat v = a.val() * s;
  return a.g->make(std::move(v), any_req({a}), [a = a.id, s](Graph& g, std::int32_t self) {
    g.accum(a, g.node(self).grad * s);
  });
}

Var add_scalar(Var a, double s) {
  Mat v = a.val().array() + s;
  return a.g->make(std::move(v), any_req({a}), [a = a.id](Graph& g, std::int32_t self) {
    g.accum(a, g.node(self).grad);
  });
}

Var one_minus(Var a) {
  Mat v = 1.0 - a.val().array();
  return a.g->make(std::move(v), any_req({a}), [a = a.id](Graph& g, std::int32_t self) {
    g.accum(a, -g.node(self).grad);
  });
}

Var add_rowvec(Var a, Var rv) {
  check(same_graph(a, rv), "add_rowvec: graph mismatch");
  check(rv.rows() == 1 && rv.cols() == a.cols(), "add_rowvec: shape mismatch");
  Mat v = a.val().rowwise() + rv.val().row(0);
  return a.g->make(std::move(v), any_req({a, rv}),
                   [a = a.id, r = rv.id](Graph& g, std::int32_t self) {
                     const Mat& go = g.node(self).grad;
                     g.accum(a, go);
                     if (g.needs_grad(r)) g.accum(r, go.colwise().sum());
                   });
}

Var sub_rowvec(Var a, Var rv) {
  check(same_graph(a, rv), "sub_rowvec: graph mismatch");
  check(rv.rows() == 1 && rv.cols() == a.cols(), "sub_rowvec: shape mismatch");
  Mat v = a.val().rowwise() - rv.val().row(0);
  return a.g->make(std::move(v), any_req({a, rv}),
                   [a = a.id, r = rv.id](Graph& g, std::int32_t self) {
                     const Mat& go = g.node(self).grad;
                     g.accum(a, go);
                     if (g.needs_grad(r)) g.accum(r, -go.colwise().sum());
                   });
}

Var mul_rowvec(Var a, Var rv) {
  check(same_graph(a, rv), "mul_rowvec: graph mismatch");
  check(rv.rows() == 1 && rv.cols() == a.cols(), "mul_rowvec: shape mismatch");
  Mat v = a.val().array().rowwise() * rv.val().row(0).array();
  return a.g->make(
      std::move(v), any_req({a, rv}), [a = a.id, r = rv.id](Graph& g, std::int32_t self) {
        const Mat& go = g.node(self).grad;
        if (g.needs_grad(a))
          g.accum(a, (go.array().rowwise() * g.node(r).value.row(0).array()).matrix());
        if (g.needs_grad(r))
          g.accum(r, go.cwiseProduct(g.node(a).value).colwise().sum());
      });
}

Var rowvec_broadcast(Var rv, Eigen::Index n_rows) {
  check(rv.rows() == 1, "rowvec_broadcast: input must be 1 x c");
  Mat v = rv.val().replicate(n_rows, 1);
  return rv.g->make(std::move(v), any_req({rv}), [r = rv.id](Graph& g, std::int32_t self) {
    g.accum(r, g.node(self).grad.colwise().sum());
  });
}

Var colwise_mean(Var a) {
  check(a.rows() > 0, "colwise_mean: empty input");
  const double n = static_cast<double>(a.rows());
  Mat v = a.val().colwise().mean();
  return a.g->make(std::move(v), any_req({a}), [a = a.id, n](Graph& g, std::int32_t self) {
    const Mat& go = g.node(self).grad;
    g.accum(a, (go / n).replicate(g.node(a).value.rows(), 1));
  });
}

Var rowwise_scale(Var a, Var col) {
  check(same_graph(a, col), "rowwise_scale: graph mismatch");
  check(col.cols() == 1 && col.rows() == a.rows(), "rowwise_scale: shape mismatch");
  Mat v = a.val().array().colwise() * col.val().col(0).array();
  return a.g->make(
      std::move(v), any_req({a, col}), [a = a.id, c = col.id](Graph& g, std::int32_t self) {
        const Mat& go = g.node(self).grad;
        if (g.needs_grad(a))
          g.accum(a, (go.array().colwise() * g.node(c).value.col(0).array()).matrix());
        if (g.needs_grad(c)) g.accum(c, go.cwiseProduct(g.node(a).value).rowwise().sum());
      });
}

Var rowwise_scale_const(Var a, const Eigen::VectorXd& c) {
  check(c.size() == a.rows(), "rowwise_scale_const: shape mismatch");
  Mat v = a.val().array().colwise() * c.array();
  return a.g->make(std::move(v), any_req({a}), [a = a.id, c](Graph& g, std::int32_t self) {
    g.accum(a, (g.node(self).grad.array().colwise() * c.array()).matrix());
  });
}

Var concat_cols(Var a, Var b) {
  check(same_graph(a, b), "concat_cols: graph mismatch");
  check(a.rows() == b.rows(), "concat_cols: row count mismatch");
  Mat v(a.rows(), a.cols() + b.cols());
  v.leftCols(a.cols()) = a.val();
  v.rightCols(b.cols()) = b.val();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return a.g->make(std::move(v), any_req({a, b}),
                   [a = a.id, b = b.id, ca, cb](Graph& g, std::int32_t self) {
                     const Mat& go = g.node(self).grad;
                     if (g.needs_grad(a)) g.accum(a, go.leftCols(ca));
                     if (g.needs_grad(b)) g.accum(b, go.rightCols(cb));
                   });
}

Var slice_cols(Var a, Eigen::Index j0, Eigen::Index n) {
  check(j0 >= 0 && n >= 0 && j0 + n <= a.cols(), "slice_cols: out of range");
  Mat v = a.val().middleCols(j0, n);
  return a.g->make(std::move(v), any_req({a}), [a = a.id, j0, n](Graph& g, std::int32_t self) {
    Node& pa = g.node(a);
    if (!pa.grad_alloc) {
      pa.grad = Mat::Zero(pa.value.rows(), pa.value.cols());
      pa.grad_alloc = true;
    }
    pa.grad.middleCols(j0, n) += g.node(self).grad;
  });
}

Var gather_rows(Var a, IdxVec idx) {
  const Eigen::Index n = static_cast<Eigen::Index>(idx->size());
  Mat v(n, a.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::int32_t r = (*idx)[static_cast<std::size_t>(i)];
    check(r >= 0 && r < a.rows(), "gather_rows: index out of range");
    v.row(i) = a.val().row(r);
  }
  return a.g->make(std::move(v), any_req({a}), [a = a.id, idx](Graph& g, std::int32_t self) {
    const Mat& go = g.node(self).grad;
    Node& pa = g.node(a);
    if (!pa.grad_alloc) {
      pa.grad = Mat::Zero(pa.value.rows(), pa.value.cols());
      pa.grad_alloc = true;
    }
    for (Eigen::Index i = 0; i < go.rows(); ++i)
      pa.grad.row((*idx)[static_cast<std::size_t>(i)]) += go.row(i);
  });
}

Var scatter_sum_rows(Var a, IdxVec idx, Eigen::Index out_rows) {
  check(static_cast<Eigen::Index>(idx->size()) == a.rows(),
        "scatter_sum_rows: one index per input row required");
  Mat v = Mat::Zero(out_rows, a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const std::int32_t r = (*idx)[static_cast<std::size_t>(i)];
    check(r >= 0 && r < out_rows, "scatter_sum_rows: index out of range");
    v.row(r) += a.val().row(i);
  }
  return a.g->make(std::move(v), any_req({a}), [a = a.id, idx](Graph& g, std::int32_t self) {
    const Mat& go = g.node(self).grad;
    const Eigen::Index n = g.node(a).value.rows();
    Mat da(n, go.cols());
    for (Eigen::Index i = 0; i < n; ++i) da.row(i) = go.row((*idx)[static_cast<std::size_t>(i)]);
    g.accum(a, da);
  });
}

Var gather_cols_per_row(Var a, IdxVec cols) {
  check(static_cast<Eigen::Index>(cols->size()) == a.rows(),
        "gather_cols_per_row: one column per row required");
  Mat v(a.rows(), 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const std::int32_t c = (*cols)[static_cast<std::size_t>(i)];
    check(c >= 0 && c < a.cols(), "gather_cols_per_row: column out of range");
    v(i, 0) = a.val()(i, c);
  }
  return a.g->make(std::move(v), any_req({a}), [a = a.id, cols](Graph& g, std::int32_t self) {
    const Mat& go = g.node(self).grad;
    Node& pa = g.node(a);
    if (!pa.grad_alloc) {
      pa.grad = Mat::Zero(pa.value.rows(), pa.value.cols());
      pa.grad_alloc = true;
    }
    for (Eigen::Index i = 0; i < go.rows(); ++i)
      pa.grad(i, (*cols)[static_cast<std::size_t>(i)]) += go(i, 0);
  });
}

Var group_mean_rows(Var a, std::shared_ptr<const std::vector<std::vector<std::int32_t>>> groups) {
  const Eigen::Index ng = static_cast<Eigen::Index>(groups->size());
  Mat v = Mat::Zero(ng, a.cols());
  for (Eigen::Index gi = 0; gi < ng; ++gi) {
    const auto& grp = (*groups)[static_cast<std::size_t>(gi)];
    if (grp.empty()) continue;
    for (std::int32_t r : grp) {
      check(r >= 0 && r < a.rows(), "group_mean_rows: index out of range");
      v.row(gi) += a.val().row(r);
    }
    v.row(gi) /= static_cast<double>(grp.size());
  }
  return a.g->make(std::move(v), any_req({a}), [a = a.id, groups](Graph& g, std::int32_t self) {
    const Mat& go = g.node(self).grad;
    Node& pa = g.node(a);
    if (!pa.grad_alloc) {
      pa.grad = Mat::Zero(pa.value.rows(), pa.value.cols());
      pa.grad_alloc = true;
    }
    for (std::size_t gi = 0; gi < groups->size(); ++gi) {
      const auto& grp = (*groups)[gi];
      if (grp.empty()) continue;
      const double inv = 1.0 / static_cast<double>(grp.size());
      for (std::int32_t r : grp)
        pa.grad.row(r) += go.row(static_cast<Eigen::Index>(gi)) * inv;
    }
  });
}

Var sigmoid(Var a) {
  Mat v = a.val().unaryExpr([](double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  return a.g->make(std::move(v), any_req({a}), [a = a.id](Graph& g, std::int32_t self) {
    const Mat& y = g.node(self).value;
    g.accum(a, g.node(self).grad.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var tanh_v(Var a) {
  Mat v = a.val().array().tanh();
  return a.g->make(std::move(v), any_req({a}), [a = a.id](Graph& g, std::int32_t self) {
    const Mat& y = g.node(self).value;
    g.accum(a, (g.node(self).grad.array() * (1.0 - y.array().square())).matrix());
  });
}

Var cos_v(Var a) {
  Mat v = a.val().array().cos();
  return a.g->make(std::move(v), any_req({a}), [a = a.id](Graph& g, std::int32_t self) {
    g.accum(a, (-g.node(self).grad.array() * g.node(a).value.array().sin()).matrix());
  });
}

Var relu(Var a) {
  Mat v = a.val().cwiseMax(0.0);
  return a.g->make(std::move(v), any_req({a}), [a = a.id](Graph& g, std::int32_t self) {
    const Mat mask = (g.node(a).value.array() > 0.0).cast<double>();
    g.accum(a, g.node(self).grad.cwiseProduct(mask));
  });
}

Var log_v(Var a) {
  check((a.val().array() > 0.0).all(), "log_v: inputs must be positive");
  Mat v = a.val().array().log();
  return a.g->make(std::move(v), any_req({a}), [a = a.id](Graph& g, std::int32_t self) {
    g.accum(a, (g.node(self).grad.array() / g.node(a).value.array()).matrix());
  });
}

Var rrelu(Var a, double lo, double hi) {
  Mat slopes;
  if (a.g->training()) {
    std::uniform_real_distribution<double> dist(lo, hi);
    slopes.resize(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j)
        slopes(i, j) = a.val()(i, j) >= 0.0 ? 1.0 : dist(a.g->rng());
  } else {
    const double mid = 0.5 * (lo + hi);
    slopes = a.val().unaryExpr([mid](double x) { return x >= 0.0 ? 1.0 : mid; });
  }
  Mat v = a.val().cwiseProduct(slopes);
  auto sl = std::make_shared<Mat>(std::move(slopes));
  return a.g->make(std::move(v), any_req({a}), [a = a.id, sl](Graph& g, std::int32_t self) {
    g.accum(a, g.node(self).grad.cwiseProduct(*sl));
  });
}

Var dropout(Var a, double rate) {
  if (!a.g->training() || rate <= 0.0) return a;
  check(rate < 1.0, "dropout: rate must be < 1");
  const double keep = 1.0 - rate;
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Mat mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      mask(i, j) = dist(a.g->rng()) < keep ? 1.0 / keep : 0.0;
  Mat v = a.val().cwiseProduct(mask);
  auto mk = std::make_shared<Mat>(std::move(mask));
  return a.g->make(std::move(v), any_req({a}), [a = a.id, mk](Graph& g, std::int32_t self) {
    g.accum(a, g.node(self).grad.cwiseProduct(*mk));
  });
}

Var softmax_rows(Var a) {
  Mat v(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double mx = a.val().row(i).maxCoeff();
    Eigen::RowVectorXd e = (a.val().row(i).array() - mx).exp();
    v.row(i) = e / e.sum();
  }
  return a.g->make(std::move(v), any_req({a}), [a = a.id](Graph& g, std::int32_t self) {
    const Mat& y = g.node(self).value;
    const Mat& go = g.node(self).grad;
    Mat da(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double dot = go.row(i).dot(y.row(i));
      da.row(i) = y.row(i).cwiseProduct((go.row(i).array() - dot).matrix());
    }
    g.accum(a, da);
  });
}

Var log_softmax_rows(Var a) {
  Mat v(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double mx = a.val().row(i).maxCoeff();
    const double lse = std::log((a.val().row(i).array() - mx).exp().sum()) + mx;
    v.row(i) = a.val().row(i).array() - lse;
  }
  return a.g->make(std::move(v), any_req({a}), [a = a.id](Graph& g, std::int32_t self) {
    const Mat& y = g.node(self).value;
    const Mat& go = g.node(self).grad;
    Mat da(y.rows(), y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double s = go.row(i).sum();
      da.row(i) = go.row(i) - s * y.row(i).array().exp().matrix();
    }
    g.accum(a, da);
  });
}

Var l2_normalize_rows(Var a, double eps) {
  Mat v(a.rows(), a.cols());
  Eigen::VectorXd norms(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double n = a.val().row(i).norm();
    if (n < eps) {
      n = eps;
      ++a.g->eps_normalizations;
    }
    norms(i) = n;
    v.row(i) = a.val().row(i) / n;
  }
  auto nm = std::make_shared<Eigen::VectorXd>(std::move(norms));
  return a.g->make(std::move(v), any_req({a}), [a = a.id, nm, eps](Graph& g, std::int32_t self) {
    const Mat& x = g.node(a).value;
    const Mat& go = g.node(self).grad;
    Mat da(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double n = (*nm)(i);
      if (x.row(i).norm() < eps) {
        da.row(i) = go.row(i) / n;  // clamped: the norm is a constant here
      } else {
        const double dot = go.row(i).dot(x.row(i));
        da.row(i) = go.row(i) / n - x.row(i) * (dot / (n * n * n));
      }
    }
    g.accum(a, da);
  });
}

Var sum_all(Var a) {
  Mat v(1, 1);
  v(0, 0) = a.val().sum();
  return a.g->make(std::move(v), any_req({a}), [a = a.id](Graph& g, std::int32_t self) {
    const double go = g.node(self).grad(0, 0);
    g.accum(a, Mat::Constant(g.node(a).value.rows(), g.node(a).value.cols(), go));
  });
}

Var batchnorm_channels(Var a, Eigen::Index channels, Var gamma, Var beta, Parameter& running_mean,
                       Parameter& running_var, double momentum, double eps) {
  check(same_graph(a, gamma) && same_graph(a, beta), "batchnorm: graph mismatch");
  check(a.cols() % channels == 0, "batchnorm: columns not divisible by channel count");
  check(gamma.rows() == 1 && gamma.cols() == channels, "batchnorm: gamma shape");
  check(beta.rows() == 1 && beta.cols() == channels, "batchnorm: beta shape");
  const Eigen::Index L = a.cols() / channels;
  const Eigen::Index n = a.rows();
  const double cnt = static_cast<double>(n * L);

  const bool train = a.g->training();
  if (train && cnt < 2.0) {
    // Degenerate batch: affine map only, no normalization.
    Mat v(n, a.cols());
    for (Eigen::Index c = 0; c < channels; ++c)
      v.middleCols(c * L, L) = a.val().middleCols(c * L, L) * gamma.val()(0, c) +
                               Mat::Constant(n, L, beta.val()(0, c));
    return a.g->make(std::move(v), any_req({a, gamma, beta}),
                     [a = a.id, ga = gamma.id, be = beta.id, L, channels](Graph& g,
                                                                          std::int32_t self) {
                       const Mat& go = g.node(self).grad;
                       const Mat& x = g.node(a).value;
                       Mat dg = Mat::Zero(1, channels), db = Mat::Zero(1, channels);
                       Mat da(x.rows(), x.cols());
                       for (Eigen::Index c = 0; c < channels; ++c) {
                         const auto dy = go.middleCols(c * L, L);
                         dg(0, c) = dy.cwiseProduct(x.middleCols(c * L, L)).sum();
                         db(0, c) = dy.sum();
                         da.middleCols(c * L, L) = dy * g.node(ga).value(0, c);
                       }
                       if (g.needs_grad(ga)) g.accum(ga, dg);
                       if (g.needs_grad(be)) g.accum(be, db);
                       if (g.needs_grad(a)) g.accum(a, da);
                     });
  }
  Mat xhat(n, a.cols());
  Eigen::VectorXd inv_std(channels);
  Eigen::VectorXd mean_c(channels);
  if (train) {
    for (Eigen::Index c = 0; c < channels; ++c) {
      const auto block = a.val().middleCols(c * L, L);
      const double mu = block.sum() / cnt;
      const double var = (block.array() - mu).square().sum() / cnt;
      mean_c(c) = mu;
      inv_std(c) = 1.0 / std::sqrt(var + eps);
      xhat.middleCols(c * L, L) = (block.array() - mu) * inv_std(c);
      // Running statistics use the unbiased variance, updated out-of-band.
      const double var_unbiased = cnt > 1.0 ? var * cnt / (cnt - 1.0) : var;
      running_mean.value(0, c) = (1.0 - momentum) * running_mean.value(0, c) + momentum * mu;
      running_var.value(0, c) = (1.0 - momentum) * running_var.value(0, c) + momentum * var_unbiased;
    }
  } else {
    for (Eigen::Index c = 0; c < channels; ++c) {
      const double mu = running_mean.value(0, c);
      inv_std(c) = 1.0 / std::sqrt(running_var.value(0, c) + eps);
      mean_c(c) = mu;
      xhat.middleCols(c * L, L) = (a.val().middleCols(c * L, L).array() - mu) * inv_std(c);
    }
  }
  Mat v(n, a.cols());
  for (Eigen::Index c = 0; c < channels; ++c)
    v.middleCols(c * L, L) =
        xhat.middleCols(c * L, L) * gamma.val()(0, c) + Mat::Constant(n, L, beta.val()(0, c));

  auto xh = std::make_shared<Mat>(std::move(xhat));
  auto istd = std::make_shared<Eigen::VectorXd>(std::move(inv_std));
  return a.g->make(
      std::move(v), any_req({a, gamma, beta}),
      [a = a.id, ga = gamma.id, be = beta.id, xh, istd, L, channels, cnt,
       train](Graph& g, std::int32_t self) {
        const Mat& go = g.node(self).grad;
        const Mat& gamma_v = g.node(ga).value;
        Mat dg = Mat::Zero(1, channels), db = Mat::Zero(1, channels);
        Mat da;
        if (g.needs_grad(a)) da = Mat::Zero(go.rows(), go.cols());
        for (Eigen::Index c = 0; c < channels; ++c) {
          const auto dy = go.middleCols(c * L, L);
          const auto xb = xh->middleCols(c * L, L);
          dg(0, c) = dy.cwiseProduct(xb).sum();
          db(0, c) = dy.sum();
          if (g.needs_grad(a)) {
            const double gam = gamma_v(0, c);
            if (train) {
              const double mean_dy = db(0, c) / cnt;
              const double mean_dyxh = dg(0, c) / cnt;
              da.middleCols(c * L, L) =
                  gam * (*istd)(c) * (dy.array() - mean_dy - xb.array() * mean_dyxh).matrix();
            } else {
              da.middleCols(c * L, L) = gam * (*istd)(c) * dy;
            }
          }
        }
        if (g.needs_grad(ga)) g.accum(ga, dg);
        if (g.needs_grad(be)) g.accum(be, db);
        if (g.needs_grad(a)) g.accum(a, da);
      });
}

Var conv2x3(Var chan_a, Var chan_b, Var kernels, Var bias) {
  check(same_graph(chan_a, chan_b) && same_graph(chan_a, kernels) && same_graph(chan_a, bias),
        "conv2x3: graph mismatch");
  check(chan_a.rows() == chan_b.rows() && chan_a.cols() == chan_b.cols(),
        "conv2x3: channel shapes disagree");
  check(kernels.cols() == 6, "conv2x3: kernels must be K x 6");
  const Eigen::Index K = kernels.rows();
  check(bias.rows() == 1 && bias.cols() == K, "conv2x3: bias must be 1 x K");
  const Eigen::Index n = chan_a.rows(), d = chan_a.cols();

  auto shift_left = [](const Mat& x) {  // out col j = x col j-1, col 0 zero
    Mat y = Mat::Zero(x.rows(), x.cols());
    if (x.cols() > 1) y.rightCols(x.cols() - 1) = x.leftCols(x.cols() - 1);
    return y;
  };
  auto shift_right = [](const Mat& x) {  // out col j = x col j+1, last col zero
    Mat y = Mat::Zero(x.rows(), x.cols());
    if (x.cols() > 1) y.leftCols(x.cols() - 1) = x.rightCols(x.cols() - 1);
    return y;
  };

  const Mat A = chan_a.val(), B = chan_b.val();
  const Mat AL = shift_left(A), AR = shift_right(A);
  const Mat BL = shift_left(B), BR = shift_right(B);
  Mat v(n, K * d);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto kr = kernels.val().row(k);
    v.middleCols(k * d, d) = kr(0) * AL + kr(1) * A + kr(2) * AR + kr(3) * BL + kr(4) * B +
                             kr(5) * BR + Mat::Constant(n, d, bias.val()(0, k));
  }
  return chan_a.g->make(
      std::move(v), any_req({chan_a, chan_b, kernels, bias}),
      [a = chan_a.id, b = chan_b.id, kn = kernels.id, bi = bias.id, K, d, shift_left,
       shift_right](Graph& g, std::int32_t self) {
        const Mat& go = g.node(self).grad;
        const Mat& A = g.node(a).value;
        const Mat& B = g.node(b).value;
        const Mat AL = shift_left(A), AR = shift_right(A);
        const Mat BL = shift_left(B), BR = shift_right(B);
        Mat da = Mat::Zero(A.rows(), d), db = Mat::Zero(A.rows(), d);
        Mat dk = Mat::Zero(K, 6);
        Mat dbias = Mat::Zero(1, K);
        for (Eigen::Index k = 0; k < K; ++k) {
          const auto dyk = go.middleCols(k * d, d);
          const auto kr = g.node(kn).value.row(k);
          if (g.needs_grad(a))
            da += kr(0) * shift_right(dyk) + kr(1) * dyk + kr(2) * shift_left(dyk);
          if (g.needs_grad(b))
            db += kr(3) * shift_right(dyk) + kr(4) * dyk + kr(5) * shift_left(dyk);
          if (g.needs_grad(kn)) {
            dk(k, 0) = dyk.cwiseProduct(AL).sum();
            dk(k, 1) = dyk.cwiseProduct(A).sum();
            dk(k, 2) = dyk.cwiseProduct(AR).sum();
            dk(k, 3) = dyk.cwiseProduct(BL).sum();
            dk(k, 4) = dyk.cwiseProduct(B).sum();
            dk(k, 5) = dyk.cwiseProduct(BR).sum();
          }
          if (g.needs_grad(bi)) dbias(0, k) = dyk.sum();
        }
        if (g.needs_grad(a)) g.accum(a, da);
        if (g.needs_grad(b)) g.accum(b, db);
        if (g.needs_grad(kn)) g.accum(kn, dk);
        if (g.needs_grad(bi)) g.accum(bi, dbias);
      });
}

Var bce_with_logits_onehot(Var logits, IdxVec truths) {
  check(static_cast<Eigen::Index>(truths->size()) == logits.rows(),
        "bce_with_logits_onehot: one truth per row required");
  const Mat& s = logits.val();
  auto softplus = [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); };
  double loss = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const std::int32_t t = (*truths)[static_cast<std::size_t>(i)];
    check(t >= 0 && t < s.cols(), "bce_with_logits_onehot: truth out of range");
    for (Eigen::Index e = 0; e < s.cols(); ++e) loss += softplus(s(i, e));
    loss -= s(i, t);
  }
  Mat v(1, 1);
  v(0, 0) = loss;
  return logits.g->make(std::move(v), any_req({logits}),
                        [l = logits.id, truths](Graph& g, std::int32_t self) {
                          const double go = g.node(self).grad(0, 0);
                          const Mat& s = g.node(l).value;
                          Mat ds = s.unaryExpr([](double x) {
                            return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                            : std::exp(x) / (1.0 + std::exp(x));
                          });
                          for (Eigen::Index i = 0; i < s.rows(); ++i)
                            ds(i, (*truths)[static_cast<std::size_t>(i)]) -= 1.0;
                          g.accum(l, go * ds);
                        });
}

Var supcon_from_sim(Var sim, std::shared_ptr<const std::vector<std::int32_t>> labels,
                    bool same_view) {
  const Eigen::Index n = sim.rows();
  check(sim.cols() == n, "supcon_from_sim: similarity matrix must be square");
  check(static_cast<Eigen::Index>(labels->size()) == n, "supcon_from_sim: one label per query");
  const Mat& S = sim.val();

  Mat softmax = Mat::Zero(n, n);  // denominator-masked softmax rows, reused in backward
  auto pos_count = std::make_shared<std::vector<double>>(n, 0.0);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
      if (same_view && k == i) continue;
      mx = std::max(mx, S(i, k));
    }
    if (!std::isfinite(mx)) continue;  // n == 1 same-view: no denominator terms
    double z = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (same_view && k == i) continue;
      z += std::exp(S(i, k) - mx);
    }
    const double lse = std::log(z) + mx;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (same_view && k == i) continue;
      softmax(i, k) = std::exp(S(i, k) - lse);
    }
    double acc = 0.0;
    double cnt = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (same_view && j == i) continue;
      if ((*labels)[static_cast<std::size_t>(j)] != (*labels)[static_cast<std::size_t>(i)])
        continue;
      acc += S(i, j) - lse;
      cnt += 1.0;
    }
    (*pos_count)[static_cast<std::size_t>(i)] = cnt;
    if (cnt > 0.0) loss += acc / cnt;
  }
  Mat v(1, 1);
  v(0, 0) = -loss / static_cast<double>(n);

  auto sm = std::make_shared<Mat>(std::move(softmax));
  return sim.g->make(
      std::move(v), any_req({sim}),
      [s = sim.id, labels, sm, pos_count, same_view, n](Graph& g, std::int32_t self) {
        const double go = g.node(self).grad(0, 0);
        Mat ds = Mat::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const double cnt = (*pos_count)[static_cast<std::size_t>(i)];
          if (cnt <= 0.0) continue;
          for (Eigen::Index j = 0; j < n; ++j) {
            if (same_view && j == i) continue;
            double val = (*sm)(i, j);  // in-denominator mass (x 1 = sum over positives / cnt)
            if ((*labels)[static_cast<std::size_t>(j)] == (*labels)[static_cast<std::size_t>(i)])
              val -= 1.0 / cnt;
            ds(i, j) = go * val / static_cast<double>(n);
          }
        }
        g.accum(s, ds);
      });
}

}  // namespace logcl::ad
