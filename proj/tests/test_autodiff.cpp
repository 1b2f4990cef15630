#include <doctest.h>

#include <random>

#include "logcl/autodiff.hpp"
#include "logcl/gradcheck.hpp"

using namespace logcl;
using namespace logcl::ad;

namespace {

// Materializes a test parameter with fixed pseudo-random entries.
Parameter make_param(const std::string& name, Eigen::Index r, Eigen::Index c, unsigned seed) {
  Parameter p;
  p.name = name;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.9, 0.9);
  p.value.resize(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) p.value(i, j) = dist(rng);
  p.grad = Mat::Zero(r, c);
  return p;
}

void expect_grads_match(const std::vector<Parameter*>& params,
                        const std::function<Var(Graph&)>& loss) {
  auto res = gradcheck(params, loss);
  INFO("worst parameter: " << res.worst_param << " (" << res.worst_row << "," << res.worst_col
                           << ") analytic=" << res.analytic << " numeric=" << res.numeric);
  CHECK(res.max_rel_err < 1e-6);
}

}  // namespace

TEST_CASE("matmul/add/sub/cmul/scale gradients") {
  Parameter a = make_param("a", 3, 4, 1), b = make_param("b", 4, 2, 2),
            c = make_param("c", 3, 2, 3);
  expect_grads_match({&a, &b, &c}, [&](Graph& g) {
    Var va = g.leaf(a), vb = g.leaf(b), vc = g.leaf(c);
    Var m = matmul(va, vb);
    Var s = add(m, vc);
    Var t = sub(s, scale(vc, 0.3));
    Var u = cmul(t, s);
    return sum_all(u);
  });
}

TEST_CASE("matmul_nt matches explicit transpose") {
  Parameter a = make_param("a", 3, 5, 4), b = make_param("b", 2, 5, 5);
  Graph g;
  Mat direct = a.value * b.value.transpose();
  CHECK((matmul_nt(g.leaf(a), g.leaf(b)).val() - direct).norm() == doctest::Approx(0.0));
  expect_grads_match({&a, &b}, [&](Graph& g2) {
    return sum_all(cmul(matmul_nt(g2.leaf(a), g2.leaf(b)), matmul_nt(g2.leaf(a), g2.leaf(b))));
  });
}

TEST_CASE("row-vector broadcast ops") {
  Parameter a = make_param("a", 4, 3, 6), rv = make_param("rv", 1, 3, 7);
  expect_grads_match({&a, &rv}, [&](Graph& g) {
    Var x = add_rowvec(g.leaf(a), g.leaf(rv));
    x = mul_rowvec(x, g.leaf(rv));
    x = sub_rowvec(x, g.leaf(rv));
    Var y = rowvec_broadcast(g.leaf(rv), 4);
    return sum_all(cmul(x, y));
  });
}

TEST_CASE("colwise_mean and one_minus") {
  Parameter a = make_param("a", 5, 3, 8);
  expect_grads_match({&a}, [&](Graph& g) {
    Var m = colwise_mean(g.leaf(a));
    return sum_all(cmul(m, one_minus(m)));
  });
}

TEST_CASE("concat and slicing") {
  Parameter a = make_param("a", 3, 2, 9), b = make_param("b", 3, 4, 10);
  expect_grads_match({&a, &b}, [&](Graph& g) {
    Var cat = concat_cols(g.leaf(a), g.leaf(b));
    Var left = slice_cols(cat, 1, 3);
    return sum_all(cmul(left, left));
  });
}

TEST_CASE("gather and scatter rows are adjoint") {
  Parameter a = make_param("a", 5, 3, 11);
  auto idx = make_idx({4, 0, 0, 2});
  Graph g;
  Var ga = g.leaf(a);
  Var picked = gather_rows(ga, idx);
  CHECK(picked.val().row(1) == a.value.row(0));
  Var spread = scatter_sum_rows(picked, idx, 5);
  // Row 0 receives two copies of itself.
  CHECK(spread.val().row(0) == (2.0 * a.value.row(0)));
  CHECK(spread.val().row(1).isZero());

  expect_grads_match({&a}, [&](Graph& g2) {
    Var x = gather_rows(g2.leaf(a), idx);
    Var y = scatter_sum_rows(x, idx, 5);
    return sum_all(cmul(y, y));
  });
}

TEST_CASE("gather_cols_per_row picks one coefficient per row") {
  Parameter a = make_param("a", 4, 6, 12);
  auto cols = make_idx({5, 1, 0, 3});
  Graph g;
  Var y = gather_cols_per_row(g.leaf(a), cols);
  CHECK(y.val()(0, 0) == a.value(0, 5));
  CHECK(y.val()(3, 0) == a.value(3, 3));
  expect_grads_match({&a}, [&](Graph& g2) {
    Var v = gather_cols_per_row(g2.leaf(a), cols);
    return sum_all(cmul(v, v));
  });
}

TEST_CASE("group_mean_rows averages listed rows and skips empty groups") {
  Parameter a = make_param("a", 6, 3, 13);
  auto groups = std::make_shared<const std::vector<std::vector<std::int32_t>>>(
      std::vector<std::vector<std::int32_t>>{{0, 2, 4}, {}, {5}});
  Graph g;
  Var m = group_mean_rows(g.leaf(a), groups);
  CHECK((m.val().row(0) - (a.value.row(0) + a.value.row(2) + a.value.row(4)) / 3.0).norm() ==
        doctest::Approx(0.0));
  CHECK(m.val().row(1).isZero());
  CHECK(m.val().row(2) == a.value.row(5));
  expect_grads_match({&a}, [&](Graph& g2) {
    Var v = group_mean_rows(g2.leaf(a), groups);
    return sum_all(cmul(v, v));
  });
}

TEST_CASE("rowwise_scale by a learned column") {
  Parameter a = make_param("a", 4, 3, 14), c = make_param("c", 4, 1, 15);
  expect_grads_match({&a, &c}, [&](Graph& g) {
    Var y = rowwise_scale(g.leaf(a), g.leaf(c));
    return sum_all(cmul(y, y));
  });
  Eigen::VectorXd cv(4);
  cv << 2, -1, 0.5, 3;
  expect_grads_match({&a}, [&](Graph& g) {
    Var y = rowwise_scale_const(g.leaf(a), cv);
    return sum_all(cmul(y, y));
  });
}

TEST_CASE("smooth nonlinearities") {
  Parameter a = make_param("a", 3, 4, 16);
  expect_grads_match({&a}, [&](Graph& g) { return sum_all(sigmoid(g.leaf(a))); });
  expect_grads_match({&a}, [&](Graph& g) { return sum_all(tanh_v(g.leaf(a))); });
  expect_grads_match({&a}, [&](Graph& g) { return sum_all(cos_v(g.leaf(a))); });
  expect_grads_match({&a}, [&](Graph& g) {
    Var s = sigmoid(g.leaf(a));
    return sum_all(cmul(s, tanh_v(g.leaf(a))));
  });
}

TEST_CASE("rectifiers use the deterministic slope out of training") {
  Parameter a = make_param("a", 3, 4, 17);  // entries away from 0
  Graph g;
  Var y = rrelu(g.leaf(a));
  const double mid = 0.5 * (1.0 / 8.0 + 1.0 / 3.0);
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double x = a.value(i, j);
      CHECK(y.val()(i, j) == doctest::Approx(x >= 0 ? x : mid * x));
    }
  expect_grads_match({&a}, [&](Graph& g2) { return sum_all(rrelu(g2.leaf(a))); });
  expect_grads_match({&a}, [&](Graph& g2) { return sum_all(cmul(relu(g2.leaf(a)), g2.leaf(a))); });
}

TEST_CASE("rrelu draws random slopes only in training mode") {
  Parameter a = make_param("a", 40, 4, 18);
  std::mt19937_64 rng(5);
  Graph g(/*training=*/true, &rng);
  Var y = rrelu(g.leaf(a));
  bool saw_non_mid = false;
  const double mid = 0.5 * (1.0 / 8.0 + 1.0 / 3.0);
  for (Eigen::Index i = 0; i < a.value.rows(); ++i)
    for (Eigen::Index j = 0; j < a.value.cols(); ++j) {
      const double x = a.value(i, j);
      if (x >= 0) {
        CHECK(y.val()(i, j) == x);
      } else {
        const double slope = y.val()(i, j) / x;
        CHECK(slope >= 1.0 / 8.0);
        CHECK(slope <= 1.0 / 3.0);
        if (std::abs(slope - mid) > 1e-6) saw_non_mid = true;
      }
    }
  CHECK(saw_non_mid);
}

TEST_CASE("dropout is identity in eval and inverted-scaled in training") {
  Parameter a = make_param("a", 30, 10, 19);
  {
    Graph g;
    Var y = dropout(g.leaf(a), 0.5);
    CHECK(y.val() == a.value);
  }
  std::mt19937_64 rng(6);
  Graph g(true, &rng);
  Var y = dropout(g.leaf(a), 0.5);
  int zeros = 0, kept = 0;
  for (Eigen::Index i = 0; i < a.value.rows(); ++i)
    for (Eigen::Index j = 0; j < a.value.cols(); ++j) {
      if (y.val()(i, j) == 0.0)
        ++zeros;
      else {
        CHECK(y.val()(i, j) == doctest::Approx(2.0 * a.value(i, j)));
        ++kept;
      }
    }
  CHECK(zeros > 50);
  CHECK(kept > 50);
}

TEST_CASE("softmax and log_softmax rows") {
  Parameter a = make_param("a", 4, 6, 20);
  Graph g;
  Var sm = softmax_rows(g.leaf(a));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(sm.val().row(i).sum() == doctest::Approx(1.0));
  Var lsm = log_softmax_rows(g.leaf(a));
  CHECK((lsm.val().array().exp().matrix() - sm.val()).norm() < 1e-12);

  Parameter w = make_param("w", 4, 6, 21);
  expect_grads_match({&a, &w}, [&](Graph& g2) {
    return sum_all(cmul(softmax_rows(g2.leaf(a)), g2.leaf(w)));
  });
}

TEST_CASE("log_softmax gradients") {
  Parameter a = make_param("a", 3, 5, 22), m = make_param("m", 3, 5, 23);
  expect_grads_match({&a, &m}, [&](Graph& g) {
    return sum_all(cmul(log_softmax_rows(g.leaf(a)), g.leaf(m)));
  });
}

TEST_CASE("l2_normalize_rows yields unit rows and correct gradients") {
  Parameter a = make_param("a", 4, 5, 24);
  Graph g;
  Var y = l2_normalize_rows(g.leaf(a));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(y.val().row(i).norm() == doctest::Approx(1.0));
  CHECK(g.eps_normalizations == 0);
  expect_grads_match({&a}, [&](Graph& g2) {
    Var v = l2_normalize_rows(g2.leaf(a));
    return sum_all(cmul(v, sigmoid(v)));
  });
}

TEST_CASE("l2_normalize_rows guards zero rows and flags them") {
  Parameter a = make_param("a", 2, 3, 25);
  a.value.row(1).setZero();
  Graph g;
  Var y = l2_normalize_rows(g.leaf(a), 1e-12);
  CHECK(y.val().row(1).isZero());
  CHECK(g.eps_normalizations == 1);
}

TEST_CASE("batchnorm_channels normalizes per channel and backpropagates") {
  Parameter a = make_param("a", 6, 8, 26);  // 2 channels x length 4
  Parameter gamma = make_param("gamma", 1, 2, 27), beta = make_param("beta", 1, 2, 28);
  Parameter rm, rv;
  rm.value = Mat::Zero(1, 2);
  rv.value = Mat::Ones(1, 2);

  std::mt19937_64 rng(9);
  {
    Graph g(true, &rng);
    Var y = batchnorm_channels(g.leaf(a), 2, g.leaf(gamma), g.leaf(beta), rm, rv);
    for (Eigen::Index c = 0; c < 2; ++c) {
      const auto block = y.val().middleCols(c * 4, 4);
      const double mu = block.sum() / 24.0;
      CHECK(mu == doctest::Approx(beta.value(0, c)).epsilon(1e-9));
    }
    CHECK(rm.value(0, 0) != 0.0);  // running stats updated
  }

  // Gradcheck runs in eval mode against frozen running statistics.
  expect_grads_match({&a, &gamma, &beta}, [&](Graph& g) {
    Var y = batchnorm_channels(g.leaf(a), 2, g.leaf(gamma), g.leaf(beta), rm, rv);
    return sum_all(cmul(y, y));
  });
}

TEST_CASE("batchnorm training-mode gradients via a training graph") {
  Parameter a = make_param("a", 5, 6, 29);
  Parameter gamma = make_param("gamma", 1, 3, 30), beta = make_param("beta", 1, 3, 31);
  Parameter rm, rv;
  rm.value = Mat::Zero(1, 3);
  rv.value = Mat::Ones(1, 3);
  for (Parameter* p : {&a, &gamma, &beta}) p->zero_grad();
  auto build = [&](Graph& g) {
    Var y = batchnorm_channels(g.leaf(a), 3, g.leaf(gamma), g.leaf(beta), rm, rv);
    return sum_all(cmul(y, sigmoid(y)));
  };
  {
    Graph g(true, nullptr, true);
    g.backward(build(g));
  }
  const double h = 1e-6;
  double max_rel = 0.0;
  for (Parameter* p : {&a, &gamma, &beta}) {
    for (Eigen::Index i = 0; i < p->value.rows(); ++i)
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
        const double saved = p->value(i, j);
        p->value(i, j) = saved + h;
        Graph gp(true, nullptr, false);
        const double lp = build(gp).val()(0, 0);
        p->value(i, j) = saved - h;
        Graph gm(true, nullptr, false);
        const double lm = build(gm).val()(0, 0);
        p->value(i, j) = saved;
        const double num = (lp - lm) / (2 * h);
        const double rel = std::abs(num - p->grad(i, j)) /
                           std::max({std::abs(num), std::abs(p->grad(i, j)), 1e-3});
        max_rel = std::max(max_rel, rel);
      }
  }
  CHECK(max_rel < 1e-5);
}

TEST_CASE("conv2x3 matches a naive sliding-window oracle") {
  Parameter a = make_param("a", 3, 5, 32), b = make_param("b", 3, 5, 33);
  Parameter k = make_param("k", 4, 6, 34), bias = make_param("bias", 1, 4, 35);
  Graph g;
  Var out = conv2x3(g.leaf(a), g.leaf(b), g.leaf(k), g.leaf(bias));
  REQUIRE(out.val().cols() == 20);
  auto at = [&](const Mat& m, Eigen::Index r, Eigen::Index c) {
    return (c < 0 || c >= m.cols()) ? 0.0 : m(r, c);
  };
  for (Eigen::Index q = 0; q < 3; ++q)
    for (Eigen::Index kk = 0; kk < 4; ++kk)
      for (Eigen::Index j = 0; j < 5; ++j) {
        double expect = bias.value(0, kk);
        for (int w = 0; w < 3; ++w) {
          expect += k.value(kk, w) * at(a.value, q, j + w - 1);
          expect += k.value(kk, 3 + w) * at(b.value, q, j + w - 1);
        }
        CHECK(out.val()(q, kk * 5 + j) == doctest::Approx(expect).epsilon(1e-12));
      }
  expect_grads_match({&a, &b, &k, &bias}, [&](Graph& g2) {
    Var y = conv2x3(g2.leaf(a), g2.leaf(b), g2.leaf(k), g2.leaf(bias));
    return sum_all(cmul(y, sigmoid(y)));
  });
}

TEST_CASE("grad does not flow through constants") {
  Parameter a = make_param("a", 2, 2, 36);
  a.zero_grad();
  Graph g;
  Var c = g.constant(Mat::Ones(2, 2));
  Var y = cmul(g.leaf(a), c);
  g.backward(sum_all(y));
  CHECK(a.grad == Mat::Ones(2, 2));
}

TEST_CASE("backward accumulates into reused leaves") {
  Parameter a = make_param("a", 2, 3, 37);
  a.zero_grad();
  Graph g;
  Var va = g.leaf(a);
  Var y = add(va, va);  // dy/da = 2
  g.backward(sum_all(y));
  CHECK(a.grad == Mat::Constant(2, 3, 2.0));
}
