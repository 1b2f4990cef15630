#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "logcl/param.hpp"

namespace logcl::ad {

using Mat = Eigen::MatrixXd;
using logcl::Parameter;

class Graph;

// Handle to a node on a Graph's tape.
struct Var {
  Graph* g = nullptr;
  std::int32_t id = -1;

  bool valid() const { return g != nullptr && id >= 0; }
  const Mat& val() const;
  Eigen::Index rows() const { return val().rows(); }
  Eigen::Index cols() const { return val().cols(); }
};

using BackwardFn = std::function<void(Graph&, std::int32_t self)>;

struct Node {
  Mat value;
  Mat grad;
  bool requires_grad = false;
  bool grad_alloc = false;
  BackwardFn backward;       // empty for leaves/constants
  Parameter* param = nullptr;  // set for leaf nodes
};

// A computation tape. Nodes are appended in evaluation order, so a reverse
// sweep is a valid reverse-topological traversal. One Graph per forward pass;
// it owns no parameters, only references them through leaf nodes.
class Graph {
 public:
  explicit Graph(bool training = false, std::mt19937_64* rng = nullptr, bool enable_grad = true)
      : training_(training), grad_enabled_(enable_grad), rng_(rng) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Mat v);
  // Mounts a parameter's current value as a leaf; its gradient is accumulated
  // into Parameter::grad during backward().
  Var leaf(Parameter& p);

  // Reverse sweep from a 1x1 loss node. May be called once per graph.
  void backward(Var loss);

  bool training() const { return training_; }
  bool grad_enabled() const { return grad_enabled_; }
  std::mt19937_64& rng();

  Node& node(std::int32_t id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t num_nodes() const { return nodes_.size(); }

  Var make(Mat value, bool requires_grad, BackwardFn backward);

  // Gradient accumulation helpers used by backward closures.
  template <typename Expr>
  void accum(std::int32_t id, const Expr& contribution) {
    Node& n = node(id);
    if (!n.requires_grad) return;
    if (!n.grad_alloc) {
      n.grad = Mat::Zero(n.value.rows(), n.value.cols());
      n.grad_alloc = true;
    }
    n.grad += contribution;
  }
  bool needs_grad(std::int32_t id) const { return node(id).requires_grad; }

  // Count of epsilon-guarded row normalizations seen by l2_normalize_rows.
  std::int64_t eps_normalizations = 0;

 private:
  std::deque<Node> nodes_;
  bool training_;
  bool grad_enabled_;
  std::mt19937_64* rng_;
  bool backward_done_ = false;
};

using IdxVec = std::shared_ptr<const std::vector<std::int32_t>>;
IdxVec make_idx(std::vector<std::int32_t> v);

// ---- elementwise / linear algebra ----
Var matmul(Var a, Var b);     // A * B
Var matmul_nt(Var a, Var b);  // A * B^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var cmul(Var a, Var b);  // elementwise product
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var one_minus(Var a);  // 1 - a

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

// ---- broadcasting ----
Var add_rowvec(Var a, Var rv);
Var sub_rowvec(Var a, Var rv);
Var mul_rowvec(Var a, Var rv);
Var rowvec_broadcast(Var rv, Eigen::Index n_rows);
Var colwise_mean(Var a);
Var rowwise_scale(Var a, Var col);                        // row i scaled by col(i)
Var rowwise_scale_const(Var a, const Eigen::VectorXd& c);

// ---- structure ----
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, Eigen::Index j0, Eigen::Index n);
Var gather_rows(Var a, IdxVec idx);
Var scatter_sum_rows(Var a, IdxVec idx, Eigen::Index out_rows);
Var gather_cols_per_row(Var a, IdxVec cols);  // y(i) = a(i, cols[i]), y is n x 1
// Mean of the rows listed in each group; empty groups yield zero rows.
Var group_mean_rows(Var a, std::shared_ptr<const std::vector<std::vector<std::int32_t>>> groups);

// ---- nonlinearities ----
Var sigmoid(Var a);
Var tanh_v(Var a);
Var cos_v(Var a);
Var relu(Var a);
Var log_v(Var a);  // elementwise natural log; inputs must be positive
// Leaky rectifier with randomized negative slope in [lo, hi] during training
// and the deterministic midpoint slope otherwise.
Var rrelu(Var a, double lo = 1.0 / 8.0, double hi = 1.0 / 3.0);
Var dropout(Var a, double rate);

// ---- reductions / normalizations ----
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var l2_normalize_rows(Var a, double eps = 1e-12);
Var sum_all(Var a);  // 1x1

// Batch normalization over channel-major blocks: `a` is n x (C*L) where
// channel c occupies columns [c*L, (c+1)*L). Statistics are taken over the
// n*L entries of each channel. Running buffers are updated in training mode
// and consumed in eval mode. Falls back to the affine map alone when fewer
// than two entries are available per channel.
Var batchnorm_channels(Var a, Eigen::Index channels, Var gamma, Var beta, Parameter& running_mean,
                       Parameter& running_var, double momentum = 0.1, double eps = 1e-5);

// Width-3 convolution over two stacked length-d channels with unit zero
// padding: output column block k*d..(k+1)*d-1 holds kernel k's response.
// kernels is K x 6 (rows: [a0 a1 a2 b0 b1 b2]), bias is 1 x K.
Var conv2x3(Var chan_a, Var chan_b, Var kernels, Var bias);

// Sum over rows of the one-hot binary cross entropy with logits:
// sum_i [ sum_e softplus(s_ie) - s_i,truth_i ]. Numerically stable.
Var bce_with_logits_onehot(Var logits, IdxVec truths);

// Supervised-contrastive loss from a precomputed similarity matrix
// sim(i,k) = anchor_i . candidate_k / tau. For each anchor, positives are the
// candidates sharing its label (the same index included cross-view, excluded
// same-view); the denominator runs over all candidates except the anchor
// itself in the same-view case. Anchors with no positives contribute zero.
Var supcon_from_sim(Var sim, std::shared_ptr<const std::vector<std::int32_t>> labels,
                    bool same_view);

}  // namespace logcl::ad
