#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace logcl {

using Mat = Eigen::MatrixXd;

// A named tensor with persistent gradient and optimizer-moment storage.
// Buffers (trainable=false) ride along in checkpoints but are never updated
// by the optimizer (batch-norm running statistics).
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m;
  Mat adam_v;
  bool trainable = true;

  void zero_grad() { grad.setZero(); }
};

enum class Init { Zero, One, XavierUniform };

// Registry of model parameters keyed by module-qualified name. Iteration is
// in sorted name order so optimizer updates and checkpoints are deterministic.
class ParamStore {
 public:
  Parameter& create(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init,
                    std::mt19937_64& rng);
  Parameter& buffer(const std::string& name, Eigen::Index rows, Eigen::Index cols, double fill);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  void zero_grad();
  double grad_norm() const;
  // Rescales all gradients when their global L2 norm exceeds max_norm.
  void clip_grad_norm(double max_norm);

  std::size_t size() const { return params_.size(); }

  template <typename F>
  void for_each(F&& f) {
    for (auto& [name, p] : params_) f(*p);
  }
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& [name, p] : params_) f(*p);
  }

 private:
  std::map<std::string, std::unique_ptr<Parameter>> params_;
};

// Adaptive-moment optimizer over a ParamStore.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& store);
  std::int64_t step_count() const { return t_; }
  void set_step_count(std::int64_t t) { t_ = t; }
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace logcl
