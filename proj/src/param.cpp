#include "logcl/param.hpp"

#include <cmath>
#include <stdexcept>

namespace logcl {

Parameter& ParamStore::create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                              Init init, std::mt19937_64& rng) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value.resize(rows, cols);
  switch (init) {
    case Init::Zero:
      p->value.setZero();
      break;
    case Init::One:
      p->value.setOnes();
      break;
    case Init::XavierUniform: {
      const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) p->value(i, j) = dist(rng);
      break;
    }
  }
  p->grad = Mat::Zero(rows, cols);
  p->adam_m = Mat::Zero(rows, cols);
  p->adam_v = Mat::Zero(rows, cols);
  Parameter& ref = *p;
  params_.emplace(name, std::move(p));
  return ref;
}

Parameter& ParamStore::buffer(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                              double fill) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Mat::Constant(rows, cols, fill);
  p->grad = Mat::Zero(rows, cols);
  p->adam_m = Mat::Zero(rows, cols);
  p->adam_v = Mat::Zero(rows, cols);
  p->trainable = false;
  Parameter& ref = *p;
  params_.emplace(name, std::move(p));
  return ref;
}

Parameter* ParamStore::find(const std::string& name) {
  auto it = params_.find(name);
  return it == params_.end() ? nullptr : it->second.get();
}

const Parameter* ParamStore::find(const std::string& name) const {
  auto it = params_.find(name);
  return it == params_.end() ? nullptr : it->second.get();
}

Parameter& ParamStore::at(const std::string& name) {
  Parameter* p = find(name);
  if (!p) throw std::out_of_range("no such parameter: " + name);
  return *p;
}

void ParamStore::zero_grad() {
  for (auto& [name, p] : params_) p->zero_grad();
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& [name, p] : params_)
    if (p->trainable) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

void ParamStore::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& [name, p] : params_)
      if (p->trainable) p->grad *= scale;
  }
}

void Adam::step(ParamStore& store) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  store.for_each([&](Parameter& p) {
    if (!p.trainable) return;
    p.adam_m = beta1_ * p.adam_m + (1.0 - beta1_) * p.grad;
    p.adam_v = beta2_ * p.adam_v + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    const Mat m_hat = p.adam_m / bc1;
    const Mat v_hat = p.adam_v / bc2;
    p.value.array() -= lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_);
  });
}

}  // namespace logcl
