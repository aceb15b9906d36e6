#pragma once

#include <cmath>

#include "ogp/nn/layers.hpp"

namespace ogp::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

// Adam with bias correction over a fixed parameter list.
template <typename T>
class Adam {
 public:
  Adam(ParamList<T> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    slots_.reserve(params_.size());
    for (const auto& p : params_) slots_.push_back(Slot{Tensor<T>(p.value->shape()), Tensor<T>(p.value->shape())});
  }

  void zero_grad() {
    for (auto& p : params_) p.grad->zero();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor<T>& w = *params_[k].value;
      Tensor<T>& g = *params_[k].grad;
      Tensor<T>& m = slots_[k].m;
      Tensor<T>& v = slots_[k].v;
      for (std::int64_t i = 0; i < w.size(); ++i) {
        const double gi = static_cast<double>(g[i]);
        const double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * gi;
        const double vi = cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        w[i] -= static_cast<T>(cfg_.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps));
      }
    }
  }

  const ParamList<T>& params() const { return params_; }

 private:
  struct Slot {
    Tensor<T> m, v;
  };
  ParamList<T> params_;
  std::vector<Slot> slots_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace ogp::nn
