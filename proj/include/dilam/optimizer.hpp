#pragma once

#include <span>
#include <stdexcept>
#include <unordered_map>

#include "dilam/tensor.hpp"

namespace dilam {

/// SGD with classical momentum: v = m*v + g; w -= lr*v.
/// Only trainable parameters are touched; their gradients are zeroed after
/// the step. Velocity buffers persist across steps, keyed by parameter.
template <typename T>
class SgdT {
  public:
    SgdT(T lr, T momentum = T(0)) : lr_(lr), momentum_(momentum) {
        if (!(lr > T(0))) throw std::invalid_argument("sgd: learning rate must be positive");
        if (momentum < T(0) || momentum >= T(1))
            throw std::invalid_argument("sgd: momentum must be in [0, 1)");
    }

    T lr() const { return lr_; }
    void set_lr(T lr) {
        if (!(lr > T(0))) throw std::invalid_argument("sgd: learning rate must be positive");
        lr_ = lr;
    }
    T momentum() const { return momentum_; }

    void step(std::span<ParameterT<T>* const> params) {
        for (ParameterT<T>* p : params) {
            if (!p->trainable) continue;
            if (momentum_ > T(0)) {
                auto [it, fresh] = velocity_.try_emplace(p, TensorT<T>(p->value.shape()));
                TensorT<T>& v = it->second;
                for (int64_t i = 0; i < v.numel(); ++i) {
                    v[i] = momentum_ * v[i] + p->grad[i];
                    p->value[i] -= lr_ * v[i];
                }
            } else {
                for (int64_t i = 0; i < p->value.numel(); ++i) p->value[i] -= lr_ * p->grad[i];
            }
            p->grad.zero();
        }
    }

    void step(std::vector<ParameterT<T>*>& params) {
        step(std::span<ParameterT<T>* const>(params.data(), params.size()));
    }

  private:
    T lr_;
    T momentum_;
    std::unordered_map<ParameterT<T>*, TensorT<T>> velocity_;
};

using Sgd = SgdT<float>;

/// Elementwise gradient clipping to [-limit, limit]; limit <= 0 disables.
template <typename T>
void clip_gradients(std::span<ParameterT<T>* const> params, T limit) {
    if (!(limit > T(0))) return;
    for (ParameterT<T>* p : params) {
        if (!p->trainable) continue;
        for (int64_t i = 0; i < p->grad.numel(); ++i) {
            if (p->grad[i] > limit) p->grad[i] = limit;
            else if (p->grad[i] < -limit) p->grad[i] = -limit;
        }
    }
}

}  // namespace dilam
