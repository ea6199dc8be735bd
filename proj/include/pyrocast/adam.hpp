#pragma once

#include <cmath>

#include "pyrocast/common.hpp"
#include "pyrocast/tensor.hpp"

namespace pyrocast {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    Tensor<T> m;
    Tensor<T> v;
    std::int64_t step = 0;

    explicit AdamState(const std::vector<std::int64_t>& shape) : m(shape), v(shape) {}
};

// One Adam update. Weight decay enters as an extra gradient term
// 2 * weight_decay * param, applied to weights only; bias tensors pass
// decay_param = false. lr = 0 leaves the parameters bitwise unchanged.
template <typename T>
void adam_step(Tensor<T>& param, const Tensor<T>& grad, AdamState<T>& state, double lr,
               double weight_decay, bool decay_param, const AdamConfig& cfg = {}) {
    if (lr < 0.0) throw parameter_error("adam_step: negative learning rate");
    if (weight_decay < 0.0) throw parameter_error("adam_step: negative weight decay");
    if (!param.same_shape(grad) || !param.same_shape(state.m))
        throw dimension_error("adam_step: parameter/gradient/state shape mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T wd2 = static_cast<T>(2.0 * weight_decay);
    for (std::int64_t i = 0; i < param.size(); ++i) {
        T g = grad[i];
        if (decay_param && weight_decay > 0.0) g += wd2 * param[i];
        state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
        state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
        double mhat = static_cast<double>(state.m[i]) / bc1;
        double vhat = static_cast<double>(state.v[i]) / bc2;
        double upd = lr * mhat / (std::sqrt(vhat) + cfg.eps);
        if (upd != 0.0) param[i] = static_cast<T>(static_cast<double>(param[i]) - upd);
    }
}

}  // namespace pyrocast
