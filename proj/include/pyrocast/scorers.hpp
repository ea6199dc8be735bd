#pragma once

#include <algorithm>

#include "pyrocast/evaluation.hpp"
#include "pyrocast/forest.hpp"
#include "pyrocast/neural.hpp"

namespace pyrocast {

// Wraps a network in the single-sample scoring call. Every payload goes
// through predict_proba itself, not a reimplementation, so spot checks
// against direct calls agree bitwise.
inline Scorer make_scorer(const Model<float>& model) {
    const auto& dims = model.input_dims();
    std::int64_t n = 1;
    for (auto d : dims) n *= d;
    return {dims, [&model, dims, n](const float* payload) {
                Tensor<float> x(dims);
                std::copy(payload, payload + n, x.data());
                return predict_proba(model, x);
            }};
}

inline Scorer make_scorer(const ForestModel& model) {
    return {{model.n_features}, [&model](const float* payload) {
                return predict_proba(model, payload, model.n_features);
            }};
}

}  // namespace pyrocast
