#pragma once
// Decoupled-weight-decay Adam and the linear warmup schedule.

#include <cmath>
#include <cstddef>
#include <vector>

#include "kglm/tensor.hpp"

namespace kglm {

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct AdamWState {
    Tensor m;
    Tensor v;
    std::size_t t = 0;
};

// One update on a single parameter tensor. Weight decay is decoupled: it
// shrinks the parameter directly and never enters the moment estimates, so a
// zero gradient with decay > 0 still contracts params by (1 - lr*wd).
inline void adamw_step(Tensor& params, const Tensor& grads, AdamWState& state, const AdamWConfig& cfg) {
    require_same_shape(params, grads, "adamw_step");
    if (state.t == 0) {
        state.m = zeros_like(params);
        state.v = zeros_like(params);
    }
    require_same_shape(params, state.m, "adamw_step state");
    ++state.t;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double g = grads.data[i];
        state.m.data[i] = cfg.beta1 * state.m.data[i] + (1.0 - cfg.beta1) * g;
        state.v.data[i] = cfg.beta2 * state.v.data[i] + (1.0 - cfg.beta2) * g * g;
        double mhat = state.m.data[i] / bc1;
        double vhat = state.v.data[i] / bc2;
        params.data[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * params.data[i]);
    }
}

// lr_t = lr * min(1, t/warmup), t counting from 1.
inline double warmup_factor(std::size_t step, std::size_t warmup_steps) {
    if (warmup_steps == 0) return 1.0;
    double f = static_cast<double>(step) / static_cast<double>(warmup_steps);
    return f < 1.0 ? f : 1.0;
}

}  // namespace kglm
