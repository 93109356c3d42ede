// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace unipix {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled (AdamW-style)
};

struct AdamState {
    std::vector<float> m;
    std::vector<float> v;
    std::uint64_t step = 0;

    void reset(std::size_t n) {
        m.assign(n, 0.0f);
        v.assign(n, 0.0f);
        step = 0;
    }
    bool operator==(const AdamState&) const = default;
};

inline void adam_update(std::span<float> params, std::span<const float> grads, AdamState& state, const AdamConfig& cfg) {
    if (state.m.size() != params.size()) state.reset(params.size());
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    const float b1 = static_cast<float>(cfg.beta1);
    const float b2 = static_cast<float>(cfg.beta2);
    const float step_size = static_cast<float>(cfg.learning_rate / bc1);
    const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
    const float eps = static_cast<float>(cfg.eps);
    const float decay = static_cast<float>(cfg.learning_rate * cfg.weight_decay);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const float g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0f - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0f - b2) * g * g;
        const float denom = std::sqrt(state.v[i]) * inv_sqrt_bc2 + eps;
        params[i] -= step_size * state.m[i] / denom + decay * params[i];
    }
}

// Scales grads in place so their global L2 norm is at most max_norm; returns
// the norm before clipping.
inline double clip_grad_norm(std::span<float> grads, double max_norm) {
    double sq = 0.0;
    for (float g : grads) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const float s = static_cast<float>(max_norm / (norm + 1e-12));
        for (float& g : grads) g *= s;
    }
    return norm;
}

}  // namespace unipix
