// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "unipix/error.hpp"
#include "unipix/rng.hpp"
#include "unipix/tensor.hpp"

namespace unipix {

// Rectified flow on the straight path z(t) = (1 - t) z0 + t z1, with z0 the
// data latent and z1 ~ N(0, I).

template <typename T>
struct FlowState {
    Mat<T> z_t;
    T t = 0;
};

struct SamplerConfig {
    int num_steps = 50;
    std::string scheme = "euler";
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const SamplerConfig&) const = default;
};

namespace detail {

template <typename T>
void require_same_shape(const Mat<T>& a, const Mat<T>& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        fail(ErrorCode::shape_mismatch, std::string(what) + ": shapes " + std::to_string(a.rows()) + "x" +
                                            std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                                            std::to_string(b.cols()) + " differ");
    }
}

}  // namespace detail

template <typename T>
FlowState<T> interpolate(const Mat<T>& z0, const Mat<T>& z1, T t) {
    detail::require_same_shape(z0, z1, "interpolate");
    if (!(t >= T(0) && t <= T(1))) fail(ErrorCode::invalid_argument, "interpolate: t must lie in [0, 1]");
    FlowState<T> s;
    s.t = t;
    // Endpoints are returned verbatim so that they hold bit-exactly.
    if (t == T(0)) {
        s.z_t = z0;
    } else if (t == T(1)) {
        s.z_t = z1;
    } else {
        s.z_t = (T(1) - t) * z0 + t * z1;
    }
    return s;
}

// v* = z1 - z0; deliberately takes no t.
template <typename T>
Mat<T> velocity_target(const Mat<T>& z0, const Mat<T>& z1) {
    detail::require_same_shape(z0, z1, "velocity_target");
    return z1 - z0;
}

// Mean squared error against v*, averaged over every element.
template <typename T>
double flow_loss(const Mat<T>& predicted_v, const Mat<T>& z0, const Mat<T>& z1) {
    detail::require_same_shape(predicted_v, z0, "flow_loss");
    detail::require_same_shape(z0, z1, "flow_loss");
    if (!predicted_v.allFinite() || !z0.allFinite() || !z1.allFinite()) {
        fail(ErrorCode::non_finite, "flow_loss: non-finite input");
    }
    if (predicted_v.size() == 0) return 0.0;
    const auto diff = (predicted_v - (z1 - z0)).template cast<double>();
    return diff.squaredNorm() / static_cast<double>(predicted_v.size());
}

// t ~ U(0, 1)
inline double sample_time(Rng& rng) { return rng.uniform(); }

Mat<float> sample_prior(Rng& rng, Eigen::Index rows, Eigen::Index cols);

using VelocityFn = std::function<Mat<float>(const Mat<float>& z, float t)>;

// Integrates dz/dt = v(z, t) from t = 1 down to t = 0 in num_steps uniform
// Euler steps.
Mat<float> euler_sample(const VelocityFn& model, const Mat<float>& z1, const SamplerConfig& cfg);

}  // namespace unipix
