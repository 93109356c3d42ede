// SPDX-License-Identifier: Apache-2.0
#include "unipix/flow.hpp"

namespace unipix {

void SamplerConfig::validate() const {
    if (num_steps < 1) fail(ErrorCode::config_error, "sampler num_steps must be >= 1");
    if (scheme != "euler") fail(ErrorCode::config_error, "unknown sampler scheme '" + scheme + "'");
}

Mat<float> sample_prior(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Mat<float> z(rows, cols);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = static_cast<float>(rng.normal());
    return z;
}

Mat<float> euler_sample(const VelocityFn& model, const Mat<float>& z1, const SamplerConfig& cfg) {
    cfg.validate();
    const int n = cfg.num_steps;
    // Uniform steps make sum_j dt * v_j == (1 - t_k) * mean(v_0..v_{k-1}), so the
    // state is carried as z1 minus the elapsed time times a running mean. This is
    // the same Euler scheme, but exact when the field is constant.
    Mat<float> z = z1;
    Mat<float> mean_v;
    for (int k = 0; k < n; ++k) {
        const float t = static_cast<float>(1.0 - static_cast<double>(k) / n);
        Mat<float> v = model(z, t);
        detail::require_same_shape(v, z1, "euler_sample");
        if (!v.allFinite()) {
            fail(ErrorCode::non_finite, "euler_sample: non-finite velocity at step " + std::to_string(k));
        }
        if (k == 0) {
            mean_v = std::move(v);
        } else {
            mean_v += (v - mean_v) / static_cast<float>(k + 1);
        }
        const float elapsed = static_cast<float>(static_cast<double>(k + 1) / n);
        z = z1 - elapsed * mean_v;
        if (!z.allFinite()) {
            fail(ErrorCode::non_finite, "euler_sample: non-finite state at step " + std::to_string(k));
        }
    }
    return z;
}

}  // namespace unipix
