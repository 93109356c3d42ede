// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures for the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "unipix/backbone.hpp"
#include "unipix/config.hpp"
#include "unipix/flow.hpp"
#include "unipix/rng.hpp"

namespace unipix::testing {

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("unipix_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Depth-1, width-8 backbone on a 16x16x3 canvas with patch 4.
inline ModelConfig tiny_model_config() {
    ModelConfig cfg;
    cfg.width = 8;
    cfg.depth = 1;
    cfg.encoder_depth = 1;
    cfg.heads = 2;
    cfg.patch_size = 4;
    cfg.time_embed_dim = 8;
    cfg.cond_tokens = 16;
    cfg.mlp_ratio = 2;
    return cfg;
}
inline ImageShape tiny_canvas() { return {16, 16, 3}; }
inline LatentLayout tiny_latent() { return {4, 4, 48}; }

// Small but complete run config on the default 64x64 canvas, for tests
// that need real captions.
inline RunConfig small_run_config() {
    RunConfig cfg;
    cfg.model.width = 32;
    cfg.model.depth = 1;
    cfg.model.encoder_depth = 1;
    cfg.model.heads = 2;
    cfg.model.time_embed_dim = 16;
    cfg.model.mlp_ratio = 2;
    cfg.train.steps = 20;
    cfg.train.batch_size = 4;
    cfg.train.checkpoint_every = 0;
    cfg.sampler.num_steps = 4;
    return cfg;
}

inline PixelImage random_image(ImageShape shape, Rng& rng) {
    PixelImage img(shape, 0.0f);
    for (float& v : img.data()) v = static_cast<float>(2.0 * rng.uniform() - 1.0);
    return img;
}

// Replaces each pixel, with probability `fraction`, by a uniformly random
// colour.
inline PixelImage add_pixel_noise(const PixelImage& img, double fraction, Rng& rng) {
    PixelImage out = img;
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            if (rng.uniform() < fraction)
                for (int c = 0; c < out.channels(); ++c) out.at(y, x, c) = static_cast<float>(2.0 * rng.uniform() - 1.0);
    return out;
}

template <typename T>
Mat<T> random_mat(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    Mat<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.normal() * scale);
    return m;
}

// Batch of conditioning images, directions, latents and times for a
// gradient check of the flow loss.
struct FlowBatch {
    std::vector<PixelImage> images;
    std::vector<TaskDirection> directions;
    Mat<double> z0;
    Mat<double> z1;
    std::vector<double> t;
};

inline FlowBatch make_flow_batch(const Backbone<double>& model, std::uint64_t seed) {
    Rng rng(seed);
    FlowBatch b;
    const Eigen::Index rows = model.latent_layout().tokens();
    const Eigen::Index cols = model.latent_layout().channels;
    b.images = {random_image(model.cond_shape(), rng), random_image(model.cond_shape(), rng)};
    b.directions = {TaskDirection::understanding, TaskDirection::generation};
    b.z0 = random_mat<double>(2 * rows, cols, rng);
    b.z1 = random_mat<double>(2 * rows, cols, rng);
    b.t = {0.3, 0.7};
    return b;
}

inline Mat<double> interpolate_batch(const FlowBatch& b, Eigen::Index rows) {
    Mat<double> zt(b.z0.rows(), b.z0.cols());
    for (std::size_t i = 0; i < b.t.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i) * rows;
        zt.middleRows(r, rows) = interpolate<double>(b.z0.middleRows(r, rows), b.z1.middleRows(r, rows), b.t[i]).z_t;
    }
    return zt;
}

inline double flow_batch_loss(const Backbone<double>& model, const FlowBatch& b) {
    typename Backbone<double>::EncoderTape et;
    typename Backbone<double>::VelocityTape vt;
    std::vector<const PixelImage*> imgs;
    for (const auto& im : b.images) imgs.push_back(&im);
    const Mat<double> cond = model.encode_batch(imgs, b.directions, et);
    const Mat<double> v = model.velocity_batch(interpolate_batch(b, model.latent_layout().tokens()), b.t, cond, vt);
    return flow_loss(v, b.z0, b.z1);
}

// Accumulates analytic gradients of flow_batch_loss into model.params().grads().
inline void flow_batch_grad(Backbone<double>& model, const FlowBatch& b) {
    typename Backbone<double>::EncoderTape et;
    typename Backbone<double>::VelocityTape vt;
    std::vector<const PixelImage*> imgs;
    for (const auto& im : b.images) imgs.push_back(&im);
    const Mat<double> cond = model.encode_batch(imgs, b.directions, et);
    const Mat<double> v = model.velocity_batch(interpolate_batch(b, model.latent_layout().tokens()), b.t, cond, vt);
    const Mat<double> dv = 2.0 * (v - velocity_target(b.z0, b.z1)) / static_cast<double>(v.size());
    model.params().zero_grad();
    const auto g = model.velocity_backward(vt, dv);
    model.encode_backward(et, g.d_cond);
}

struct GroupError {
    std::string name;
    double rel_error = 0.0;
};

// Compares analytic gradients with central finite differences for every
// parameter tensor; returns one norm-wise relative error per tensor.
inline std::vector<GroupError> gradient_check(std::uint64_t seed, double step = 1e-4,
                                              const std::string& output = "clean") {
    ModelConfig cfg = tiny_model_config();
    cfg.output = output;
    Backbone<double> model(cfg, tiny_canvas(), tiny_latent());
    model.init(seed);
    // Randomize everything, including the zero-initialized AdaLN and output
    // layers, so every path carries gradient.
    Rng rng(Rng::derive(seed, "gradcheck"));
    for (double& v : model.params().values()) v = rng.normal() * 0.3;
    const FlowBatch batch = make_flow_batch(model, Rng::derive(seed, "batch"));

    flow_batch_grad(model, batch);
    const auto analytic = model.params().grads();

    std::vector<GroupError> out;
    auto& values = model.params().values();
    for (const auto& e : model.params().entries()) {
        double diff2 = 0.0;
        double an2 = 0.0;
        double fd2 = 0.0;
        for (std::size_t i = e.offset; i < e.offset + e.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + step;
            const double lp = flow_batch_loss(model, batch);
            values[i] = saved - step;
            const double lm = flow_batch_loss(model, batch);
            values[i] = saved;
            const double fd = (lp - lm) / (2.0 * step);
            diff2 += (fd - analytic[i]) * (fd - analytic[i]);
            an2 += analytic[i] * analytic[i];
            fd2 += fd * fd;
        }
        const double denom = std::max({std::sqrt(an2), std::sqrt(fd2), 1e-12});
        out.push_back({e.name, std::sqrt(diff2) / denom});
    }
    return out;
}

}  // namespace unipix::testing
