// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unipix/codec.hpp"
#include "unipix/image.hpp"
#include "unipix/nn.hpp"
#include "unipix/tensor.hpp"

namespace unipix {

enum class TaskDirection : std::uint8_t {
    understanding = 0,  // RGB image -> painted text
    generation = 1,     // painted text -> RGB image
};

const char* direction_name(TaskDirection d);

struct ModelConfig {
    int width = 128;
    int depth = 6;
    int encoder_depth = 2;
    int heads = 4;
    int patch_size = 8;
    int time_embed_dim = 128;
    int cond_tokens = 64;  // condition patches; must equal (H/patch)*(W/patch)
    int mlp_ratio = 4;
    // "clean": the head predicts the clean latent x and the velocity is
    // (z_t - x) / max(t, time_floor). "velocity": the head predicts v directly.
    std::string output = "clean";
    double time_floor = 0.3;

    void validate() const;
    void validate_for(ImageShape image) const;
    bool operator==(const ModelConfig&) const = default;
};

// Unified velocity network f(z_t, t, c, e_task).
//
// Condition path: the condition image is patchified, linearly embedded, given
// 2D sincos positions and run through `encoder_depth` pre-LN transformer
// blocks; the task-embedding row for the requested direction is appended,
// giving cond_tokens + 1 rows. The same weights serve both modalities.
//
// Velocity path: latent tokens are embedded and concatenated with the
// condition tokens into one self-attention sequence (latent first). Each of
// `depth` blocks is modulated by the diffusion time through AdaLN
// (shift/scale/gate per sub-layer). Only the latent positions are projected
// back to latent channels, either as the velocity itself or as a clean-latent
// estimate that is converted to a velocity.
template <typename T>
class Backbone {
public:
    Backbone(const ModelConfig& cfg, ImageShape cond_shape, LatentLayout latent);

    // Xavier-uniform linears, unit LayerNorms, N(0, 0.02) embeddings; the
    // AdaLN projections and the output layer start at zero.
    void init(std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ImageShape cond_shape() const { return cond_shape_; }
    const LatentLayout& latent_layout() const { return latent_; }
    Eigen::Index cond_rows() const { return cfg_.cond_tokens + 1; }

    nn::ParameterStore<T>& params() { return params_; }
    const nn::ParameterStore<T>& params() const { return params_; }
    std::size_t count_parameters() const { return params_.count(); }

    struct EncoderTape {
        Eigen::Index batch = 0;
        std::vector<TaskDirection> directions;
        Mat<T> patches;
        struct Block {
            nn::NormCache<T> n1, n2;
            typename nn::Attention<T>::Cache attn;
            typename nn::Mlp<T>::Cache mlp;
        };
        std::vector<Block> blocks;
        nn::NormCache<T> final_norm;
    };

    struct VelocityTape {
        Eigen::Index batch = 0;
        Mat<T> z_t;
        std::vector<T> t;
        Mat<T> t_features;
        Mat<T> t_hidden;  // pre-activation of the first time-MLP layer
        Mat<T> t_act;
        Mat<T> t_embed;   // c
        Mat<T> t_silu;    // silu(c), fed to every AdaLN projection
        struct Block {
            Mat<T> mod;
            Mat<T> x;
            nn::NormCache<T> n1, n2;
            Mat<T> m1, m2;
            typename nn::Attention<T>::Cache attn;
            Mat<T> a;
            Mat<T> h;
            typename nn::Mlp<T>::Cache mlp;
            Mat<T> f;
        };
        std::vector<Block> blocks;
        Mat<T> final_in;   // latent rows after the last block
        Mat<T> final_mod;
        nn::NormCache<T> final_norm;
        Mat<T> final_m;
    };

    // Batched condition encoding; result is (B*(cond_tokens+1)) x width.
    Mat<T> encode_batch(const std::vector<const PixelImage*>& images, const std::vector<TaskDirection>& directions,
                        EncoderTape& tape) const;
    // Accumulates parameter gradients from d(cond tokens).
    void encode_backward(const EncoderTape& tape, const Mat<T>& d_cond);

    // z_t is (B*L) x C, cond (B*(cond_tokens+1)) x width, t has B entries.
    Mat<T> velocity_batch(const Mat<T>& z_t, const std::vector<T>& t, const Mat<T>& cond, VelocityTape& tape) const;
    struct VelocityGrads {
        Mat<T> d_z;
        Mat<T> d_cond;
    };
    // Accumulates parameter gradients and returns input gradients.
    VelocityGrads velocity_backward(const VelocityTape& tape, const Mat<T>& d_out);

    // Single-example conveniences.
    Mat<T> encode_condition(const PixelImage& image, TaskDirection direction) const;
    Mat<T> predict_velocity(const Mat<T>& z_t, T t, const Mat<T>& cond_tokens) const;

private:
    struct EncoderBlock {
        nn::LayerNorm<T> ln1, ln2;
        nn::Attention<T> attn;
        nn::Mlp<T> mlp;
    };
    struct DitBlock {
        nn::Linear<T> ada;
        nn::Attention<T> attn;
        nn::Mlp<T> mlp;
    };

    ModelConfig cfg_;
    ImageShape cond_shape_;
    LatentLayout latent_;
    nn::ParameterStore<T> params_;

    nn::Linear<T> patch_embed_;
    std::vector<EncoderBlock> enc_blocks_;
    nn::LayerNorm<T> enc_norm_;
    nn::ParamRef task_embedding_;
    nn::ParamRef segment_embedding_;
    nn::Linear<T> latent_embed_;
    nn::Linear<T> time_fc1_;
    nn::Linear<T> time_fc2_;
    std::vector<DitBlock> dit_blocks_;
    nn::Linear<T> final_ada_;
    nn::Linear<T> final_out_;

    Mat<T> enc_pos_;
    Mat<T> latent_pos_;
    Mat<T> cond_pos_;
};

extern template class Backbone<float>;
extern template class Backbone<double>;

// Copies parameter values between precisions (layouts must match).
template <typename To, typename From>
void copy_parameters(const Backbone<From>& from, Backbone<To>& to) {
    const auto& src = from.params().entries();
    const auto& dst = to.params().entries();
    if (src.size() != dst.size()) fail(ErrorCode::shape_mismatch, "backbone parameter layouts differ");
    for (std::size_t k = 0; k < src.size(); ++k) {
        if (src[k].size() != dst[k].size()) fail(ErrorCode::shape_mismatch, "backbone parameter layouts differ");
        for (std::size_t i = 0; i < src[k].size(); ++i) {
            to.params().values()[dst[k].offset + i] = static_cast<To>(from.params().values()[src[k].offset + i]);
        }
    }
}

}  // namespace unipix
