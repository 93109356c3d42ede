// SPDX-License-Identifier: Apache-2.0
#include "unipix/backbone.hpp"

#include <algorithm>

#include "unipix/error.hpp"
#include "unipix/rng.hpp"

namespace unipix {

const char* direction_name(TaskDirection d) {
    return d == TaskDirection::understanding ? "understanding" : "generation";
}

void ModelConfig::validate() const {
    if (depth < 1) fail(ErrorCode::config_error, "model depth must be >= 1");
    if (encoder_depth < 0) fail(ErrorCode::config_error, "encoder_depth must be >= 0");
    if (width < 4 || width % 4 != 0) fail(ErrorCode::config_error, "model width must be a positive multiple of 4");
    if (heads < 1 || width % heads != 0) fail(ErrorCode::config_error, "model width must be divisible by heads");
    if (patch_size < 1) fail(ErrorCode::config_error, "patch_size must be >= 1");
    if (time_embed_dim < 2 || time_embed_dim % 2 != 0) {
        fail(ErrorCode::config_error, "time_embed_dim must be a positive even number");
    }
    if (cond_tokens < 1) fail(ErrorCode::config_error, "cond_tokens must be >= 1");
    if (mlp_ratio < 1) fail(ErrorCode::config_error, "mlp_ratio must be >= 1");
    if (output != "clean" && output != "velocity") {
        fail(ErrorCode::config_error, "model output must be 'clean' or 'velocity', got '" + output + "'");
    }
    if (!(time_floor > 0.0 && time_floor <= 1.0)) fail(ErrorCode::config_error, "time_floor must lie in (0, 1]");
}

void ModelConfig::validate_for(ImageShape image) const {
    validate();
    if (image.height % patch_size != 0 || image.width % patch_size != 0) {
        fail(ErrorCode::config_error, "canvas " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                                          " is not divisible by patch_size " + std::to_string(patch_size));
    }
    const int patches = (image.height / patch_size) * (image.width / patch_size);
    if (patches != cond_tokens) {
        fail(ErrorCode::config_error, "cond_tokens is " + std::to_string(cond_tokens) + " but the canvas has " +
                                          std::to_string(patches) + " patches");
    }
}

template <typename T>
Backbone<T>::Backbone(const ModelConfig& cfg, ImageShape cond_shape, LatentLayout latent)
    : cfg_(cfg), cond_shape_(cond_shape), latent_(latent) {
    cfg_.validate_for(cond_shape);
    if (latent.tokens() < 1 || latent.channels < 1) fail(ErrorCode::config_error, "empty latent layout");
    const Eigen::Index w = cfg.width;
    const Eigen::Index hidden = static_cast<Eigen::Index>(cfg.mlp_ratio) * w;
    const int p = cfg.patch_size;

    patch_embed_ = nn::Linear<T>::create(params_, "encoder.patch_embed", p * p * cond_shape.channels, w);
    for (int i = 0; i < cfg.encoder_depth; ++i) {
        const std::string name = "encoder.block" + std::to_string(i);
        EncoderBlock blk;
        blk.ln1 = nn::LayerNorm<T>::create(params_, name + ".ln1", w);
        blk.attn = nn::Attention<T>::create(params_, name + ".attn", w, cfg.heads);
        blk.ln2 = nn::LayerNorm<T>::create(params_, name + ".ln2", w);
        blk.mlp = nn::Mlp<T>::create(params_, name + ".mlp", w, hidden);
        enc_blocks_.push_back(blk);
    }
    enc_norm_ = nn::LayerNorm<T>::create(params_, "encoder.norm", w);
    task_embedding_ = params_.add("task_embedding", 2, w);
    segment_embedding_ = params_.add("segment_embedding", 2, w);
    latent_embed_ = nn::Linear<T>::create(params_, "dit.latent_embed", latent.channels, w);
    time_fc1_ = nn::Linear<T>::create(params_, "dit.time.fc1", cfg.time_embed_dim, w);
    time_fc2_ = nn::Linear<T>::create(params_, "dit.time.fc2", w, w);
    for (int i = 0; i < cfg.depth; ++i) {
        const std::string name = "dit.block" + std::to_string(i);
        DitBlock blk;
        blk.ada = nn::Linear<T>::create(params_, name + ".ada", w, 6 * w);
        blk.attn = nn::Attention<T>::create(params_, name + ".attn", w, cfg.heads);
        blk.mlp = nn::Mlp<T>::create(params_, name + ".mlp", w, hidden);
        dit_blocks_.push_back(blk);
    }
    final_ada_ = nn::Linear<T>::create(params_, "dit.final.ada", w, 2 * w);
    final_out_ = nn::Linear<T>::create(params_, "dit.final.out", w, latent.channels);

    enc_pos_ = nn::sincos_2d<T>(cond_shape.height / p, cond_shape.width / p, w);
    latent_pos_ = nn::sincos_2d<T>(latent.grid_h, latent.grid_w, w);
    cond_pos_ = nn::sincos_1d<T>(cfg.cond_tokens + 1, w);
}

template <typename T>
void Backbone<T>::init(std::uint64_t seed) {
    Rng rng(Rng::derive(seed, "init"));
    patch_embed_.init_xavier(params_, rng);
    for (const auto& blk : enc_blocks_) {
        blk.ln1.init(params_);
        blk.attn.init(params_, rng);
        blk.ln2.init(params_);
        blk.mlp.init(params_, rng);
    }
    enc_norm_.init(params_);
    nn::fill_normal(params_.value(task_embedding_), rng, 0.02);
    nn::fill_normal(params_.value(segment_embedding_), rng, 0.02);
    latent_embed_.init_xavier(params_, rng);
    time_fc1_.init_xavier(params_, rng);
    time_fc2_.init_xavier(params_, rng);
    for (const auto& blk : dit_blocks_) {
        blk.ada.init_zero(params_);
        blk.attn.init(params_, rng);
        blk.mlp.init(params_, rng);
    }
    final_ada_.init_zero(params_);
    final_out_.init_zero(params_);
    params_.zero_grad();
}

// ---------------------------------------------------------------------------
// Condition encoder

template <typename T>
Mat<T> Backbone<T>::encode_batch(const std::vector<const PixelImage*>& images,
                                 const std::vector<TaskDirection>& directions, EncoderTape& tape) const {
    if (images.empty() || images.size() != directions.size()) {
        fail(ErrorCode::invalid_argument, "encode_batch: need one direction per image");
    }
    const Eigen::Index batch = static_cast<Eigen::Index>(images.size());
    const Eigen::Index np = cfg_.cond_tokens;
    const Eigen::Index w = cfg_.width;
    tape.batch = batch;
    tape.directions = directions;

    const Eigen::Index patch_dim = static_cast<Eigen::Index>(cfg_.patch_size) * cfg_.patch_size * cond_shape_.channels;
    tape.patches.resize(batch * np, patch_dim);
    for (Eigen::Index b = 0; b < batch; ++b) {
        const PixelImage& img = *images[static_cast<std::size_t>(b)];
        if (img.shape() != cond_shape_) {
            fail(ErrorCode::shape_mismatch, "condition image shape does not match the model canvas");
        }
        tape.patches.middleRows(b * np, np) = patchify(img, cfg_.patch_size).template cast<T>();
    }

    Mat<T> x = patch_embed_.forward(params_, tape.patches);
    for (Eigen::Index b = 0; b < batch; ++b) x.middleRows(b * np, np) += enc_pos_;

    tape.blocks.assign(enc_blocks_.size(), {});
    for (std::size_t i = 0; i < enc_blocks_.size(); ++i) {
        const auto& blk = enc_blocks_[i];
        auto& c = tape.blocks[i];
        x += blk.attn.forward(params_, blk.ln1.forward(params_, x, c.n1), batch, np, c.attn);
        x += blk.mlp.forward(params_, blk.ln2.forward(params_, x, c.n2), c.mlp);
    }
    const Mat<T> y = enc_norm_.forward(params_, x, tape.final_norm);

    const Eigen::Index rows = np + 1;
    Mat<T> cond(batch * rows, w);
    const auto task = params_.value(task_embedding_);
    for (Eigen::Index b = 0; b < batch; ++b) {
        cond.middleRows(b * rows, np) = y.middleRows(b * np, np);
        cond.row(b * rows + np) = task.row(static_cast<Eigen::Index>(directions[static_cast<std::size_t>(b)]));
    }
    return cond;
}

template <typename T>
void Backbone<T>::encode_backward(const EncoderTape& tape, const Mat<T>& d_cond) {
    const Eigen::Index batch = tape.batch;
    const Eigen::Index np = cfg_.cond_tokens;
    const Eigen::Index rows = np + 1;
    Mat<T> dy(batch * np, cfg_.width);
    auto task_grad = params_.grad(task_embedding_);
    for (Eigen::Index b = 0; b < batch; ++b) {
        dy.middleRows(b * np, np) = d_cond.middleRows(b * rows, np);
        task_grad.row(static_cast<Eigen::Index>(tape.directions[static_cast<std::size_t>(b)])) +=
            d_cond.row(b * rows + np);
    }
    Mat<T> dx = enc_norm_.backward(params_, dy, tape.final_norm);
    for (std::size_t i = enc_blocks_.size(); i-- > 0;) {
        const auto& blk = enc_blocks_[i];
        const auto& c = tape.blocks[i];
        dx += blk.ln2.backward(params_, blk.mlp.backward(params_, dx, c.mlp), c.n2);
        dx += blk.ln1.backward(params_, blk.attn.backward(params_, dx, batch, np, c.attn), c.n1);
    }
    patch_embed_.backward(params_, tape.patches, dx, false);
}

// ---------------------------------------------------------------------------
// Velocity network

template <typename T>
Mat<T> Backbone<T>::velocity_batch(const Mat<T>& z_t, const std::vector<T>& t, const Mat<T>& cond,
                                   VelocityTape& tape) const {
    const Eigen::Index batch = static_cast<Eigen::Index>(t.size());
    const Eigen::Index nl = latent_.tokens();
    const Eigen::Index nc = cond_rows();
    const Eigen::Index seq = nl + nc;
    const Eigen::Index w = cfg_.width;
    if (batch < 1 || z_t.rows() != batch * nl || z_t.cols() != latent_.channels) {
        fail(ErrorCode::shape_mismatch, "predict_velocity: z_t must be (B*" + std::to_string(nl) + ") x " +
                                            std::to_string(latent_.channels));
    }
    if (cond.rows() != batch * nc || cond.cols() != w) {
        fail(ErrorCode::shape_mismatch, "predict_velocity: condition tokens have the wrong shape");
    }
    for (T tv : t) {
        if (!(tv >= T(0) && tv <= T(1))) fail(ErrorCode::invalid_argument, "predict_velocity: t must lie in [0, 1]");
    }
    tape.batch = batch;
    tape.z_t = z_t;
    tape.t = t;

    tape.t_features = nn::timestep_features(t, cfg_.time_embed_dim);
    tape.t_hidden = time_fc1_.forward(params_, tape.t_features);
    tape.t_act = nn::silu(tape.t_hidden);
    tape.t_embed = time_fc2_.forward(params_, tape.t_act);
    tape.t_silu = nn::silu(tape.t_embed);

    const Mat<T> xl = latent_embed_.forward(params_, z_t);
    const auto seg = params_.value(segment_embedding_);
    Mat<T> x(batch * seq, w);
    for (Eigen::Index b = 0; b < batch; ++b) {
        auto lat = x.middleRows(b * seq, nl);
        lat = xl.middleRows(b * nl, nl) + latent_pos_;
        lat.rowwise() += seg.row(0);
        auto con = x.middleRows(b * seq + nl, nc);
        con = cond.middleRows(b * nc, nc) + cond_pos_;
        con.rowwise() += seg.row(1);
    }

    tape.blocks.assign(dit_blocks_.size(), {});
    for (std::size_t i = 0; i < dit_blocks_.size(); ++i) {
        const auto& blk = dit_blocks_[i];
        auto& c = tape.blocks[i];
        c.mod = blk.ada.forward(params_, tape.t_silu);
        const Mat<T> shift1 = c.mod.middleCols(0, w);
        const Mat<T> scale1 = c.mod.middleCols(w, w);
        const Mat<T> gate1 = c.mod.middleCols(2 * w, w);
        const Mat<T> shift2 = c.mod.middleCols(3 * w, w);
        const Mat<T> scale2 = c.mod.middleCols(4 * w, w);
        const Mat<T> gate2 = c.mod.middleCols(5 * w, w);

        c.x = x;
        c.m1 = nn::modulate(nn::normalize_rows(x, c.n1), shift1, scale1, seq);
        c.a = blk.attn.forward(params_, c.m1, batch, seq, c.attn);
        c.h = x + nn::gate_rows(c.a, gate1, seq);
        c.m2 = nn::modulate(nn::normalize_rows(c.h, c.n2), shift2, scale2, seq);
        c.f = blk.mlp.forward(params_, c.m2, c.mlp);
        x = c.h + nn::gate_rows(c.f, gate2, seq);
    }

    tape.final_in.resize(batch * nl, w);
    for (Eigen::Index b = 0; b < batch; ++b) tape.final_in.middleRows(b * nl, nl) = x.middleRows(b * seq, nl);
    tape.final_mod = final_ada_.forward(params_, tape.t_silu);
    tape.final_m = nn::modulate(nn::normalize_rows(tape.final_in, tape.final_norm), Mat<T>(tape.final_mod.middleCols(0, w)),
                                Mat<T>(tape.final_mod.middleCols(w, w)), nl);
    Mat<T> out = final_out_.forward(params_, tape.final_m);
    if (cfg_.output == "velocity") return out;
    for (Eigen::Index b = 0; b < batch; ++b) {
        const T inv = T(1) / std::max(t[static_cast<std::size_t>(b)], static_cast<T>(cfg_.time_floor));
        out.middleRows(b * nl, nl) = (z_t.middleRows(b * nl, nl) - out.middleRows(b * nl, nl)) * inv;
    }
    return out;
}

template <typename T>
typename Backbone<T>::VelocityGrads Backbone<T>::velocity_backward(const VelocityTape& tape, const Mat<T>& d_out) {
    const Eigen::Index batch = tape.batch;
    const Eigen::Index nl = latent_.tokens();
    const Eigen::Index nc = cond_rows();
    const Eigen::Index seq = nl + nc;
    const Eigen::Index w = cfg_.width;

    Mat<T> d_silu = Mat<T>::Zero(batch, w);
    Mat<T> dshift;
    Mat<T> dscale;
    Mat<T> dgate;

    // Clean-latent output: v = (z_t - x) / max(t, floor).
    Mat<T> d_head = d_out;
    Mat<T> d_z_direct;
    if (cfg_.output == "clean") {
        d_z_direct.resize(d_out.rows(), d_out.cols());
        for (Eigen::Index b = 0; b < batch; ++b) {
            const T inv = T(1) / std::max(tape.t[static_cast<std::size_t>(b)], static_cast<T>(cfg_.time_floor));
            d_z_direct.middleRows(b * nl, nl) = d_out.middleRows(b * nl, nl) * inv;
        }
        d_head = -d_z_direct;
    }

    // Final layer.
    const Mat<T> dm = final_out_.backward(params_, tape.final_m, d_head);
    const Mat<T> final_scale = tape.final_mod.middleCols(w, w);
    const Mat<T> dxh = nn::modulate_backward(tape.final_norm.xhat, final_scale, dm, nl, dshift, dscale);
    const Mat<T> d_final_in = nn::normalize_rows_backward(dxh, tape.final_norm);
    Mat<T> d_mod(batch, 2 * w);
    d_mod << dshift, dscale;
    d_silu += final_ada_.backward(params_, tape.t_silu, d_mod);

    Mat<T> dx = Mat<T>::Zero(batch * seq, w);
    for (Eigen::Index b = 0; b < batch; ++b) dx.middleRows(b * seq, nl) = d_final_in.middleRows(b * nl, nl);

    for (std::size_t i = dit_blocks_.size(); i-- > 0;) {
        const auto& blk = dit_blocks_[i];
        const auto& c = tape.blocks[i];
        const Mat<T> scale1 = c.mod.middleCols(w, w);
        const Mat<T> gate1 = c.mod.middleCols(2 * w, w);
        const Mat<T> scale2 = c.mod.middleCols(4 * w, w);
        const Mat<T> gate2 = c.mod.middleCols(5 * w, w);
        Mat<T> block_mod(batch, 6 * w);

        // x_out = h + gate2 * mlp(modulate(norm(h)))
        Mat<T> dh = dx;
        const Mat<T> df = nn::gate_rows_backward(c.f, gate2, dx, seq, dgate);
        block_mod.middleCols(5 * w, w) = dgate;
        const Mat<T> dm2 = blk.mlp.backward(params_, df, c.mlp);
        const Mat<T> dxh2 = nn::modulate_backward(c.n2.xhat, scale2, dm2, seq, dshift, dscale);
        block_mod.middleCols(3 * w, w) = dshift;
        block_mod.middleCols(4 * w, w) = dscale;
        dh += nn::normalize_rows_backward(dxh2, c.n2);

        // h = x + gate1 * attn(modulate(norm(x)))
        dx = dh;
        const Mat<T> da = nn::gate_rows_backward(c.a, gate1, dh, seq, dgate);
        block_mod.middleCols(2 * w, w) = dgate;
        const Mat<T> dm1 = blk.attn.backward(params_, da, batch, seq, c.attn);
        const Mat<T> dxh1 = nn::modulate_backward(c.n1.xhat, scale1, dm1, seq, dshift, dscale);
        block_mod.middleCols(0, w) = dshift;
        block_mod.middleCols(w, w) = dscale;
        dx += nn::normalize_rows_backward(dxh1, c.n1);

        d_silu += blk.ada.backward(params_, tape.t_silu, block_mod);
    }

    VelocityGrads out;
    Mat<T> dxl(batch * nl, w);
    out.d_cond.resize(batch * nc, w);
    for (Eigen::Index b = 0; b < batch; ++b) {
        dxl.middleRows(b * nl, nl) = dx.middleRows(b * seq, nl);
        out.d_cond.middleRows(b * nc, nc) = dx.middleRows(b * seq + nl, nc);
    }
    auto seg_grad = params_.grad(segment_embedding_);
    seg_grad.row(0) += dxl.colwise().sum();
    seg_grad.row(1) += out.d_cond.colwise().sum();
    out.d_z = latent_embed_.backward(params_, tape.z_t, dxl);
    if (d_z_direct.size() > 0) out.d_z += d_z_direct;

    const Mat<T> d_embed = nn::silu_backward(tape.t_embed, d_silu);
    const Mat<T> d_act = time_fc2_.backward(params_, tape.t_act, d_embed);
    time_fc1_.backward(params_, tape.t_features, nn::silu_backward(tape.t_hidden, d_act), false);
    return out;
}

template <typename T>
Mat<T> Backbone<T>::encode_condition(const PixelImage& image, TaskDirection direction) const {
    EncoderTape tape;
    return encode_batch({&image}, {direction}, tape);
}

template <typename T>
Mat<T> Backbone<T>::predict_velocity(const Mat<T>& z_t, T t, const Mat<T>& cond_tokens) const {
    VelocityTape tape;
    return velocity_batch(z_t, {t}, cond_tokens, tape);
}

template class Backbone<float>;
template class Backbone<double>;

}  // namespace unipix
