// SPDX-License-Identifier: Apache-2.0
#include "unipix/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "unipix/dataset.hpp"
#include "unipix/error.hpp"
#include "unipix/rng.hpp"

namespace unipix {

Tensor patchify(const PixelImage& image, int patch) {
    const int h = image.height();
    const int w = image.width();
    const int c = image.channels();
    if (patch <= 0 || h % patch != 0 || w % patch != 0) {
        fail(ErrorCode::shape_mismatch, "patch size " + std::to_string(patch) + " does not divide " +
                                            std::to_string(h) + "x" + std::to_string(w));
    }
    const int gw = w / patch;
    Tensor out((h / patch) * gw, patch * patch * c);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int token = (y / patch) * gw + x / patch;
            const int base = ((y % patch) * patch + x % patch) * c;
            for (int k = 0; k < c; ++k) out(token, base + k) = image.at(y, x, k);
        }
    }
    return out;
}

PixelImage unpatchify(const Tensor& patches, ImageShape shape, int patch) {
    if (patch <= 0 || shape.height % patch != 0 || shape.width % patch != 0) {
        fail(ErrorCode::shape_mismatch, "patch size does not divide the image");
    }
    const int gw = shape.width / patch;
    if (patches.rows() != (shape.height / patch) * gw || patches.cols() != patch * patch * shape.channels) {
        fail(ErrorCode::shape_mismatch, "patch tensor does not match the image shape");
    }
    PixelImage image(shape, 0.0f);
    for (int y = 0; y < shape.height; ++y) {
        for (int x = 0; x < shape.width; ++x) {
            const int token = (y / patch) * gw + x / patch;
            const int base = ((y % patch) * patch + x % patch) * shape.channels;
            for (int k = 0; k < shape.channels; ++k) image.at(y, x, k) = patches(token, base + k);
        }
    }
    return image;
}

void CodecConfig::validate(ImageShape image) const {
    if (kind == "identity_patch") {
        if (patch_size <= 0 || image.height % patch_size != 0 || image.width % patch_size != 0) {
            fail(ErrorCode::config_error, "codec patch_size must divide the canvas dimensions");
        }
    } else if (kind == "tiny_autoencoder") {
        if (latent_channels <= 0 || hidden_channels <= 0) {
            fail(ErrorCode::config_error, "autoencoder channel counts must be positive");
        }
        if (downsample_factor < 2 || !std::has_single_bit(static_cast<unsigned>(downsample_factor))) {
            fail(ErrorCode::config_error, "autoencoder downsample_factor must be a power of two >= 2");
        }
        if (image.height % downsample_factor != 0 || image.width % downsample_factor != 0) {
            fail(ErrorCode::config_error, "autoencoder downsample_factor must divide the canvas dimensions");
        }
        if (train_steps < 0 || train_batch < 1 || !(train_learning_rate > 0)) {
            fail(ErrorCode::config_error, "invalid autoencoder training settings");
        }
    } else {
        fail(ErrorCode::config_error, "unknown codec kind '" + kind + "'");
    }
}

void LatentCodec::check_image(const PixelImage& image) const {
    if (image.shape() != image_shape()) {
        fail(ErrorCode::shape_mismatch, "codec " + id() + ": image shape does not match");
    }
}

void LatentCodec::check_latent(const Latent& latent) const {
    if (latent.codec_id != id()) {
        fail(ErrorCode::codec_mismatch, "latent from codec '" + latent.codec_id + "' given to '" + id() + "'");
    }
    const LatentLayout l = layout();
    if (latent.data.rows() != l.tokens() || latent.data.cols() != l.channels) {
        fail(ErrorCode::shape_mismatch, "codec " + id() + ": latent tensor shape does not match");
    }
}

// ---------------------------------------------------------------------------

IdentityPatchCodec::IdentityPatchCodec(ImageShape shape, int patch) : shape_(shape), patch_(patch) {
    CodecConfig cfg;
    cfg.patch_size = patch;
    cfg.validate(shape);
}

std::string IdentityPatchCodec::id() const { return "identity_patch/p" + std::to_string(patch_); }

LatentLayout IdentityPatchCodec::layout() const {
    return {shape_.height / patch_, shape_.width / patch_, patch_ * patch_ * shape_.channels};
}

Latent IdentityPatchCodec::encode(const PixelImage& image) const {
    check_image(image);
    return Latent{patchify(image, patch_), id(), shape_, layout()};
}

PixelImage IdentityPatchCodec::decode(const Latent& latent) const {
    check_latent(latent);
    PixelImage image = unpatchify(latent.data, shape_, patch_);
    clamp_pixels(image);
    return image;
}

// ---------------------------------------------------------------------------
// Convolution helpers. Feature maps are (H*W x C) row-major matrices. The
// "big" map is the high-resolution side of a 4x4/stride-2/pad-1 kernel and
// the "small" map the low-resolution side.

namespace {

constexpr int kKernel = 4;
constexpr int kStride = 2;
constexpr int kPad = 1;

Tensor im2col(const Tensor& big, int hb, int wb, int c, int hs, int ws) {
    Tensor cols = Tensor::Zero(hs * ws, kKernel * kKernel * c);
    for (int i = 0; i < hs; ++i) {
        for (int j = 0; j < ws; ++j) {
            for (int ky = 0; ky < kKernel; ++ky) {
                const int y = i * kStride - kPad + ky;
                if (y < 0 || y >= hb) continue;
                for (int kx = 0; kx < kKernel; ++kx) {
                    const int x = j * kStride - kPad + kx;
                    if (x < 0 || x >= wb) continue;
                    cols.block(i * ws + j, (ky * kKernel + kx) * c, 1, c) = big.row(y * wb + x);
                }
            }
        }
    }
    return cols;
}

Tensor col2im(const Tensor& cols, int hb, int wb, int c, int hs, int ws) {
    Tensor big = Tensor::Zero(hb * wb, c);
    for (int i = 0; i < hs; ++i) {
        for (int j = 0; j < ws; ++j) {
            for (int ky = 0; ky < kKernel; ++ky) {
                const int y = i * kStride - kPad + ky;
                if (y < 0 || y >= hb) continue;
                for (int kx = 0; kx < kKernel; ++kx) {
                    const int x = j * kStride - kPad + kx;
                    if (x < 0 || x >= wb) continue;
                    big.row(y * wb + x) += cols.block(i * ws + j, (ky * kKernel + kx) * c, 1, c);
                }
            }
        }
    }
    return big;
}

}  // namespace

struct TinyAutoencoder::Activations {
    struct Layer {
        Tensor input;
        Tensor cols;  // im2col of the input (forward conv only)
        Tensor pre;
        int in_h = 0;
        int in_w = 0;
        int out_h = 0;
        int out_w = 0;
        bool activated = false;
    };
    std::vector<Layer> enc;
    std::vector<Layer> dec;
};

TinyAutoencoder::TinyAutoencoder(ImageShape shape, const CodecConfig& cfg) : shape_(shape), cfg_(cfg) {
    CodecConfig checked = cfg;
    checked.kind = "tiny_autoencoder";
    checked.validate(shape);
    stages_ = std::countr_zero(static_cast<unsigned>(cfg.downsample_factor));
    for (int s = 0; s < stages_; ++s) {
        Conv conv;
        conv.cin = s == 0 ? shape.channels : cfg.hidden_channels;
        conv.cout = s == stages_ - 1 ? cfg.latent_channels : cfg.hidden_channels;
        conv.w = params_.add("enc" + std::to_string(s) + ".weight", kKernel * kKernel * conv.cin, conv.cout);
        conv.b = params_.add("enc" + std::to_string(s) + ".bias", 1, conv.cout);
        encoder_.push_back(conv);
    }
    for (int s = 0; s < stages_; ++s) {
        Conv conv;
        conv.transposed = true;
        conv.cin = s == 0 ? cfg.latent_channels : cfg.hidden_channels;
        conv.cout = s == stages_ - 1 ? shape.channels : cfg.hidden_channels;
        conv.w = params_.add("dec" + std::to_string(s) + ".weight", conv.cin, kKernel * kKernel * conv.cout);
        conv.b = params_.add("dec" + std::to_string(s) + ".bias", 1, conv.cout);
        decoder_.push_back(conv);
    }
}

std::string TinyAutoencoder::id() const {
    return "tiny_autoencoder/c" + std::to_string(cfg_.latent_channels) + "/d" + std::to_string(cfg_.downsample_factor) +
           "/h" + std::to_string(cfg_.hidden_channels);
}

LatentLayout TinyAutoencoder::layout() const {
    return {shape_.height / cfg_.downsample_factor, shape_.width / cfg_.downsample_factor, cfg_.latent_channels};
}

void TinyAutoencoder::init(std::uint64_t seed) {
    Rng rng(Rng::derive(seed, "codec-init"));
    for (const auto& convs : {encoder_, decoder_}) {
        for (const Conv& c : convs) {
            const double fan = kKernel * kKernel * static_cast<double>(c.cin + c.cout);
            nn::fill_uniform(params_.value(c.w), rng, std::sqrt(6.0 / fan));
            params_.value(c.b).setZero();
        }
    }
}

Tensor TinyAutoencoder::run_encoder(const Tensor& x, Activations* acts) const {
    Tensor h = x;
    int hh = shape_.height;
    int ww = shape_.width;
    for (std::size_t s = 0; s < encoder_.size(); ++s) {
        const Conv& c = encoder_[s];
        const int oh = hh / kStride;
        const int ow = ww / kStride;
        Tensor cols = im2col(h, hh, ww, c.cin, oh, ow);
        Tensor pre(cols.rows(), c.cout);
        pre.noalias() = cols * params_.value(c.w);
        pre.rowwise() += params_.value(c.b).row(0);
        const bool act = s + 1 < encoder_.size();
        Tensor out = act ? nn::silu(pre) : pre;
        if (acts) acts->enc.push_back({std::move(h), std::move(cols), std::move(pre), hh, ww, oh, ow, act});
        h = std::move(out);
        hh = oh;
        ww = ow;
    }
    return h;
}

Tensor TinyAutoencoder::run_decoder(const Tensor& z, Activations* acts) const {
    Tensor h = z;
    int hh = shape_.height / cfg_.downsample_factor;
    int ww = shape_.width / cfg_.downsample_factor;
    for (std::size_t s = 0; s < decoder_.size(); ++s) {
        const Conv& c = decoder_[s];
        const int oh = hh * kStride;
        const int ow = ww * kStride;
        Tensor prod(h.rows(), kKernel * kKernel * c.cout);
        prod.noalias() = h * params_.value(c.w);
        Tensor pre = col2im(prod, oh, ow, c.cout, hh, ww);
        pre.rowwise() += params_.value(c.b).row(0);
        const bool act = s + 1 < decoder_.size();
        Tensor out = act ? nn::silu(pre) : pre;
        if (acts) acts->dec.push_back({std::move(h), Tensor(), std::move(pre), hh, ww, oh, ow, act});
        h = std::move(out);
        hh = oh;
        ww = ow;
    }
    return h;
}

namespace {

Tensor image_matrix(const PixelImage& image) {
    return ConstMatMap<float>(image.data().data(), image.height() * image.width(), image.channels());
}

}  // namespace

Latent TinyAutoencoder::encode(const PixelImage& image) const {
    check_image(image);
    return Latent{run_encoder(image_matrix(image), nullptr), id(), shape_, layout()};
}

PixelImage TinyAutoencoder::decode(const Latent& latent) const {
    check_latent(latent);
    const Tensor out = run_decoder(latent.data, nullptr);
    PixelImage image(shape_, 0.0f);
    std::copy(out.data(), out.data() + out.size(), image.data().begin());
    clamp_pixels(image);
    return image;
}

double TinyAutoencoder::reconstruction_loss(const std::vector<const PixelImage*>& images, bool accumulate_grads) {
    if (images.empty()) fail(ErrorCode::invalid_argument, "reconstruction_loss needs at least one image");
    const double norm = static_cast<double>(images.size()) * static_cast<double>(shape_.size());
    double total = 0.0;
    for (const PixelImage* img : images) {
        check_image(*img);
        const Tensor x = image_matrix(*img);
        Activations acts;
        const Tensor z = run_encoder(x, accumulate_grads ? &acts : nullptr);
        const Tensor y = run_decoder(z, accumulate_grads ? &acts : nullptr);
        const Tensor diff = y - x;
        total += diff.cast<double>().squaredNorm();
        if (!accumulate_grads) continue;

        Tensor grad = diff * static_cast<float>(2.0 / norm);
        for (std::size_t s = decoder_.size(); s-- > 0;) {
            const Conv& c = decoder_[s];
            const auto& a = acts.dec[s];
            const Tensor dpre = a.activated ? nn::silu_backward(a.pre, grad) : grad;
            params_.grad(c.b).row(0) += dpre.colwise().sum();
            const Tensor dprod = im2col(dpre, a.out_h, a.out_w, c.cout, a.in_h, a.in_w);
            params_.grad(c.w).noalias() += a.input.transpose() * dprod;
            grad.resize(dprod.rows(), c.cin);
            grad.noalias() = dprod * params_.value(c.w).transpose();
        }
        for (std::size_t s = encoder_.size(); s-- > 0;) {
            const Conv& c = encoder_[s];
            const auto& a = acts.enc[s];
            const Tensor dpre = a.activated ? nn::silu_backward(a.pre, grad) : grad;
            params_.grad(c.b).row(0) += dpre.colwise().sum();
            params_.grad(c.w).noalias() += a.cols.transpose() * dpre;
            if (s == 0) break;
            Tensor dcols(dpre.rows(), a.cols.cols());
            dcols.noalias() = dpre * params_.value(c.w).transpose();
            grad = col2im(dcols, a.in_h, a.in_w, c.cin, a.out_h, a.out_w);
        }
    }
    return total / norm;
}

std::unique_ptr<LatentCodec> make_codec(const CodecConfig& cfg, ImageShape shape) {
    cfg.validate(shape);
    if (cfg.kind == "identity_patch") return std::make_unique<IdentityPatchCodec>(shape, cfg.patch_size);
    return std::make_unique<TinyAutoencoder>(shape, cfg);
}

AutoencoderTrainStats train_autoencoder(TinyAutoencoder& codec, const Corpus& corpus, int steps, std::uint64_t seed) {
    if (corpus.samples.empty()) fail(ErrorCode::invalid_argument, "cannot train a codec on an empty corpus");
    std::vector<const PixelImage*> pool;
    for (const Sample& s : corpus.samples) {
        pool.push_back(&s.rgb);
        pool.push_back(&s.painted.image);
    }

    AutoencoderTrainStats stats;
    stats.initial_loss = codec.reconstruction_loss(pool, false);

    AdamConfig adam;
    adam.learning_rate = codec.config().train_learning_rate;
    AdamState state;
    Rng rng(Rng::derive(seed, "codec-train"));
    auto& params = codec.params();
    const int batch = codec.config().train_batch;

    std::vector<const PixelImage*> mb(static_cast<std::size_t>(batch));
    for (int step = 0; step < steps; ++step) {
        for (auto& p : mb) p = pool[static_cast<std::size_t>(rng.below(pool.size()))];
        params.zero_grad();
        const double loss = codec.reconstruction_loss(mb, true);
        if (!std::isfinite(loss)) {
            fail(ErrorCode::divergence, "autoencoder training diverged at step " + std::to_string(step));
        }
        stats.losses.push_back(loss);
        adam_update(params.values(), params.grads(), state, adam);
    }
    stats.final_loss = codec.reconstruction_loss(pool, false);
    return stats;
}

}  // namespace unipix
