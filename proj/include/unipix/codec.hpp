// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "unipix/image.hpp"
#include "unipix/nn.hpp"
#include "unipix/optim.hpp"
#include "unipix/tensor.hpp"

namespace unipix {

struct Corpus;

// Token grid of a latent; tokens are stored row-major over (grid_h, grid_w).
struct LatentLayout {
    int grid_h = 0;
    int grid_w = 0;
    int channels = 0;
    int tokens() const { return grid_h * grid_w; }
    bool operator==(const LatentLayout&) const = default;
};

struct Latent {
    Tensor data;  // tokens x channels
    std::string codec_id;
    ImageShape source_shape;
    LatentLayout layout;
};

// Non-overlapping patch flattening; each row holds one patch as (py, px, c).
Tensor patchify(const PixelImage& image, int patch);
PixelImage unpatchify(const Tensor& patches, ImageShape shape, int patch);

struct CodecConfig {
    std::string kind = "identity_patch";  // identity_patch | tiny_autoencoder
    int patch_size = 8;
    // tiny_autoencoder
    int latent_channels = 8;
    int downsample_factor = 4;
    int hidden_channels = 32;
    int train_steps = 2000;
    int train_batch = 8;
    double train_learning_rate = 2e-3;

    void validate(ImageShape image) const;
    bool operator==(const CodecConfig&) const = default;
};

class LatentCodec {
public:
    virtual ~LatentCodec() = default;
    virtual std::string id() const = 0;
    virtual LatentLayout layout() const = 0;
    virtual ImageShape image_shape() const = 0;
    virtual Latent encode(const PixelImage& image) const = 0;
    // Output is clamped to the canonical pixel range.
    virtual PixelImage decode(const Latent& latent) const = 0;

protected:
    void check_image(const PixelImage& image) const;
    void check_latent(const Latent& latent) const;
};

class IdentityPatchCodec final : public LatentCodec {
public:
    IdentityPatchCodec(ImageShape shape, int patch);
    std::string id() const override;
    LatentLayout layout() const override;
    ImageShape image_shape() const override { return shape_; }
    Latent encode(const PixelImage& image) const override;
    PixelImage decode(const Latent& latent) const override;

private:
    ImageShape shape_;
    int patch_;
};

// Strided-conv autoencoder: log2(downsample_factor) stages of 4x4/stride-2
// convolutions down, mirrored transposed convolutions up. Trained with plain
// pixel MSE.
class TinyAutoencoder final : public LatentCodec {
public:
    TinyAutoencoder(ImageShape shape, const CodecConfig& cfg);

    std::string id() const override;
    LatentLayout layout() const override;
    ImageShape image_shape() const override { return shape_; }
    Latent encode(const PixelImage& image) const override;
    PixelImage decode(const Latent& latent) const override;

    void init(std::uint64_t seed);
    const CodecConfig& config() const { return cfg_; }
    nn::ParameterStore<float>& params() { return params_; }
    const nn::ParameterStore<float>& params() const { return params_; }

    // Mean squared reconstruction error (unclamped) over the images; when
    // `accumulate_grads` is set, adds dLoss/dParams into params().grads().
    double reconstruction_loss(const std::vector<const PixelImage*>& images, bool accumulate_grads);

    struct Conv {
        nn::ParamRef w;
        nn::ParamRef b;
        int cin = 0;
        int cout = 0;
        bool transposed = false;
    };

private:
    struct Activations;
    Tensor run_encoder(const Tensor& x, Activations* acts) const;
    Tensor run_decoder(const Tensor& z, Activations* acts) const;

    ImageShape shape_;
    CodecConfig cfg_;
    int stages_ = 0;
    std::vector<Conv> encoder_;
    std::vector<Conv> decoder_;
    nn::ParameterStore<float> params_;
};

std::unique_ptr<LatentCodec> make_codec(const CodecConfig& cfg, ImageShape shape);

struct AutoencoderTrainStats {
    double initial_loss = 0;
    double final_loss = 0;
    std::vector<double> losses;
};

// Trains on RGB and painted images alike; deterministic given seed.
AutoencoderTrainStats train_autoencoder(TinyAutoencoder& codec, const Corpus& corpus, int steps, std::uint64_t seed);

}  // namespace unipix
