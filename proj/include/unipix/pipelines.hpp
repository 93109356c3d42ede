// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "unipix/backbone.hpp"
#include "unipix/codec.hpp"
#include "unipix/dataset.hpp"
#include "unipix/flow.hpp"
#include "unipix/painted_text.hpp"
#include "unipix/trainer.hpp"

namespace unipix {

// What the sampling pipelines need from a trained network: condition tokens
// for an image and a direction, and a velocity for a latent at time t.
class FlowModel {
public:
    virtual ~FlowModel() = default;
    virtual Mat<float> condition(const PixelImage& image, TaskDirection direction) const = 0;
    virtual Mat<float> velocity(const Mat<float>& z, float t, const Mat<float>& cond) const = 0;
};

class BackboneFlowModel final : public FlowModel {
public:
    explicit BackboneFlowModel(const Backbone<float>& model) : model_(model) {}
    Mat<float> condition(const PixelImage& image, TaskDirection direction) const override {
        return model_.encode_condition(image, direction);
    }
    Mat<float> velocity(const Mat<float>& z, float t, const Mat<float>& cond) const override {
        return model_.predict_velocity(z, t, cond);
    }

private:
    const Backbone<float>& model_;
};

struct Pipeline {
    const FlowModel& model;
    const LatentCodec& codec;
    CanvasSpec canvas;
    const GlyphFont& font;
    SamplerConfig sampler;
};

struct CaptionResult {
    PixelImage painted;
    std::string text;
    std::vector<float> confidence;
    double mean_confidence = 0.0;
};

struct CycleResult {
    CaptionResult caption;
    PixelImage generation_input;  // predicted painted image, or its re-rasterization
    PixelImage reconstruction;
};

// Draws z1 from the "sample" stream of seed and integrates to t = 0.
Latent sample_latent(const Pipeline& p, const PixelImage& cond_image, TaskDirection direction, std::uint64_t seed);

CaptionResult image_to_text(const Pipeline& p, const PixelImage& rgb, std::uint64_t seed);
PixelImage painted_to_image(const Pipeline& p, const PixelImage& painted, std::uint64_t seed);
PixelImage text_to_image(const Pipeline& p, std::string_view text, std::uint64_t seed);

// Understanding then generation with the same seed. By default the predicted
// painted canvas itself conditions generation; `rerasterize` feeds a clean
// rendering of the decoded string instead.
CycleResult cycle(const Pipeline& p, const PixelImage& rgb, std::uint64_t seed, bool rerasterize = false);

PixelImage triptych(const PixelImage& input, const PixelImage& painted, const PixelImage& reconstruction);

struct MetricsReport {
    int samples = 0;
    std::uint64_t seed = 0;
    int sampler_steps = 0;
    double caption_exact_match = 0.0;
    double char_error_rate = 0.0;
    double mean_caption_confidence = 0.0;
    double generation_scene_accuracy = 0.0;
    double generation_shape_color_accuracy = 0.0;
    double cycle_scene_accuracy = 0.0;
    double cycle_shape_color_accuracy = 0.0;
};

struct EvalOptions {
    std::uint64_t seed = 0;      // sample i uses seed + i
    int limit = 0;               // evaluate only the first `limit` samples; 0 = all
    bool rerasterize = false;    // cycle variant
    std::optional<std::filesystem::path> gallery_dir;
    int gallery_count = 16;
};

MetricsReport evaluate(const Pipeline& p, const Corpus& corpus, const EvalOptions& opts);

std::string report_to_json(const MetricsReport& r);
void write_report(const std::filesystem::path& path, const MetricsReport& r);

}  // namespace unipix
