// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "unipix/backbone.hpp"
#include "unipix/codec.hpp"
#include "unipix/flow.hpp"
#include "unipix/painted_text.hpp"

namespace unipix {

struct TrainConfig {
    int steps = 6000;
    int batch_size = 8;
    double learning_rate = 1e-3;
    double swap_probability = 0.5;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // 0: final checkpoint only
    std::string optimizer = "adam";
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;
    double grad_clip = 1.0;  // global L2 norm; 0 disables
    int lr_decay_steps = 0;  // cosine decay to 0 over this many steps; 0 keeps the rate constant

    double learning_rate_at(std::uint64_t step) const;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

// Everything needed to rebuild a run. Every field is explicit in the JSON
// form; parsing rejects missing and unknown keys.
struct RunConfig {
    CanvasSpec canvas;
    ModelConfig model;
    TrainConfig train;
    CodecConfig codec;
    SamplerConfig sampler;

    // Cross-module checks: canvas divisible by the patch size, codec and model
    // agree on the token grid.
    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

std::string config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace unipix
