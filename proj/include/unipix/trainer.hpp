// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "unipix/backbone.hpp"
#include "unipix/checkpoint.hpp"
#include "unipix/codec.hpp"
#include "unipix/config.hpp"
#include "unipix/dataset.hpp"
#include "unipix/optim.hpp"
#include "unipix/rng.hpp"

namespace unipix {

// One (target, condition) assignment. Understanding: the RGB image conditions
// and the painted caption is the target; generation swaps the two.
struct TrainingExample {
    Latent z0;
    PixelImage cond_image;
    TaskDirection direction = TaskDirection::understanding;
};

TrainingExample make_training_example(const Sample& sample, TaskDirection direction, const LatentCodec& codec);

// Understanding with probability swap_probability, otherwise generation.
TaskDirection sample_direction(Rng& rng, double swap_probability);

struct StepStats {
    std::uint64_t step = 0;  // 1-based index of the step just taken
    double loss = 0;
    double loss_und = 0;  // NaN when the batch held no such example
    double loss_gen = 0;
    int n_und = 0;
    int n_gen = 0;
    double grad_norm = 0;  // before clipping
};

// Model, codec and config restored from a checkpoint, ready for inference.
struct LoadedModel {
    RunConfig config;
    std::unique_ptr<Backbone<float>> model;
    std::unique_ptr<LatentCodec> codec;
};

LoadedModel restore_model(const Checkpoint& ckpt);

class Trainer {
public:
    // Fresh run: initializes the model (and trains the autoencoder codec when
    // one is configured).
    Trainer(const RunConfig& cfg, const Corpus& corpus);
    // Continues from a checkpoint; the corpus must be the one it was trained on.
    Trainer(const Checkpoint& ckpt, const Corpus& corpus);

    StepStats step();

    std::uint64_t steps_done() const { return step_; }
    const RunConfig& config() const { return cfg_; }
    const Backbone<float>& model() const { return *model_; }
    Backbone<float>& model() { return *model_; }
    const LatentCodec& codec() const { return *codec_; }
    const Rng& rng() const { return rng_; }
    const AdamState& optimizer_state() const { return adam_; }

    // Corpus indices used by the given 0-based step. Examples are drawn from
    // a fresh permutation of the corpus each epoch.
    std::vector<std::size_t> batch_indices(std::uint64_t step) const;

    Checkpoint checkpoint() const;

private:
    void check_corpus() const;
    const std::vector<std::size_t>& epoch_order(std::uint64_t epoch) const;

    RunConfig cfg_;
    const Corpus& corpus_;
    std::unique_ptr<Backbone<float>> model_;
    std::unique_ptr<LatentCodec> codec_;
    AdamState adam_;
    Rng rng_;
    std::uint64_t step_ = 0;

    mutable std::uint64_t cached_epoch_ = UINT64_MAX;
    mutable std::vector<std::size_t> cached_order_;
};

std::string format_metrics_line(const StepStats& s);

// Runs until cfg.train.steps, writing `metrics.tsv` (appended), periodic
// `ckpt_<step>.unim` files and `final.unim` into out_dir. With `resume`, the
// run continues from that checkpoint; cfg may differ from the checkpoint's
// config only in train.steps and train.checkpoint_every. Metrics lines past
// the resumed step are dropped.
Checkpoint train(const Corpus& corpus, const RunConfig& cfg, const std::filesystem::path& out_dir,
                 std::ostream* progress = nullptr, const Checkpoint* resume = nullptr);

}  // namespace unipix
