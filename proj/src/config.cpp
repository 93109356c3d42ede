// SPDX-License-Identifier: Apache-2.0
#include "unipix/config.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <json.hpp>

#include "unipix/error.hpp"
#include "unipix/io.hpp"

namespace unipix {

using nlohmann::json;

void TrainConfig::validate() const {
    if (steps < 0) fail(ErrorCode::config_error, "train.steps must be >= 0");
    if (batch_size < 1) fail(ErrorCode::config_error, "train.batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) fail(ErrorCode::config_error, "train.learning_rate must be >= 0");
    if (!(swap_probability >= 0.0 && swap_probability <= 1.0)) {
        fail(ErrorCode::config_error, "train.swap_probability must lie in [0, 1]");
    }
    if (checkpoint_every < 0) fail(ErrorCode::config_error, "train.checkpoint_every must be >= 0");
    if (optimizer != "adam") fail(ErrorCode::config_error, "unknown optimizer '" + optimizer + "'");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        fail(ErrorCode::config_error, "adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) fail(ErrorCode::config_error, "train.adam_eps must be > 0");
    if (!(weight_decay >= 0.0)) fail(ErrorCode::config_error, "train.weight_decay must be >= 0");
    if (!(grad_clip >= 0.0)) fail(ErrorCode::config_error, "train.grad_clip must be >= 0");
    if (lr_decay_steps < 0) fail(ErrorCode::config_error, "train.lr_decay_steps must be >= 0");
}

double TrainConfig::learning_rate_at(std::uint64_t step) const {
    if (lr_decay_steps == 0) return learning_rate;
    const double frac = std::min(1.0, static_cast<double>(step) / lr_decay_steps);
    return learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

void RunConfig::validate() const {
    canvas.validate();
    model.validate_for(canvas.shape());
    train.validate();
    codec.validate(canvas.shape());
    sampler.validate();
    if (codec.kind == "identity_patch" && codec.patch_size != model.patch_size) {
        fail(ErrorCode::config_error, "identity_patch codec patch_size must equal model.patch_size");
    }
}

namespace {

// Reads required keys out of one JSON object and rejects leftovers.
class Section {
public:
    Section(const json& parent, const std::string& name) : name_(name) {
        if (!parent.contains(name)) fail(ErrorCode::config_error, "missing section '" + name + "'");
        obj_ = &parent.at(name);
        if (!obj_->is_object()) fail(ErrorCode::config_error, "section '" + name + "' must be an object");
    }

    template <typename V>
    void get(const std::string& key, V& out) {
        if (!obj_->contains(key)) fail(ErrorCode::config_error, "missing field '" + name_ + "." + key + "'");
        seen_.insert(key);
        const json& v = obj_->at(key);
        try {
            if constexpr (std::is_integral_v<V>) {
                if (!v.is_number_integer()) throw std::runtime_error("expected an integer");
                if constexpr (std::is_unsigned_v<V>) {
                    if (v.is_number_unsigned()) {
                        out = v.get<V>();
                    } else {
                        const auto s = v.get<std::int64_t>();
                        if (s < 0) throw std::runtime_error("expected a non-negative integer");
                        out = static_cast<V>(s);
                    }
                } else {
                    out = v.get<V>();
                }
            } else if constexpr (std::is_floating_point_v<V>) {
                if (!v.is_number()) throw std::runtime_error("expected a number");
                out = v.get<V>();
            } else {
                if (!v.is_string()) throw std::runtime_error("expected a string");
                out = v.get<V>();
            }
        } catch (const std::exception& e) {
            fail(ErrorCode::config_error, "field '" + name_ + "." + key + "': " + e.what());
        }
    }

    void finish() const {
        for (const auto& [k, v] : obj_->items()) {
            if (!seen_.count(k)) fail(ErrorCode::config_error, "unknown field '" + name_ + "." + k + "'");
        }
    }

private:
    std::string name_;
    const json* obj_ = nullptr;
    std::set<std::string> seen_;
};

}  // namespace

std::string config_to_json(const RunConfig& cfg) {
    json j;
    j["canvas"] = {
        {"width", cfg.canvas.width},
        {"height", cfg.canvas.height},
        {"channels", cfg.canvas.channels},
        {"margin", cfg.canvas.margin},
        {"background_value", cfg.canvas.background_value},
        {"foreground_value", cfg.canvas.foreground_value},
    };
    j["model"] = {
        {"width", cfg.model.width},
        {"depth", cfg.model.depth},
        {"encoder_depth", cfg.model.encoder_depth},
        {"heads", cfg.model.heads},
        {"patch_size", cfg.model.patch_size},
        {"time_embed_dim", cfg.model.time_embed_dim},
        {"cond_tokens", cfg.model.cond_tokens},
        {"mlp_ratio", cfg.model.mlp_ratio},
        {"output", cfg.model.output},
        {"time_floor", cfg.model.time_floor},
    };
    j["train"] = {
        {"steps", cfg.train.steps},
        {"batch_size", cfg.train.batch_size},
        {"learning_rate", cfg.train.learning_rate},
        {"swap_probability", cfg.train.swap_probability},
        {"seed", cfg.train.seed},
        {"checkpoint_every", cfg.train.checkpoint_every},
        {"optimizer", cfg.train.optimizer},
        {"adam_beta1", cfg.train.adam_beta1},
        {"adam_beta2", cfg.train.adam_beta2},
        {"adam_eps", cfg.train.adam_eps},
        {"weight_decay", cfg.train.weight_decay},
        {"grad_clip", cfg.train.grad_clip},
        {"lr_decay_steps", cfg.train.lr_decay_steps},
    };
    j["codec"] = {
        {"kind", cfg.codec.kind},
        {"patch_size", cfg.codec.patch_size},
        {"latent_channels", cfg.codec.latent_channels},
        {"downsample_factor", cfg.codec.downsample_factor},
        {"hidden_channels", cfg.codec.hidden_channels},
        {"train_steps", cfg.codec.train_steps},
        {"train_batch", cfg.codec.train_batch},
        {"train_learning_rate", cfg.codec.train_learning_rate},
    };
    j["sampler"] = {
        {"num_steps", cfg.sampler.num_steps},
        {"scheme", cfg.sampler.scheme},
        {"seed", cfg.sampler.seed},
    };
    return j.dump(2) + "\n";
}

RunConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::config_error, std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) fail(ErrorCode::config_error, "config must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (k != "canvas" && k != "model" && k != "train" && k != "codec" && k != "sampler") {
            fail(ErrorCode::config_error, "unknown section '" + k + "'");
        }
    }

    RunConfig cfg;
    Section canvas(j, "canvas");
    canvas.get("width", cfg.canvas.width);
    canvas.get("height", cfg.canvas.height);
    canvas.get("channels", cfg.canvas.channels);
    canvas.get("margin", cfg.canvas.margin);
    canvas.get("background_value", cfg.canvas.background_value);
    canvas.get("foreground_value", cfg.canvas.foreground_value);
    canvas.finish();

    Section model(j, "model");
    model.get("width", cfg.model.width);
    model.get("depth", cfg.model.depth);
    model.get("encoder_depth", cfg.model.encoder_depth);
    model.get("heads", cfg.model.heads);
    model.get("patch_size", cfg.model.patch_size);
    model.get("time_embed_dim", cfg.model.time_embed_dim);
    model.get("cond_tokens", cfg.model.cond_tokens);
    model.get("mlp_ratio", cfg.model.mlp_ratio);
    model.get("output", cfg.model.output);
    model.get("time_floor", cfg.model.time_floor);
    model.finish();

    Section train(j, "train");
    train.get("steps", cfg.train.steps);
    train.get("batch_size", cfg.train.batch_size);
    train.get("learning_rate", cfg.train.learning_rate);
    train.get("swap_probability", cfg.train.swap_probability);
    train.get("seed", cfg.train.seed);
    train.get("checkpoint_every", cfg.train.checkpoint_every);
    train.get("optimizer", cfg.train.optimizer);
    train.get("adam_beta1", cfg.train.adam_beta1);
    train.get("adam_beta2", cfg.train.adam_beta2);
    train.get("adam_eps", cfg.train.adam_eps);
    train.get("weight_decay", cfg.train.weight_decay);
    train.get("grad_clip", cfg.train.grad_clip);
    train.get("lr_decay_steps", cfg.train.lr_decay_steps);
    train.finish();

    Section codec(j, "codec");
    codec.get("kind", cfg.codec.kind);
    codec.get("patch_size", cfg.codec.patch_size);
    codec.get("latent_channels", cfg.codec.latent_channels);
    codec.get("downsample_factor", cfg.codec.downsample_factor);
    codec.get("hidden_channels", cfg.codec.hidden_channels);
    codec.get("train_steps", cfg.codec.train_steps);
    codec.get("train_batch", cfg.codec.train_batch);
    codec.get("train_learning_rate", cfg.codec.train_learning_rate);
    codec.finish();

    Section sampler(j, "sampler");
    sampler.get("num_steps", cfg.sampler.num_steps);
    sampler.get("scheme", cfg.sampler.scheme);
    sampler.get("seed", cfg.sampler.seed);
    sampler.finish();

    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) fail(ErrorCode::missing_file, "config not found: " + path.string());
    return config_from_json(read_text_file(path));
}

}  // namespace unipix
