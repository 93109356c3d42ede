// SPDX-License-Identifier: Apache-2.0
#include "unipix/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "unipix/error.hpp"
#include "unipix/flow.hpp"
#include "unipix/io.hpp"

namespace unipix {

TrainingExample make_training_example(const Sample& sample, TaskDirection direction, const LatentCodec& codec) {
    TrainingExample ex;
    ex.direction = direction;
    if (direction == TaskDirection::understanding) {
        ex.cond_image = sample.rgb;
        ex.z0 = codec.encode(sample.painted.image);
    } else {
        ex.cond_image = sample.painted.image;
        ex.z0 = codec.encode(sample.rgb);
    }
    return ex;
}

TaskDirection sample_direction(Rng& rng, double swap_probability) {
    return rng.uniform() < swap_probability ? TaskDirection::understanding : TaskDirection::generation;
}

namespace {

std::unique_ptr<LatentCodec> build_codec(const RunConfig& cfg) { return make_codec(cfg.codec, cfg.canvas.shape()); }

std::unique_ptr<Backbone<float>> build_model(const RunConfig& cfg, const LatentCodec& codec) {
    return std::make_unique<Backbone<float>>(cfg.model, cfg.canvas.shape(), codec.layout());
}

NamedTensor to_tensor(const std::string& name, const nn::ParamInfo& info, const float* data) {
    NamedTensor t;
    t.name = name;
    t.dims = {static_cast<std::uint64_t>(info.rows), static_cast<std::uint64_t>(info.cols)};
    t.data.assign(data + info.offset, data + info.offset + info.size());
    return t;
}

void from_tensor(const Checkpoint& ckpt, const std::string& name, const nn::ParamInfo& info, float* dst) {
    const NamedTensor* t = ckpt.find(name);
    if (!t) fail(ErrorCode::format_error, "checkpoint lacks tensor '" + name + "'");
    const std::vector<std::uint64_t> dims{static_cast<std::uint64_t>(info.rows), static_cast<std::uint64_t>(info.cols)};
    if (t->dims != dims) fail(ErrorCode::shape_mismatch, "checkpoint tensor '" + name + "' has the wrong shape");
    std::copy(t->data.begin(), t->data.end(), dst + info.offset);
}

void restore_codec_weights(const Checkpoint& ckpt, LatentCodec& codec) {
    if (auto* ae = dynamic_cast<TinyAutoencoder*>(&codec)) {
        for (const auto& e : ae->params().entries()) from_tensor(ckpt, "codec." + e.name, e, ae->params().values().data());
    }
}

std::string join_t(const std::vector<float>& ts) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < ts.size(); ++i) os << (i ? ", " : "") << ts[i];
    os << "]";
    return os.str();
}

}  // namespace

LoadedModel restore_model(const Checkpoint& ckpt) {
    LoadedModel out;
    out.config = ckpt.config;
    out.config.validate();
    out.codec = build_codec(out.config);
    restore_codec_weights(ckpt, *out.codec);
    out.model = build_model(out.config, *out.codec);
    auto& p = out.model->params();
    for (const auto& e : p.entries()) from_tensor(ckpt, "model." + e.name, e, p.values().data());
    return out;
}

Trainer::Trainer(const RunConfig& cfg, const Corpus& corpus)
    : cfg_(cfg), corpus_(corpus), rng_(Rng::derive(cfg.train.seed, "train")) {
    cfg_.validate();
    check_corpus();
    codec_ = build_codec(cfg_);
    if (auto* ae = dynamic_cast<TinyAutoencoder*>(codec_.get())) {
        ae->init(Rng::derive(cfg_.train.seed, "codec-init"));
        train_autoencoder(*ae, corpus_, cfg_.codec.train_steps, cfg_.train.seed);
    }
    model_ = build_model(cfg_, *codec_);
    model_->init(cfg_.train.seed);
    adam_.reset(model_->params().size());
}

Trainer::Trainer(const Checkpoint& ckpt, const Corpus& corpus) : cfg_(ckpt.config), corpus_(corpus) {
    cfg_.validate();
    check_corpus();
    LoadedModel loaded = restore_model(ckpt);
    codec_ = std::move(loaded.codec);
    model_ = std::move(loaded.model);
    const auto& p = model_->params();
    adam_.reset(p.size());
    for (const auto& e : p.entries()) {
        from_tensor(ckpt, "adam.m." + e.name, e, adam_.m.data());
        from_tensor(ckpt, "adam.v." + e.name, e, adam_.v.data());
    }
    adam_.step = ckpt.adam_step;
    rng_.set_state(ckpt.rng_state);
    step_ = ckpt.step;
}

void Trainer::check_corpus() const {
    if (corpus_.samples.empty()) fail(ErrorCode::invalid_argument, "training corpus is empty");
    if (!(corpus_.canvas == cfg_.canvas)) {
        fail(ErrorCode::config_error, "corpus canvas does not match the config canvas");
    }
}

const std::vector<std::size_t>& Trainer::epoch_order(std::uint64_t epoch) const {
    if (epoch != cached_epoch_) {
        const std::size_t n = corpus_.samples.size();
        cached_order_.resize(n);
        for (std::size_t i = 0; i < n; ++i) cached_order_[i] = i;
        Rng r(Rng::derive(cfg_.train.seed, "data-order/" + std::to_string(epoch)));
        for (std::size_t i = n; i > 1; --i) std::swap(cached_order_[i - 1], cached_order_[r.below(i)]);
        cached_epoch_ = epoch;
    }
    return cached_order_;
}

std::vector<std::size_t> Trainer::batch_indices(std::uint64_t step) const {
    const std::uint64_t n = corpus_.samples.size();
    const std::uint64_t b = static_cast<std::uint64_t>(cfg_.train.batch_size);
    std::vector<std::size_t> out;
    for (std::uint64_t j = 0; j < b; ++j) {
        const std::uint64_t pos = step * b + j;
        out.push_back(epoch_order(pos / n)[pos % n]);
    }
    return out;
}

StepStats Trainer::step() {
    const auto indices = batch_indices(step_);
    const Eigen::Index batch = static_cast<Eigen::Index>(indices.size());
    const LatentLayout layout = codec_->layout();
    const Eigen::Index rows = layout.tokens();
    const Eigen::Index cols = layout.channels;

    std::vector<TrainingExample> examples;
    std::vector<TaskDirection> dirs;
    std::vector<float> ts;
    Mat<float> z0(batch * rows, cols);
    Mat<float> z1(batch * rows, cols);
    Mat<float> zt(batch * rows, cols);
    for (Eigen::Index b = 0; b < batch; ++b) {
        const TaskDirection dir = sample_direction(rng_, cfg_.train.swap_probability);
        const float t = static_cast<float>(sample_time(rng_));
        const Mat<float> prior = sample_prior(rng_, rows, cols);
        examples.push_back(make_training_example(corpus_.samples[indices[static_cast<std::size_t>(b)]], dir, *codec_));
        dirs.push_back(dir);
        ts.push_back(t);
        z0.middleRows(b * rows, rows) = examples.back().z0.data;
        z1.middleRows(b * rows, rows) = prior;
        zt.middleRows(b * rows, rows) = interpolate(examples.back().z0.data, prior, t).z_t;
    }
    std::vector<const PixelImage*> conds;
    for (const auto& ex : examples) conds.push_back(&ex.cond_image);

    Backbone<float>& model = *model_;
    typename Backbone<float>::EncoderTape etape;
    typename Backbone<float>::VelocityTape vtape;
    const Mat<float> cond = model.encode_batch(conds, dirs, etape);
    const Mat<float> v = model.velocity_batch(zt, ts, cond, vtape);

    StepStats stats;
    stats.step = step_ + 1;
    const Mat<float> target = velocity_target(z0, z1);
    const Mat<float> diff = v - target;
    double und = 0.0;
    double gen = 0.0;
    for (Eigen::Index b = 0; b < batch; ++b) {
        const double l = diff.middleRows(b * rows, rows).cast<double>().squaredNorm() / static_cast<double>(rows * cols);
        if (dirs[static_cast<std::size_t>(b)] == TaskDirection::understanding) {
            und += l;
            ++stats.n_und;
        } else {
            gen += l;
            ++stats.n_gen;
        }
    }
    stats.loss = (und + gen) / static_cast<double>(batch);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    stats.loss_und = stats.n_und ? und / stats.n_und : nan;
    stats.loss_gen = stats.n_gen ? gen / stats.n_gen : nan;
    if (!std::isfinite(stats.loss) || !v.allFinite()) {
        fail(ErrorCode::divergence, "non-finite loss at step " + std::to_string(stats.step) + " (understanding=" +
                                        std::to_string(stats.n_und) + ", generation=" + std::to_string(stats.n_gen) +
                                        ", t=" + join_t(ts) + ")");
    }

    auto& params = model.params();
    params.zero_grad();
    const Mat<float> dv = diff * static_cast<float>(2.0 / static_cast<double>(diff.size()));
    const auto grads = model.velocity_backward(vtape, dv);
    model.encode_backward(etape, grads.d_cond);
    stats.grad_norm = clip_grad_norm(params.grads(), cfg_.train.grad_clip);
    if (!std::isfinite(stats.grad_norm)) {
        fail(ErrorCode::divergence, "non-finite gradient at step " + std::to_string(stats.step) + " (t=" + join_t(ts) + ")");
    }

    AdamConfig adam;
    adam.learning_rate = cfg_.train.learning_rate_at(step_);
    adam.beta1 = cfg_.train.adam_beta1;
    adam.beta2 = cfg_.train.adam_beta2;
    adam.eps = cfg_.train.adam_eps;
    adam.weight_decay = cfg_.train.weight_decay;
    adam_update(params.values(), params.grads(), adam_, adam);
    ++step_;
    return stats;
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint ckpt;
    ckpt.config = cfg_;
    ckpt.step = step_;
    ckpt.rng_state = rng_.state();
    ckpt.adam_step = adam_.step;
    const auto& p = model_->params();
    for (const auto& e : p.entries()) ckpt.tensors.push_back(to_tensor("model." + e.name, e, p.values().data()));
    for (const auto& e : p.entries()) ckpt.tensors.push_back(to_tensor("adam.m." + e.name, e, adam_.m.data()));
    for (const auto& e : p.entries()) ckpt.tensors.push_back(to_tensor("adam.v." + e.name, e, adam_.v.data()));
    if (const auto* ae = dynamic_cast<const TinyAutoencoder*>(codec_.get())) {
        for (const auto& e : ae->params().entries()) {
            ckpt.tensors.push_back(to_tensor("codec." + e.name, e, ae->params().values().data()));
        }
    }
    return ckpt;
}

std::string format_metrics_line(const StepStats& s) {
    std::ostringstream os;
    os << std::setprecision(9) << s.step << '\t' << s.loss << '\t' << s.loss_und << '\t' << s.loss_gen << '\n';
    return os.str();
}

namespace {

// Drops metrics lines past `step`, so a resumed log matches an uninterrupted one.
void keep_metrics_through(const std::filesystem::path& path, std::uint64_t step) {
    std::string kept;
    if (std::filesystem::exists(path)) {
        std::istringstream in(read_text_file(path));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            if (std::stoull(line.substr(0, line.find('\t'))) > step) break;
            kept += line + '\n';
        }
    }
    write_text_file_atomic(path, kept);
}

}  // namespace

Checkpoint train(const Corpus& corpus, const RunConfig& cfg, const std::filesystem::path& out_dir,
                 std::ostream* progress, const Checkpoint* resume) {
    std::filesystem::create_directories(out_dir);
    std::unique_ptr<Trainer> trainer;
    if (resume) {
        // Only the schedule may change on resume.
        Checkpoint ck = *resume;
        RunConfig expected = ck.config;
        expected.train.steps = cfg.train.steps;
        expected.train.checkpoint_every = cfg.train.checkpoint_every;
        if (!(expected == cfg)) fail(ErrorCode::config_error, "resume config differs from the checkpoint's config");
        ck.config = cfg;
        trainer = std::make_unique<Trainer>(ck, corpus);
        keep_metrics_through(out_dir / "metrics.tsv", ck.step);
    } else {
        trainer = std::make_unique<Trainer>(cfg, corpus);
    }
    const std::uint64_t target = static_cast<std::uint64_t>(cfg.train.steps);
    const int every = cfg.train.checkpoint_every;

    write_text_file_atomic(out_dir / "config.json", config_to_json(trainer->config()));
    std::ofstream metrics(out_dir / "metrics.tsv", resume ? std::ios::app : std::ios::trunc);
    if (!metrics) fail(ErrorCode::io_error, "cannot open " + (out_dir / "metrics.tsv").string());

    double window = 0.0;
    int window_n = 0;
    while (trainer->steps_done() < target) {
        const StepStats s = trainer->step();
        metrics << format_metrics_line(s);
        window += s.loss;
        ++window_n;
        if (every > 0 && s.step % static_cast<std::uint64_t>(every) == 0) {
            metrics.flush();
            save_checkpoint(out_dir / ("ckpt_" + std::to_string(s.step) + ".unim"), trainer->checkpoint());
        }
        if (progress && (s.step % 100 == 0 || s.step == target)) {
            *progress << "step " << s.step << "/" << target << "  loss " << std::setprecision(5) << window / window_n
                      << std::endl;
            window = 0.0;
            window_n = 0;
        }
    }
    metrics.flush();
    if (!metrics) fail(ErrorCode::io_error, "failed writing metrics log");
    Checkpoint final_ckpt = trainer->checkpoint();
    save_checkpoint(out_dir / "final.unim", final_ckpt);
    return final_ckpt;
}

}  // namespace unipix
