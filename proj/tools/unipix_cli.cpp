// SPDX-License-Identifier: Apache-2.0
//
// unipix: command-line front end.
//
//   unipix gen-data    --n N --seed S --out DIR [--config FILE]
//   unipix train       --data DIR --config FILE --out DIR [--resume CKPT]
//   unipix caption     --ckpt FILE --image FILE [--seed S] [--out PNG]
//   unipix generate    --ckpt FILE --text STR [--seed S] [--out PNG]
//   unipix cycle       --ckpt FILE --image FILE [--seed S] [--rerasterize] [--out PNG]
//   unipix eval        --ckpt FILE --data DIR --out REPORT [--seed S] [--limit N] [--gallery DIR]
//   unipix decode-text --image FILE [--config FILE]
//
// Exit codes: 0 success, 1 runtime failure ("error: <class>: <message>" on
// one line of stderr), 2 usage error.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "unipix/checkpoint.hpp"
#include "unipix/config.hpp"
#include "unipix/dataset.hpp"
#include "unipix/error.hpp"
#include "unipix/image.hpp"
#include "unipix/io.hpp"
#include "unipix/painted_text.hpp"
#include "unipix/pipelines.hpp"
#include "unipix/trainer.hpp"

namespace {

using namespace unipix;

struct Inference {
    LoadedModel loaded;
    BackboneFlowModel flow;
    Pipeline pipeline;

    Inference(const std::string& ckpt_path, std::optional<int> steps)
        : loaded(restore_model(load_checkpoint(ckpt_path))),
          flow(*loaded.model),
          pipeline{flow, *loaded.codec, loaded.config.canvas, GlyphFont::builtin(), loaded.config.sampler} {
        if (steps) {
            pipeline.sampler.num_steps = *steps;
            pipeline.sampler.validate();
        }
    }
    std::uint64_t seed(std::optional<std::uint64_t> s) const { return s.value_or(loaded.config.sampler.seed); }
};

std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    unipix::retain_heap_memory();
    CLI::App app{"Bidirectional image <-> painted-text rectified-flow toolkit", "unipix"};
    app.require_subcommand(1);

    // gen-data
    int n = 200;
    std::uint64_t data_seed = 0;
    std::string out;
    std::string config_path;
    auto* gen = app.add_subcommand("gen-data", "Generate and save a toy scene corpus");
    gen->add_option("--n", n, "Number of samples")->required()->check(CLI::PositiveNumber);
    gen->add_option("--seed", data_seed, "Corpus seed")->required();
    gen->add_option("--out", out, "Output directory")->required();
    gen->add_option("--config", config_path, "Take the canvas from this run config");

    // train
    std::string data_dir;
    std::string resume_path;
    auto* train_cmd = app.add_subcommand("train", "Train the bidirectional model");
    train_cmd->add_option("--data", data_dir, "Corpus directory")->required();
    train_cmd->add_option("--config", config_path, "Run config (JSON)")->required();
    train_cmd->add_option("--out", out, "Run output directory")->required();
    train_cmd->add_option("--resume", resume_path, "Continue from this checkpoint");

    // inference
    std::string ckpt_path;
    std::string image_path;
    std::string text;
    std::optional<std::uint64_t> seed;
    std::optional<int> sampler_steps;
    bool rerasterize = false;
    int limit = 0;
    std::string gallery;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
        cmd->add_option("--seed", seed, "Sampling seed (default: the checkpoint's sampler seed)");
        cmd->add_option("--sampler-steps", sampler_steps, "Override the number of Euler steps");
    };
    auto* caption_cmd = app.add_subcommand("caption", "Image -> painted text");
    add_common(caption_cmd);
    caption_cmd->add_option("--image", image_path, "Input RGB PNG")->required();
    caption_cmd->add_option("--out", out, "Where to write the painted prediction");

    auto* generate_cmd = app.add_subcommand("generate", "Text -> image");
    add_common(generate_cmd);
    generate_cmd->add_option("--text", text, "Caption to render")->required();
    generate_cmd->add_option("--out", out, "Output PNG");

    auto* cycle_cmd = app.add_subcommand("cycle", "Image -> painted text -> image");
    add_common(cycle_cmd);
    cycle_cmd->add_option("--image", image_path, "Input RGB PNG")->required();
    cycle_cmd->add_flag("--rerasterize", rerasterize, "Condition generation on a clean rendering of the decoded text");
    cycle_cmd->add_option("--out", out, "Triptych PNG (input | painted | reconstruction)");

    auto* eval_cmd = app.add_subcommand("eval", "Corpus-level metrics");
    add_common(eval_cmd);
    eval_cmd->add_option("--data", data_dir, "Corpus directory")->required();
    eval_cmd->add_option("--out", out, "Report file (JSON)")->required();
    eval_cmd->add_option("--limit", limit, "Evaluate only the first N samples")->check(CLI::NonNegativeNumber);
    eval_cmd->add_option("--gallery", gallery, "Write triptychs of the first samples here");
    eval_cmd->add_flag("--rerasterize", rerasterize, "Cycle variant with re-rasterized captions");

    auto* decode_cmd = app.add_subcommand("decode-text", "Read the text painted on a canvas");
    decode_cmd->add_option("--image", image_path, "Painted-text PNG")->required();
    decode_cmd->add_option("--config", config_path, "Take the canvas from this run config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        const GlyphFont& font = GlyphFont::builtin();
        if (gen->parsed()) {
            CanvasSpec canvas;
            if (!config_path.empty()) canvas = load_config(config_path).canvas;
            save_corpus(out, generate_corpus(n, data_seed, canvas, font));
            std::cout << "wrote " << n << " samples to " << out << "\n";
        } else if (train_cmd->parsed()) {
            const RunConfig cfg = load_config(config_path);
            const Corpus corpus = load_corpus(data_dir, font);
            std::optional<Checkpoint> resume;
            if (!resume_path.empty()) resume = load_checkpoint(resume_path);
            const Checkpoint ckpt = train(corpus, cfg, out, &std::cout, resume ? &*resume : nullptr);
            std::cout << "final checkpoint at step " << ckpt.step << ": " << out << "/final.unim\n";
        } else if (caption_cmd->parsed()) {
            Inference inf(ckpt_path, sampler_steps);
            const CaptionResult r = image_to_text(inf.pipeline, read_png(image_path), inf.seed(seed));
            if (out.empty()) out = "caption.png";
            write_png(out, r.painted);
            std::cout << r.text << "\n";
        } else if (generate_cmd->parsed()) {
            Inference inf(ckpt_path, sampler_steps);
            if (out.empty()) out = "generated.png";
            write_png(out, text_to_image(inf.pipeline, text, inf.seed(seed)));
            std::cout << out << "\n";
        } else if (cycle_cmd->parsed()) {
            Inference inf(ckpt_path, sampler_steps);
            const PixelImage input = read_png(image_path);
            const CycleResult r = cycle(inf.pipeline, input, inf.seed(seed), rerasterize);
            if (out.empty()) out = "cycle.png";
            write_png(out, triptych(input, r.generation_input, r.reconstruction));
            std::cout << r.caption.text << "\n";
        } else if (eval_cmd->parsed()) {
            Inference inf(ckpt_path, sampler_steps);
            const Corpus corpus = load_corpus(data_dir, font);
            EvalOptions opts;
            opts.seed = inf.seed(seed);
            opts.limit = limit;
            opts.rerasterize = rerasterize;
            if (!gallery.empty()) opts.gallery_dir = gallery;
            const MetricsReport report = evaluate(inf.pipeline, corpus, opts);
            write_report(out, report);
            std::cout << report_to_json(report);
        } else if (decode_cmd->parsed()) {
            const PixelImage image = read_png(image_path);
            CanvasSpec canvas;
            if (!config_path.empty()) {
                canvas = load_config(config_path).canvas;
            } else {
                canvas.width = image.width();
                canvas.height = image.height();
                canvas.channels = image.channels();
            }
            std::cout << decode(image, canvas, font).text << "\n";
        }
    } catch (const unipix::Error& e) {
        std::cerr << "error: " << error_code_name(e.code()) << ": " << one_line(e.what()) << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << one_line(e.what()) << "\n";
        return 1;
    }
    return 0;
}
