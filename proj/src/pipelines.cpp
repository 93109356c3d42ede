// SPDX-License-Identifier: Apache-2.0
#include "unipix/pipelines.hpp"

#include <cstdio>
#include <numeric>
#include <algorithm>

#include <json.hpp>

#include "unipix/error.hpp"
#include "unipix/io.hpp"
#include "unipix/scene_classifier.hpp"

namespace unipix {

Latent sample_latent(const Pipeline& p, const PixelImage& cond_image, TaskDirection direction, std::uint64_t seed) {
    if (cond_image.shape() != p.canvas.shape()) {
        fail(ErrorCode::shape_mismatch, "input image does not match the model canvas");
    }
    const LatentLayout layout = p.codec.layout();
    const Mat<float> cond = p.model.condition(cond_image, direction);
    Rng rng(Rng::derive(seed, "sample"));
    const Mat<float> z1 = sample_prior(rng, layout.tokens(), layout.channels);
    const VelocityFn field = [&](const Mat<float>& z, float t) { return p.model.velocity(z, t, cond); };
    Latent out;
    out.data = euler_sample(field, z1, p.sampler);
    out.codec_id = p.codec.id();
    out.source_shape = p.codec.image_shape();
    out.layout = layout;
    return out;
}

CaptionResult image_to_text(const Pipeline& p, const PixelImage& rgb, std::uint64_t seed) {
    CaptionResult r;
    r.painted = p.codec.decode(sample_latent(p, rgb, TaskDirection::understanding, seed));
    DecodedText d = decode(r.painted, p.canvas, p.font);
    r.text = std::move(d.text);
    r.confidence = std::move(d.confidence);
    if (!r.confidence.empty()) {
        r.mean_confidence = std::accumulate(r.confidence.begin(), r.confidence.end(), 0.0) /
                            static_cast<double>(r.confidence.size());
    }
    return r;
}

PixelImage painted_to_image(const Pipeline& p, const PixelImage& painted, std::uint64_t seed) {
    return p.codec.decode(sample_latent(p, painted, TaskDirection::generation, seed));
}

PixelImage text_to_image(const Pipeline& p, std::string_view text, std::uint64_t seed) {
    return painted_to_image(p, rasterize(text, p.canvas, p.font).image, seed);
}

CycleResult cycle(const Pipeline& p, const PixelImage& rgb, std::uint64_t seed, bool rerasterize) {
    CycleResult r;
    r.caption = image_to_text(p, rgb, seed);
    r.generation_input = rerasterize ? unipix::rasterize(r.caption.text, p.canvas, p.font).image : r.caption.painted;
    r.reconstruction = painted_to_image(p, r.generation_input, seed);
    return r;
}

PixelImage triptych(const PixelImage& input, const PixelImage& painted, const PixelImage& reconstruction) {
    return hconcat({input, painted, reconstruction});
}

namespace {

bool same_shape_color(const SceneSpec& a, const SceneSpec& b) { return a.shape == b.shape && a.color == b.color; }

std::string gallery_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d.png", index);
    return buf;
}

}  // namespace

MetricsReport evaluate(const Pipeline& p, const Corpus& corpus, const EvalOptions& opts) {
    if (corpus.samples.empty()) fail(ErrorCode::invalid_argument, "cannot evaluate on an empty corpus");
    int n = static_cast<int>(corpus.samples.size());
    if (opts.limit > 0 && opts.limit < n) n = opts.limit;
    if (opts.gallery_dir) std::filesystem::create_directories(*opts.gallery_dir);

    MetricsReport r;
    r.samples = n;
    r.seed = opts.seed;
    r.sampler_steps = p.sampler.num_steps;
    int exact = 0;
    int gen_ok = 0;
    int gen_sc = 0;
    int cyc_ok = 0;
    int cyc_sc = 0;
    double cer = 0.0;
    double conf = 0.0;
    for (int i = 0; i < n; ++i) {
        const Sample& s = corpus.samples[static_cast<std::size_t>(i)];
        const std::uint64_t seed = opts.seed + static_cast<std::uint64_t>(i);
        const std::string reference = caption(s.scene);

        // The cycle's first half is exactly the captioning run for this seed.
        const CycleResult c = cycle(p, s.rgb, seed, opts.rerasterize);
        exact += c.caption.text == reference ? 1 : 0;
        cer += std::min(1.0, static_cast<double>(levenshtein(c.caption.text, reference)) /
                                 static_cast<double>(std::max<std::size_t>(1, reference.size())));
        conf += c.caption.mean_confidence;

        const SceneClassification cyc = classify_scene(c.reconstruction);
        cyc_ok += !cyc.no_foreground && cyc.scene.same_scene(s.scene) ? 1 : 0;
        cyc_sc += !cyc.no_foreground && same_shape_color(cyc.scene, s.scene) ? 1 : 0;

        const PixelImage generated = painted_to_image(p, s.painted.image, seed);
        const SceneClassification gen = classify_scene(generated);
        gen_ok += !gen.no_foreground && gen.scene.same_scene(s.scene) ? 1 : 0;
        gen_sc += !gen.no_foreground && same_shape_color(gen.scene, s.scene) ? 1 : 0;

        if (opts.gallery_dir && i < opts.gallery_count) {
            write_png(*opts.gallery_dir / gallery_name(i), triptych(s.rgb, c.caption.painted, c.reconstruction));
        }
    }
    const double dn = static_cast<double>(n);
    r.caption_exact_match = exact / dn;
    r.char_error_rate = cer / dn;
    r.mean_caption_confidence = conf / dn;
    r.generation_scene_accuracy = gen_ok / dn;
    r.generation_shape_color_accuracy = gen_sc / dn;
    r.cycle_scene_accuracy = cyc_ok / dn;
    r.cycle_shape_color_accuracy = cyc_sc / dn;
    return r;
}

std::string report_to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["samples"] = r.samples;
    j["seed"] = r.seed;
    j["sampler_steps"] = r.sampler_steps;
    j["caption_exact_match"] = r.caption_exact_match;
    j["char_error_rate"] = r.char_error_rate;
    j["mean_caption_confidence"] = r.mean_caption_confidence;
    j["generation_scene_accuracy"] = r.generation_scene_accuracy;
    j["generation_shape_color_accuracy"] = r.generation_shape_color_accuracy;
    j["cycle_scene_accuracy"] = r.cycle_scene_accuracy;
    j["cycle_shape_color_accuracy"] = r.cycle_shape_color_accuracy;
    return j.dump(2) + "\n";
}

void write_report(const std::filesystem::path& path, const MetricsReport& r) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_text_file_atomic(path, report_to_json(r));
}

}  // namespace unipix
