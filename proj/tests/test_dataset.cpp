// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <fstream>
#include <set>

#include "test_support.hpp"
#include "unipix/dataset.hpp"
#include "unipix/error.hpp"
#include "unipix/io.hpp"

using namespace unipix;

namespace {

struct Stats {
    int count = 0;
    double cx = 0;
    double cy = 0;
    double mean[3] = {0, 0, 0};
};

// Independent pixel-counting oracle: foreground is any pixel that is not the
// black background.
Stats pixel_stats(const PixelImage& img) {
    Stats s;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            bool fg = false;
            for (int c = 0; c < 3; ++c) fg = fg || img.at(y, x, c) > kPixelMin;
            if (fg) {
                ++s.count;
                s.cx += x + 0.5;
                s.cy += y + 0.5;
            }
        }
    if (s.count) {
        s.cx /= s.count;
        s.cy /= s.count;
    }
    for (int c = 0; c < 3; ++c) {
        double sum = 0;
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) sum += img.at(y, x, c);
        s.mean[c] = sum / (img.height() * img.width());
    }
    return s;
}

SceneSpec scene(Shape sh, Color co, Size si, Position po) {
    SceneSpec s;
    s.shape = sh;
    s.color = co;
    s.size = si;
    s.position = po;
    return s;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("scene grid enumeration is a bijection") {
    std::set<std::string> captions;
    for (int i = 0; i < kSceneGridSize; ++i) {
        const SceneSpec s = scene_from_index(i);
        CHECK(scene_index(s) == i);
        captions.insert(caption(s));
    }
    CHECK(captions.size() == 200u);
    CHECK_THROWS_AS(scene_from_index(200), Error);
}

TEST_CASE("caption template and parsing") {
    const SceneSpec s = scene(Shape::circle, Color::red, Size::small, Position::left);
    CHECK(caption(s) == "small red circle left");
    const auto parsed = parse_caption("small red circle left");
    REQUIRE(parsed.has_value());
    CHECK(parsed->same_scene(s));
    CHECK_FALSE(parse_caption("small red blob left").has_value());
    CHECK_FALSE(parse_caption("small red circle").has_value());
}

TEST_CASE("large red circle at the center") {
    CanvasSpec spec;
    const PixelImage img = render_scene(scene(Shape::circle, Color::red, Size::large, Position::center), spec);
    const Stats s = pixel_stats(img);
    CHECK(s.mean[0] > s.mean[1] + 0.1);
    CHECK(s.mean[0] > s.mean[2] + 0.1);
    CHECK(std::abs(s.cx - 32.0) <= 1.0);
    CHECK(std::abs(s.cy - 32.0) <= 1.0);
}

TEST_CASE("rendering is deterministic and size-ordered") {
    CanvasSpec spec;
    for (int i = 0; i < kSceneGridSize; ++i) {
        SceneSpec s = scene_from_index(i);
        CHECK(render_scene(s, spec) == render_scene(s, spec));
        if (s.size == Size::small) {
            SceneSpec big = s;
            big.size = Size::large;
            CHECK(pixel_stats(render_scene(s, spec)).count < pixel_stats(render_scene(big, spec)).count);
        }
    }
}

TEST_CASE("shapes sit at their anchors") {
    CanvasSpec spec;
    const auto left = pixel_stats(render_scene(scene(Shape::square, Color::white, Size::small, Position::left), spec));
    const auto right = pixel_stats(render_scene(scene(Shape::square, Color::white, Size::small, Position::right), spec));
    const auto top = pixel_stats(render_scene(scene(Shape::square, Color::white, Size::small, Position::top), spec));
    CHECK(left.cx < 24);
    CHECK(right.cx > 40);
    CHECK(top.cy < 24);
}

TEST_CASE("corpus generation is deterministic") {
    CanvasSpec spec;
    const Corpus a = generate_corpus(50, 9, spec, GlyphFont::builtin());
    const Corpus b = generate_corpus(50, 9, spec, GlyphFont::builtin());
    CHECK(a == b);
    const Corpus c = generate_corpus(50, 10, spec, GlyphFont::builtin());
    CHECK_FALSE(a == c);
}

TEST_CASE("a 200-sample corpus holds every scene exactly once") {
    CanvasSpec spec;
    const Corpus c = generate_corpus(200, 0, spec, GlyphFont::builtin());
    std::set<int> seen;
    for (const Sample& s : c.samples) seen.insert(scene_index(s.scene));
    CHECK(seen.size() == 200u);
}

TEST_CASE("larger corpora still cover the grid") {
    CanvasSpec spec;
    const Corpus c = generate_corpus(450, 4, spec, GlyphFont::builtin());
    std::set<int> seen;
    for (const Sample& s : c.samples) seen.insert(scene_index(s.scene));
    CHECK(seen.size() == 200u);
}

TEST_CASE("one-sample corpus satisfies the sample invariants") {
    CanvasSpec spec;
    const Corpus c = generate_corpus(1, 3, spec, GlyphFont::builtin());
    REQUIRE(c.samples.size() == 1u);
    const Sample& s = c.samples[0];
    CHECK(s.rgb.shape() == s.painted.image.shape());
    CHECK(s.painted == rasterize(caption(s.scene), spec, GlyphFont::builtin()));
    CHECK(s.rgb == render_scene(s.scene, spec));
    CHECK_THROWS_AS(generate_corpus(0, 3, spec, GlyphFont::builtin()), Error);
}

TEST_CASE("save and load round trip") {
    const auto dir = testing::temp_dir("corpus_rt");
    CanvasSpec spec;
    const Corpus c = generate_corpus(12, 5, spec, GlyphFont::builtin());
    save_corpus(dir, c);
    CHECK(std::filesystem::exists(dir / "manifest"));
    CHECK(std::filesystem::exists(dir / "0000_rgb.png"));
    CHECK(std::filesystem::exists(dir / "0011_txt.png"));
    CHECK(std::filesystem::exists(dir / "0011_scene"));
    CHECK(load_corpus(dir, GlyphFont::builtin()) == c);
}

TEST_CASE("load failures are reported distinctly") {
    CanvasSpec spec;
    const Corpus c = generate_corpus(4, 5, spec, GlyphFont::builtin());
    auto code_of = [](const std::filesystem::path& dir) {
        try {
            load_corpus(dir, GlyphFont::builtin());
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::invalid_argument;
    };

    SUBCASE("missing directory") { CHECK(code_of(testing::temp_dir("corpus_none") / "nope") == ErrorCode::missing_file); }

    SUBCASE("truncated sample file") {
        const auto dir = testing::temp_dir("corpus_trunc");
        save_corpus(dir, c);
        const auto bytes = read_file_bytes(dir / "0002_rgb.png");
        write_file_atomic(dir / "0002_rgb.png", std::span(bytes.data(), bytes.size() / 2));
        CHECK(code_of(dir) == ErrorCode::checksum_mismatch);
    }

    SUBCASE("missing sample file") {
        const auto dir = testing::temp_dir("corpus_missing");
        save_corpus(dir, c);
        std::filesystem::remove(dir / "0001_scene");
        CHECK(code_of(dir) == ErrorCode::missing_file);
    }

    SUBCASE("version mismatch") {
        const auto dir = testing::temp_dir("corpus_version");
        save_corpus(dir, c);
        std::string m = read_text_file(dir / "manifest");
        const auto pos = m.find("\"version\": 1");
        REQUIRE(pos != std::string::npos);
        m.replace(pos, 12, "\"version\": 7");
        write_text_file_atomic(dir / "manifest", m);
        CHECK(code_of(dir) == ErrorCode::version_mismatch);
    }

    SUBCASE("garbled manifest") {
        const auto dir = testing::temp_dir("corpus_garbled");
        save_corpus(dir, c);
        write_text_file_atomic(dir / "manifest", "{ not json");
        CHECK(code_of(dir) == ErrorCode::format_error);
    }
}

TEST_CASE("empty corpus is rejected at save") {
    Corpus empty;
    CHECK_THROWS_AS(save_corpus(testing::temp_dir("corpus_empty"), empty), Error);
}

}  // TEST_SUITE
