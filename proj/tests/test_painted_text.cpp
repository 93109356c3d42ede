// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <string>

#include "unipix/dataset.hpp"
#include "unipix/error.hpp"
#include "unipix/painted_text.hpp"
#include "unipix/rng.hpp"

using namespace unipix;

namespace {

const GlyphFont& font() { return GlyphFont::builtin(); }

std::string random_text(Rng& rng, std::size_t len) {
    const auto& cs = font().charset();
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s += cs[rng.below(cs.size())];
    return s;
}

// Canonical form of a random string: what rasterize actually draws.
std::string random_normalized(Rng& rng, std::size_t max_len) {
    std::string s = normalize_text(random_text(rng, 1 + rng.below(max_len)));
    return s;
}

int foreground_pixels(const PixelImage& img) {
    int n = 0;
    for (float v : img.data()) n += v > 0.0f ? 1 : 0;
    return n;
}

}  // namespace

TEST_SUITE("painted_text") {

TEST_CASE("capacity of the default and paper-sized canvases") {
    CanvasSpec spec;
    const GridCapacity c = capacity(spec, font());
    CHECK(c.cols == 10);
    CHECK(c.rows == 7);
    CHECK(c.total() == 70);

    CanvasSpec big;
    big.width = 512;
    big.height = 512;
    big.margin = 8;
    const GridCapacity b = capacity(big, font());
    CHECK(b.cols == 82);
    CHECK(b.rows == 62);
}

TEST_CASE("a canvas that is all margin has zero capacity") {
    CanvasSpec spec;
    spec.width = 4;
    spec.height = 4;
    spec.margin = 2;
    try {
        capacity(spec, font());
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::zero_capacity);
        CHECK(std::string(e.what()).find("zero capacity") != std::string::npos);
    }
}

TEST_CASE("builtin font covers the required charset") {
    for (char c = 'a'; c <= 'z'; ++c) CHECK(font().supports(c));
    for (char c = '0'; c <= '9'; ++c) CHECK(font().supports(c));
    CHECK(font().supports(' '));
    CHECK(font().supports('-'));
    CHECK(font().supports('.'));
    CHECK(font().charset().front() == ' ');
    for (char c : font().charset()) CHECK(font().bitmap(c).size() == 35u);
}

TEST_CASE("font table parses back to the same font") {
    const GlyphFont again = GlyphFont::parse(font().to_table(), 5, 7, 1, 1);
    CHECK(again.charset() == font().charset());
    for (char c : font().charset()) CHECK(again.bitmap(c) == font().bitmap(c));
    CHECK_THROWS_AS(GlyphFont::parse("a 0101\n", 5, 7, 1, 1), Error);
}

TEST_CASE("empty string gives a blank canvas") {
    CanvasSpec spec;
    const PaintedText p = rasterize("", spec, font());
    CHECK_FALSE(p.truncated);
    CHECK(p.glyph_boxes.empty());
    for (float v : p.image.data()) CHECK(v == spec.background_value);
    CHECK(decode(p.image, spec, font()).text.empty());
}

TEST_CASE("caption round trip") {
    CanvasSpec spec;
    const PaintedText p = rasterize("red circle", spec, font());
    CHECK(p.image.shape() == spec.shape());
    CHECK_FALSE(p.truncated);
    CHECK(decode(p.image, spec, font()).text == "red circle");
}

TEST_CASE("painted text is grayscale in RGB") {
    CanvasSpec spec;
    const PaintedText p = rasterize("large blue cross", spec, font());
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            CHECK(p.image.at(y, x, 0) == p.image.at(y, x, 1));
            CHECK(p.image.at(y, x, 1) == p.image.at(y, x, 2));
        }
}

TEST_CASE("a 100-character string on a 70-cell canvas is truncated to 70 glyphs") {
    CanvasSpec spec;
    std::string s;
    for (int i = 0; i < 100; ++i) s += static_cast<char>('a' + i % 26);
    const PaintedText p = rasterize(s, spec, font());
    CHECK(p.truncated);
    CHECK(p.glyph_boxes.size() == 70u);
    CHECK(decode(p.image, spec, font()).text == s.substr(0, 70));
}

TEST_CASE("unsupported characters are reported with their index") {
    CanvasSpec spec;
    try {
        rasterize("red_circle", spec, font());
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::unsupported_character);
        const std::string msg = e.what();
        CHECK(msg.find("'_'") != std::string::npos);
        CHECK(msg.find("index 3") != std::string::npos);
    }
}

TEST_CASE("normalization lowercases and collapses whitespace") {
    CHECK(normalize_text("  Red   CIRCLE\tleft ") == "red circle left");
    CHECK(normalize_text("") == "");
    CHECK(normalize_text("   ") == "");
    CanvasSpec spec;
    CHECK(rasterize("Small  Red Circle", spec, font()).image == rasterize("small red circle", spec, font()).image);
}

TEST_CASE("glyph boxes stay inside the writable area") {
    CanvasSpec spec;
    Rng rng(11);
    const GridCapacity cap = capacity(spec, font());
    for (int k = 0; k < 50; ++k) {
        const PaintedText p = rasterize(random_text(rng, 90), spec, font());
        for (const GlyphBox& b : p.glyph_boxes) {
            CHECK(b.row >= 0);
            CHECK(b.col >= 0);
            CHECK(b.row < cap.rows);
            CHECK(b.col < cap.cols);
            const int x1 = spec.margin + b.col * (font().cell_w() + font().h_spacing()) + font().cell_w();
            const int y1 = spec.margin + b.row * (font().cell_h() + font().v_spacing()) + font().cell_h();
            CHECK(x1 <= spec.width - spec.margin);
            CHECK(y1 <= spec.height - spec.margin);
        }
    }
}

TEST_CASE("words wrap at boundaries when they fit on a fresh line") {
    CanvasSpec spec;
    const PaintedText p = rasterize("small green triangle", spec, font());
    // "small green" fills 11 cells, so "green" starts row 1 and "triangle" row 2.
    std::string row0;
    std::string row1;
    for (const GlyphBox& b : p.glyph_boxes) {
        if (b.row == 0) row0 += b.ch;
        if (b.row == 1) row1 += b.ch;
    }
    CHECK(row0 == "small");
    CHECK(row1 == "green");
    CHECK(decode(p.image, spec, font()).text == "small green triangle");
}

TEST_CASE("round trip over random in-capacity strings") {
    CanvasSpec spec;
    Rng rng(7);
    int checked = 0;
    for (int k = 0; k < 2000; ++k) {
        const std::string s = random_normalized(rng, 70);
        const PaintedText p = rasterize(s, spec, font());
        if (p.truncated) continue;
        REQUIRE(decode(p.image, spec, font()).text == s);
        ++checked;
    }
    CHECK(checked > 1000);
}

TEST_CASE("edge layouts round trip") {
    CanvasSpec spec;
    for (const std::string s : {"abcdefghij klm", "abcdefghij", "abcdefghijk", "a b c d e f g h i j k l m n o",
                                "abcdefghi abcdefghij", ". - .", "0123456789 0123456789 0123456789"}) {
        const PaintedText p = rasterize(s, spec, font());
        CHECK_FALSE(p.truncated);
        CHECK(decode(p.image, spec, font()).text == s);
    }
}

TEST_CASE("rasterize is deterministic") {
    CanvasSpec spec;
    CHECK(rasterize("large white cross bottom", spec, font()) == rasterize("large white cross bottom", spec, font()));
}

TEST_CASE("changing one character only touches its cell") {
    CanvasSpec spec;
    const PaintedText a = rasterize("red circle", spec, font());
    const PaintedText b = rasterize("red circte", spec, font());
    REQUIRE(a.glyph_boxes.size() == b.glyph_boxes.size());
    const GlyphBox& cell = a.glyph_boxes[8];
    const int x0 = spec.margin + cell.col * (font().cell_w() + font().h_spacing());
    const int y0 = spec.margin + cell.row * (font().cell_h() + font().v_spacing());
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            const bool inside = x >= x0 && x < x0 + font().cell_w() && y >= y0 && y < y0 + font().cell_h();
            if (!inside) CHECK(a.image.at(y, x, 0) == b.image.at(y, x, 0));
        }
    CHECK_FALSE(a.image == b.image);
}

TEST_CASE("glyph boxes of a prefix are a prefix") {
    CanvasSpec spec;
    const std::string full = "large yellow triangle center and more words here";
    const PaintedText whole = rasterize(full, spec, font());
    for (std::size_t len : {5u, 12u, 21u, 28u}) {
        const PaintedText part = rasterize(full.substr(0, len), spec, font());
        REQUIRE(part.glyph_boxes.size() <= whole.glyph_boxes.size());
        for (std::size_t i = 0; i < part.glyph_boxes.size(); ++i) CHECK(part.glyph_boxes[i] == whole.glyph_boxes[i]);
    }
}

TEST_CASE("decoding survives 10% foreground flips with lower confidence") {
    CanvasSpec spec;
    const PaintedText clean = rasterize("cat", spec, font());
    const DecodedText ref = decode(clean.image, spec, font());
    PixelImage noisy = clean.image;
    Rng rng(3);
    const int fg = foreground_pixels(clean.image) / 3;
    int flipped = 0;
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x)
            if (noisy.at(y, x, 0) > 0.0f && rng.uniform() < 0.1) {
                for (int c = 0; c < 3; ++c) noisy.at(y, x, c) = spec.background_value;
                ++flipped;
            }
    REQUIRE(flipped > 0);
    CHECK(flipped < fg);
    const DecodedText d = decode(noisy, spec, font());
    CHECK(d.text == "cat");
    double before = 0;
    double after = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        before += ref.confidence[i];
        after += d.confidence[i];
    }
    CHECK(after < before);
}

TEST_CASE("decode rejects mismatched dimensions") {
    CanvasSpec spec;
    PixelImage wrong(32, 32, 3);
    CHECK_THROWS_AS(decode(wrong, spec, font()), Error);
}

TEST_CASE("glyph error rate examples") {
    CanvasSpec spec;
    CHECK(glyph_error_rate(rasterize("red circle", spec, font()).image, "red circle", spec, font()) == 0.0);
    CHECK(glyph_error_rate(PixelImage(spec.shape(), spec.background_value), "abcd", spec, font()) == 1.0);
    CHECK(glyph_error_rate(rasterize("red circls", spec, font()).image, "red circle", spec, font()) ==
          doctest::Approx(0.1));
}

TEST_CASE("levenshtein") {
    CHECK(levenshtein("", "") == 0u);
    CHECK(levenshtein("abc", "") == 3u);
    CHECK(levenshtein("kitten", "sitting") == 3u);
    CHECK(levenshtein("red circle", "red circls") == 1u);
}

TEST_CASE("every corpus caption fits and round trips") {
    CanvasSpec spec;
    for (int i = 0; i < kSceneGridSize; ++i) {
        const std::string cap = caption(scene_from_index(i));
        const PaintedText p = rasterize(cap, spec, font());
        CHECK_FALSE(p.truncated);
        CHECK(decode(p.image, spec, font()).text == cap);
    }
}

}  // TEST_SUITE
