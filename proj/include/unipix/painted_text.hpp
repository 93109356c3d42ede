// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "unipix/image.hpp"

namespace unipix {

// Fixed-size binary bitmap font. Bitmaps are row-major, cell_w * cell_h bits.
class GlyphFont {
public:
    // Parses the plain-text table format: one line per glyph,
    // `<char> <cell_w*cell_h bits as 0/1>`.
    static GlyphFont parse(std::string_view table, int cell_w, int cell_h, int h_spacing, int v_spacing);
    static GlyphFont load(const std::string& path, int cell_w, int cell_h, int h_spacing, int v_spacing);

    // Built-in 5x7 font covering a-z, 0-9, space, hyphen and period.
    static const GlyphFont& builtin();

    int cell_w() const { return cell_w_; }
    int cell_h() const { return cell_h_; }
    int h_spacing() const { return h_spacing_; }
    int v_spacing() const { return v_spacing_; }

    // Charset in file order; decoding ties break towards earlier entries.
    const std::vector<char>& charset() const { return charset_; }
    bool supports(char c) const { return bitmaps_.count(c) != 0; }
    const std::vector<bool>& bitmap(char c) const;

    std::string to_table() const;

private:
    int cell_w_ = 0;
    int cell_h_ = 0;
    int h_spacing_ = 0;
    int v_spacing_ = 0;
    std::vector<char> charset_;
    std::map<char, std::vector<bool>> bitmaps_;
};

struct CanvasSpec {
    int width = 64;
    int height = 64;
    int channels = 3;
    int margin = 2;
    float background_value = kPixelMin;
    float foreground_value = kPixelMax;

    ImageShape shape() const { return {height, width, channels}; }
    void validate() const;
    bool operator==(const CanvasSpec&) const = default;
};

struct GridCapacity {
    int cols = 0;
    int rows = 0;
    int total() const { return cols * rows; }
};

struct GlyphBox {
    char ch = ' ';
    int row = 0;
    int col = 0;
    bool operator==(const GlyphBox&) const = default;
};

struct PaintedText {
    PixelImage image;
    std::string source_text;
    bool truncated = false;
    // Every occupied grid cell in reading order, spaces included.
    std::vector<GlyphBox> glyph_boxes;
    bool operator==(const PaintedText&) const = default;
};

struct DecodedText {
    std::string text;
    // One score per character of `text`: distance margin between the best and
    // second-best glyph.
    std::vector<float> confidence;
};

GridCapacity capacity(const CanvasSpec& spec, const GlyphFont& font);

// Lowercases and collapses whitespace runs to single spaces, trimming both
// ends. Characters outside the charset are left in place for rasterize to
// reject.
std::string normalize_text(std::string_view text);

// Greedy word-wrapped layout of normalized text on the glyph grid.
// Words move to a fresh line when they fit there, otherwise split mid-word.
// Layout is invertible: rows that end mid-word are always full, rows ending at
// a word boundary never are, and a space that follows a full row is drawn in
// the first cell of the next row.
std::vector<GlyphBox> layout_text(std::string_view normalized, GridCapacity grid, bool* truncated);

PaintedText rasterize(std::string_view text, const CanvasSpec& spec, const GlyphFont& font);

DecodedText decode(const PixelImage& image, const CanvasSpec& spec, const GlyphFont& font);

std::size_t levenshtein(std::string_view a, std::string_view b);

// Character error rate of the decoded canvas against the reference string.
double glyph_error_rate(const PixelImage& predicted, std::string_view reference_text, const CanvasSpec& spec,
                        const GlyphFont& font);

}  // namespace unipix
