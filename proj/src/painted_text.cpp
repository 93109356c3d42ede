// SPDX-License-Identifier: Apache-2.0
#include "unipix/painted_text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

#include "unipix/error.hpp"
#include "unipix_font_data.hpp"

namespace unipix {

GlyphFont GlyphFont::parse(std::string_view table, int cell_w, int cell_h, int h_spacing, int v_spacing) {
    if (cell_w <= 0 || cell_h <= 0 || h_spacing < 0 || v_spacing < 0) {
        fail(ErrorCode::invalid_argument, "font cell dimensions must be positive");
    }
    GlyphFont font;
    font.cell_w_ = cell_w;
    font.cell_h_ = cell_h;
    font.h_spacing_ = h_spacing;
    font.v_spacing_ = v_spacing;

    const std::size_t bits = static_cast<std::size_t>(cell_w) * static_cast<std::size_t>(cell_h);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < table.size()) {
        std::size_t end = table.find('\n', pos);
        if (end == std::string_view::npos) end = table.size();
        std::string_view line = table.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        // The glyph character is positional so that space can be described.
        if (line.size() != bits + 2 || line[1] != ' ') {
            fail(ErrorCode::format_error, "font line " + std::to_string(line_no) + ": expected '<char> <" +
                                              std::to_string(bits) + " bits>'");
        }
        const char ch = line[0];
        if (font.bitmaps_.count(ch)) {
            fail(ErrorCode::format_error, "font line " + std::to_string(line_no) + ": duplicate glyph '" +
                                              std::string(1, ch) + "'");
        }
        std::vector<bool> bitmap(bits);
        for (std::size_t i = 0; i < bits; ++i) {
            const char b = line[2 + i];
            if (b != '0' && b != '1') {
                fail(ErrorCode::format_error, "font line " + std::to_string(line_no) + ": non-binary bitmap");
            }
            bitmap[i] = b == '1';
        }
        font.charset_.push_back(ch);
        font.bitmaps_.emplace(ch, std::move(bitmap));
    }

    for (char required : std::string("abcdefghijklmnopqrstuvwxyz0123456789 ")) {
        if (!font.supports(required)) {
            fail(ErrorCode::format_error, std::string("font lacks required glyph '") + required + "'");
        }
    }
    return font;
}

GlyphFont GlyphFont::load(const std::string& path, int cell_w, int cell_h, int h_spacing, int v_spacing) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::missing_file, "cannot open font file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), cell_w, cell_h, h_spacing, v_spacing);
}

const GlyphFont& GlyphFont::builtin() {
    static const GlyphFont font = parse(kBuiltinFontTable, 5, 7, 1, 1);
    return font;
}

const std::vector<bool>& GlyphFont::bitmap(char c) const {
    auto it = bitmaps_.find(c);
    if (it == bitmaps_.end()) fail(ErrorCode::unsupported_character, std::string("no glyph for '") + c + "'");
    return it->second;
}

std::string GlyphFont::to_table() const {
    std::string out;
    for (char c : charset_) {
        out += c;
        out += ' ';
        for (bool b : bitmaps_.at(c)) out += b ? '1' : '0';
        out += '\n';
    }
    return out;
}

void CanvasSpec::validate() const {
    if (width <= 0 || height <= 0 || channels <= 0 || margin < 0) {
        fail(ErrorCode::config_error, "canvas dimensions must be positive");
    }
    if (background_value == foreground_value) {
        fail(ErrorCode::config_error, "canvas background and foreground values must differ");
    }
}

GridCapacity capacity(const CanvasSpec& spec, const GlyphFont& font) {
    if (spec.width <= 0 || spec.height <= 0 || font.cell_w() <= 0 || font.cell_h() <= 0) {
        fail(ErrorCode::invalid_argument, "canvas and font dimensions must be positive");
    }
    const int usable_w = spec.width - 2 * spec.margin;
    const int usable_h = spec.height - 2 * spec.margin;
    GridCapacity cap;
    cap.cols = usable_w > 0 ? usable_w / (font.cell_w() + font.h_spacing()) : 0;
    cap.rows = usable_h > 0 ? usable_h / (font.cell_h() + font.v_spacing()) : 0;
    if (cap.cols <= 0 || cap.rows <= 0) {
        fail(ErrorCode::zero_capacity, "zero capacity: canvas " + std::to_string(spec.width) + "x" +
                                           std::to_string(spec.height) + " cannot hold a single glyph cell");
    }
    return cap;
}

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char raw : text) {
        const auto uc = static_cast<unsigned char>(raw);
        if (std::isspace(uc)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += static_cast<char>(std::tolower(uc));
    }
    return out;
}

std::vector<GlyphBox> layout_text(std::string_view normalized, GridCapacity grid, bool* truncated) {
    std::vector<GlyphBox> boxes;
    int row = 0;
    int col = 0;
    bool dropped = false;

    auto place = [&](char c) {
        if (row >= grid.rows) return false;
        boxes.push_back({c, row, col});
        ++col;
        return true;
    };
    auto newline = [&] {
        ++row;
        col = 0;
    };

    std::size_t pos = 0;
    bool first = true;
    while (pos <= normalized.size() && !dropped) {
        std::size_t end = normalized.find(' ', pos);
        if (end == std::string_view::npos) end = normalized.size();
        const std::string_view word = normalized.substr(pos, end - pos);
        pos = end + 1;
        if (word.empty()) {
            if (end == normalized.size()) break;
            continue;
        }
        const int len = static_cast<int>(word.size());

        if (!first) {
            if (col == grid.cols) {
                newline();
                if (!place(' ')) {
                    dropped = true;
                    break;
                }
            } else if (col + 1 + len <= grid.cols) {
                place(' ');
            } else if (len <= grid.cols) {
                newline();  // the separating space is absorbed by the line break
            } else {
                place(' ');
            }
        }
        first = false;

        for (char c : word) {
            if (col == grid.cols) newline();
            if (!place(c)) {
                dropped = true;
                break;
            }
        }
    }
    if (truncated) *truncated = dropped;
    return boxes;
}

namespace {

void check_charset(std::string_view text, const GlyphFont& font) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (!font.supports(text[i])) {
            const auto code = static_cast<unsigned>(static_cast<unsigned char>(text[i]));
            fail(ErrorCode::unsupported_character,
                 "unsupported character '" + std::string(1, text[i]) + "' (code " + std::to_string(code) +
                     ") at index " + std::to_string(i));
        }
    }
}

int cell_x(const CanvasSpec& spec, const GlyphFont& font, int col) {
    return spec.margin + col * (font.cell_w() + font.h_spacing());
}

int cell_y(const CanvasSpec& spec, const GlyphFont& font, int row) {
    return spec.margin + row * (font.cell_h() + font.v_spacing());
}

}  // namespace

PaintedText rasterize(std::string_view text, const CanvasSpec& spec, const GlyphFont& font) {
    spec.validate();
    const GridCapacity grid = capacity(spec, font);
    const std::string normalized = normalize_text(text);
    check_charset(normalized, font);

    PaintedText out;
    out.image = PixelImage(spec.shape(), spec.background_value);
    out.source_text = normalized;
    out.glyph_boxes = layout_text(normalized, grid, &out.truncated);

    for (const GlyphBox& box : out.glyph_boxes) {
        const auto& bits = font.bitmap(box.ch);
        const int x0 = cell_x(spec, font, box.col);
        const int y0 = cell_y(spec, font, box.row);
        for (int gy = 0; gy < font.cell_h(); ++gy) {
            for (int gx = 0; gx < font.cell_w(); ++gx) {
                if (!bits[static_cast<std::size_t>(gy * font.cell_w() + gx)]) continue;
                for (int c = 0; c < spec.channels; ++c) out.image.at(y0 + gy, x0 + gx, c) = spec.foreground_value;
            }
        }
    }
    return out;
}

DecodedText decode(const PixelImage& image, const CanvasSpec& spec, const GlyphFont& font) {
    if (image.shape() != spec.shape()) {
        fail(ErrorCode::shape_mismatch, "decode: image is " + std::to_string(image.height()) + "x" +
                                            std::to_string(image.width()) + "x" + std::to_string(image.channels()) +
                                            ", canvas expects " + std::to_string(spec.height) + "x" +
                                            std::to_string(spec.width) + "x" + std::to_string(spec.channels));
    }
    const GridCapacity grid = capacity(spec, font);
    const auto& charset = font.charset();
    const int cw = font.cell_w();
    const int ch = font.cell_h();
    const double norm = 1.0 / (static_cast<double>(cw) * ch * spec.channels);

    std::vector<std::string> rows(static_cast<std::size_t>(grid.rows), std::string(static_cast<std::size_t>(grid.cols), ' '));
    std::vector<std::vector<float>> margins(static_cast<std::size_t>(grid.rows),
                                            std::vector<float>(static_cast<std::size_t>(grid.cols), 0.0f));

    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            const int x0 = cell_x(spec, font, c);
            const int y0 = cell_y(spec, font, r);
            double best = std::numeric_limits<double>::infinity();
            double second = std::numeric_limits<double>::infinity();
            char best_char = ' ';
            for (char g : charset) {
                const auto& bits = font.bitmap(g);
                double dist = 0.0;
                for (int gy = 0; gy < ch; ++gy) {
                    for (int gx = 0; gx < cw; ++gx) {
                        const float ref = bits[static_cast<std::size_t>(gy * cw + gx)] ? spec.foreground_value
                                                                                       : spec.background_value;
                        for (int k = 0; k < spec.channels; ++k) {
                            const double d = static_cast<double>(image.at(y0 + gy, x0 + gx, k)) - ref;
                            dist += d * d;
                        }
                    }
                }
                dist *= norm;
                if (dist < best) {
                    second = best;
                    best = dist;
                    best_char = g;
                } else if (dist < second) {
                    second = dist;
                }
            }
            rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = best_char;
            margins[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = static_cast<float>(second - best);
        }
    }

    int last = -1;
    for (int r = 0; r < grid.rows; ++r) {
        if (rows[static_cast<std::size_t>(r)].find_first_not_of(' ') != std::string::npos) last = r;
    }

    DecodedText out;
    for (int r = 0; r <= last; ++r) {
        const std::string& row = rows[static_cast<std::size_t>(r)];
        const auto& conf = margins[static_cast<std::size_t>(r)];
        const std::size_t kept = row.find_last_not_of(' ') + 1;  // npos + 1 == 0 for a blank row
        for (std::size_t i = 0; i < kept; ++i) {
            out.text += row[i];
            out.confidence.push_back(conf[i]);
        }
        if (r == last || kept == row.size()) continue;  // full rows continue mid-word
        out.text += ' ';
        out.confidence.push_back(*std::min_element(conf.begin() + static_cast<std::ptrdiff_t>(kept), conf.end()));
    }
    return out;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double glyph_error_rate(const PixelImage& predicted, std::string_view reference_text, const CanvasSpec& spec,
                        const GlyphFont& font) {
    const DecodedText decoded = decode(predicted, spec, font);
    const std::size_t denom = std::max<std::size_t>(1, reference_text.size());
    const double rate = static_cast<double>(levenshtein(decoded.text, reference_text)) / static_cast<double>(denom);
    return std::min(rate, 1.0);
}

}  // namespace unipix
