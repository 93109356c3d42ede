// SPDX-License-Identifier: Apache-2.0
#include "unipix/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "unipix/error.hpp"
#include "unipix/io.hpp"
#include "unipix/rng.hpp"

namespace unipix {

using json = nlohmann::json;

SceneSpec scene_from_index(int index) {
    if (index < 0 || index >= kSceneGridSize) fail(ErrorCode::invalid_argument, "scene index out of range");
    SceneSpec s;
    s.position = static_cast<Position>(index % 5);
    index /= 5;
    s.size = static_cast<Size>(index % 2);
    index /= 2;
    s.color = static_cast<Color>(index % 5);
    index /= 5;
    s.shape = static_cast<Shape>(index);
    return s;
}

int scene_index(const SceneSpec& scene) {
    return ((static_cast<int>(scene.shape) * 5 + static_cast<int>(scene.color)) * 2 + static_cast<int>(scene.size)) *
               5 +
           static_cast<int>(scene.position);
}

std::string caption(const SceneSpec& scene) {
    std::string out;
    out += kSizeNames[static_cast<std::size_t>(scene.size)];
    out += ' ';
    out += kColorNames[static_cast<std::size_t>(scene.color)];
    out += ' ';
    out += kShapeNames[static_cast<std::size_t>(scene.shape)];
    out += ' ';
    out += kPositionNames[static_cast<std::size_t>(scene.position)];
    return out;
}

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names, std::string_view word) {
    for (std::size_t i = 0; i < N; ++i) {
        if (names[i] == word) return static_cast<Enum>(i);
    }
    return std::nullopt;
}

}  // namespace

std::optional<SceneSpec> parse_caption(std::string_view text) {
    std::istringstream is{std::string(text)};
    std::string size, color, shape, position, extra;
    if (!(is >> size >> color >> shape >> position) || (is >> extra)) return std::nullopt;
    auto sz = lookup<Size>(kSizeNames, size);
    auto co = lookup<Color>(kColorNames, color);
    auto sh = lookup<Shape>(kShapeNames, shape);
    auto po = lookup<Position>(kPositionNames, position);
    if (!sz || !co || !sh || !po) return std::nullopt;
    SceneSpec s;
    s.size = *sz;
    s.color = *co;
    s.shape = *sh;
    s.position = *po;
    return s;
}

std::array<float, 3> color_rgb(Color color) {
    constexpr float lo = kPixelMin;
    constexpr float hi = kPixelMax;
    switch (color) {
        case Color::red: return {hi, lo, lo};
        case Color::green: return {lo, hi, lo};
        case Color::blue: return {lo, lo, hi};
        case Color::yellow: return {hi, hi, lo};
        case Color::white: return {hi, hi, hi};
    }
    return {lo, lo, lo};
}

ShapeGeometry scene_geometry(Size size, Position position, int width, int height) {
    ShapeGeometry g;
    const double extent = std::min(width, height);
    g.radius = (size == Size::small ? 0.09 : 0.18) * extent;
    double fx = 0.5;
    double fy = 0.5;
    switch (position) {
        case Position::center: break;
        case Position::left: fx = 0.25; break;
        case Position::right: fx = 0.75; break;
        case Position::top: fy = 0.25; break;
        case Position::bottom: fy = 0.75; break;
    }
    g.cx = fx * width;
    g.cy = fy * height;
    return g;
}

bool shape_covers(Shape shape, const ShapeGeometry& g, double px, double py) {
    const double dx = px - g.cx;
    const double dy = py - g.cy;
    const double r = g.radius;
    switch (shape) {
        case Shape::circle: return dx * dx + dy * dy <= r * r;
        case Shape::square: return std::abs(dx) <= 0.85 * r && std::abs(dy) <= 0.85 * r;
        case Shape::triangle: {
            // Upward isosceles triangle: apex at (cx, cy - r), base on y = cy + r.
            if (dy < -r || dy > r) return false;
            return std::abs(dx) <= 0.5 * (dy + r);
        }
        case Shape::cross: {
            const double arm = r / 3.0;
            return (std::abs(dx) <= arm && std::abs(dy) <= r) || (std::abs(dy) <= arm && std::abs(dx) <= r);
        }
    }
    return false;
}

PixelImage render_scene(const SceneSpec& scene, const CanvasSpec& spec) {
    if (spec.channels != 3) fail(ErrorCode::invalid_argument, "scenes are rendered as 3-channel RGB");
    PixelImage image(spec.shape(), kPixelMin);
    const ShapeGeometry g = scene_geometry(scene.size, scene.position, spec.width, spec.height);
    const auto rgb = color_rgb(scene.color);
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            if (!shape_covers(scene.shape, g, x + 0.5, y + 0.5)) continue;
            for (int c = 0; c < 3; ++c) image.at(y, x, c) = rgb[static_cast<std::size_t>(c)];
        }
    }
    return image;
}

Sample make_sample(const SceneSpec& scene, const CanvasSpec& spec, const GlyphFont& font) {
    Sample s;
    s.scene = scene;
    s.rgb = render_scene(scene, spec);
    s.painted = rasterize(caption(scene), spec, font);
    if (s.painted.truncated) {
        fail(ErrorCode::zero_capacity, "caption '" + caption(scene) + "' does not fit the canvas");
    }
    return s;
}

Corpus generate_corpus(int n, std::uint64_t seed, const CanvasSpec& spec, const GlyphFont& font) {
    if (n < 1) fail(ErrorCode::invalid_argument, "corpus size must be at least 1");
    Corpus corpus;
    corpus.seed = seed;
    corpus.canvas = spec;
    corpus.samples.reserve(static_cast<std::size_t>(n));

    Rng rng(Rng::derive(seed, "data"));
    std::vector<int> order(kSceneGridSize);
    for (int i = 0; i < n; ++i) {
        if (i % kSceneGridSize == 0) {
            std::iota(order.begin(), order.end(), 0);
            for (int k = kSceneGridSize - 1; k > 0; --k) {
                std::swap(order[static_cast<std::size_t>(k)],
                          order[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(k) + 1))]);
            }
        }
        SceneSpec scene = scene_from_index(order[static_cast<std::size_t>(i % kSceneGridSize)]);
        scene.seed = Rng::derive(seed, "scene/" + std::to_string(i));
        corpus.samples.push_back(make_sample(scene, spec, font));
    }
    return corpus;
}

namespace {

std::string sample_stem(int index, int n) {
    int digits = 4;
    for (int v = n - 1; v >= 10000; v /= 10) ++digits;
    std::ostringstream os;
    os << std::setw(digits) << std::setfill('0') << index;
    return os.str();
}

std::string scene_record(const SceneSpec& s) {
    std::ostringstream os;
    os << "shape " << kShapeNames[static_cast<std::size_t>(s.shape)] << '\n'
       << "color " << kColorNames[static_cast<std::size_t>(s.color)] << '\n'
       << "size " << kSizeNames[static_cast<std::size_t>(s.size)] << '\n'
       << "position " << kPositionNames[static_cast<std::size_t>(s.position)] << '\n'
       << "seed " << s.seed << '\n';
    return os.str();
}

SceneSpec parse_scene_record(const std::string& text, const std::string& where) {
    std::istringstream is(text);
    std::string key, value;
    std::map<std::string, std::string> fields;
    while (is >> key >> value) fields[key] = value;
    auto get = [&](const std::string& k) -> const std::string& {
        auto it = fields.find(k);
        if (it == fields.end()) fail(ErrorCode::format_error, where + ": missing field '" + k + "'");
        return it->second;
    };
    auto cap = parse_caption(get("size") + " " + get("color") + " " + get("shape") + " " + get("position"));
    if (!cap) fail(ErrorCode::format_error, where + ": invalid scene fields");
    try {
        cap->seed = std::stoull(get("seed"));
    } catch (const std::exception&) {
        fail(ErrorCode::format_error, where + ": invalid seed");
    }
    return *cap;
}

json canvas_to_json(const CanvasSpec& c) {
    return {{"width", c.width},
            {"height", c.height},
            {"channels", c.channels},
            {"margin", c.margin},
            {"background_value", c.background_value},
            {"foreground_value", c.foreground_value}};
}

std::uint32_t sample_checksum(const std::filesystem::path& dir, const std::string& stem, std::uint32_t crc) {
    for (const char* suffix : {"_rgb.png", "_txt.png", "_scene"}) {
        const auto path = dir / (stem + suffix);
        if (!std::filesystem::exists(path)) fail(ErrorCode::missing_file, "corpus file missing: " + path.string());
        const auto bytes = read_file_bytes(path);
        crc = crc32(bytes, crc);
    }
    return crc;
}

}  // namespace

void save_corpus(const std::filesystem::path& dir, const Corpus& corpus) {
    if (corpus.samples.empty()) fail(ErrorCode::invalid_argument, "refusing to save an empty corpus");
    std::filesystem::create_directories(dir);
    const int n = static_cast<int>(corpus.samples.size());
    std::uint32_t crc = 0;
    for (int i = 0; i < n; ++i) {
        const Sample& s = corpus.samples[static_cast<std::size_t>(i)];
        const std::string stem = sample_stem(i, n);
        write_png(dir / (stem + "_rgb.png"), s.rgb);
        write_png(dir / (stem + "_txt.png"), s.painted.image);
        write_text_file_atomic(dir / (stem + "_scene"), scene_record(s.scene));
        crc = sample_checksum(dir, stem, crc);
    }
    json manifest = {{"version", kCorpusFormatVersion},
                     {"n", n},
                     {"seed", corpus.seed},
                     {"canvas", canvas_to_json(corpus.canvas)},
                     {"checksum", crc}};
    write_text_file_atomic(dir / "manifest", manifest.dump(2) + "\n");
}

Corpus load_corpus(const std::filesystem::path& dir, const GlyphFont& font) {
    const auto manifest_path = dir / "manifest";
    if (!std::filesystem::exists(manifest_path)) {
        fail(ErrorCode::missing_file, "corpus manifest not found: " + manifest_path.string());
    }
    json manifest;
    try {
        manifest = json::parse(read_text_file(manifest_path));
    } catch (const json::exception& e) {
        fail(ErrorCode::format_error, "corpus manifest is not valid: " + std::string(e.what()));
    }

    Corpus corpus;
    int n = 0;
    std::uint32_t expected_crc = 0;
    try {
        const int version = manifest.at("version").get<int>();
        if (version != kCorpusFormatVersion) {
            fail(ErrorCode::version_mismatch, "corpus version " + std::to_string(version) + ", expected " +
                                                  std::to_string(kCorpusFormatVersion));
        }
        n = manifest.at("n").get<int>();
        corpus.seed = manifest.at("seed").get<std::uint64_t>();
        const json& c = manifest.at("canvas");
        corpus.canvas.width = c.at("width").get<int>();
        corpus.canvas.height = c.at("height").get<int>();
        corpus.canvas.channels = c.at("channels").get<int>();
        corpus.canvas.margin = c.at("margin").get<int>();
        corpus.canvas.background_value = c.at("background_value").get<float>();
        corpus.canvas.foreground_value = c.at("foreground_value").get<float>();
        expected_crc = manifest.at("checksum").get<std::uint32_t>();
    } catch (const json::exception& e) {
        fail(ErrorCode::format_error, "corpus manifest field error: " + std::string(e.what()));
    }
    if (n < 1) fail(ErrorCode::format_error, "corpus manifest declares no samples");

    std::uint32_t crc = 0;
    for (int i = 0; i < n; ++i) crc = sample_checksum(dir, sample_stem(i, n), crc);
    if (crc != expected_crc) {
        fail(ErrorCode::checksum_mismatch, "corpus checksum mismatch in " + dir.string());
    }

    corpus.samples.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::string stem = sample_stem(i, n);
        Sample s;
        s.scene = parse_scene_record(read_text_file(dir / (stem + "_scene")), stem + "_scene");
        s.rgb = read_png(dir / (stem + "_rgb.png"));
        s.painted = rasterize(caption(s.scene), corpus.canvas, font);
        const PixelImage stored_txt = read_png(dir / (stem + "_txt.png"));
        if (stored_txt != s.painted.image) {
            fail(ErrorCode::format_error, stem + "_txt.png does not match the rasterized caption");
        }
        if (s.rgb.shape() != corpus.canvas.shape()) {
            fail(ErrorCode::shape_mismatch, stem + "_rgb.png does not match the canvas dimensions");
        }
        corpus.samples.push_back(std::move(s));
    }
    return corpus;
}

}  // namespace unipix
