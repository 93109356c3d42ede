// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unipix/image.hpp"
#include "unipix/painted_text.hpp"

namespace unipix {

enum class Shape : std::uint8_t { circle, square, triangle, cross };
enum class Color : std::uint8_t { red, green, blue, yellow, white };
enum class Size : std::uint8_t { small, large };
enum class Position : std::uint8_t { center, left, right, top, bottom };

inline constexpr std::array<std::string_view, 4> kShapeNames{"circle", "square", "triangle", "cross"};
inline constexpr std::array<std::string_view, 5> kColorNames{"red", "green", "blue", "yellow", "white"};
inline constexpr std::array<std::string_view, 2> kSizeNames{"small", "large"};
inline constexpr std::array<std::string_view, 5> kPositionNames{"center", "left", "right", "top", "bottom"};

inline constexpr int kSceneGridSize = 4 * 5 * 2 * 5;

struct SceneSpec {
    Shape shape = Shape::circle;
    Color color = Color::red;
    Size size = Size::small;
    Position position = Position::center;
    std::uint64_t seed = 0;

    // Identity of the scene class, ignoring the seed.
    bool same_scene(const SceneSpec& o) const {
        return shape == o.shape && color == o.color && size == o.size && position == o.position;
    }
    bool operator==(const SceneSpec&) const = default;
};

// Enumerates the 200-scene grid in a fixed order; index in [0, kSceneGridSize).
SceneSpec scene_from_index(int index);
int scene_index(const SceneSpec& scene);

// "<size> <color> <shape> <position>"
std::string caption(const SceneSpec& scene);
std::optional<SceneSpec> parse_caption(std::string_view text);

// Unit RGB color of a scene color in the canonical pixel range.
std::array<float, 3> color_rgb(Color color);

// Geometry shared by the renderer and the scene classifier.
struct ShapeGeometry {
    double cx = 0;
    double cy = 0;
    double radius = 0;
};
ShapeGeometry scene_geometry(Size size, Position position, int width, int height);
bool shape_covers(Shape shape, const ShapeGeometry& g, double px, double py);

PixelImage render_scene(const SceneSpec& scene, const CanvasSpec& spec);

struct Sample {
    PixelImage rgb;
    PaintedText painted;
    SceneSpec scene;
    bool operator==(const Sample&) const = default;
};

Sample make_sample(const SceneSpec& scene, const CanvasSpec& spec, const GlyphFont& font);

struct Corpus {
    std::uint64_t seed = 0;
    CanvasSpec canvas;
    std::vector<Sample> samples;
    bool operator==(const Corpus&) const = default;
};

// Draws n scenes: consecutive blocks of kSceneGridSize are independent
// shuffles of the full grid, so n >= 200 covers every scene.
Corpus generate_corpus(int n, std::uint64_t seed, const CanvasSpec& spec, const GlyphFont& font);

inline constexpr int kCorpusFormatVersion = 1;

void save_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus load_corpus(const std::filesystem::path& dir, const GlyphFont& font);

}  // namespace unipix
