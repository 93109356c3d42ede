// SPDX-License-Identifier: Apache-2.0
#include "unipix/scene_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "unipix/error.hpp"

namespace unipix {

namespace {

using Mask = std::vector<std::uint8_t>;

Mask majority_filter(const Mask& in, int w, int h);

// Templates go through the same majority filter as observed masks.
Mask template_mask(Shape shape, Size size, Position position, int w, int h) {
    Mask m(static_cast<std::size_t>(w) * h, 0);
    const ShapeGeometry g = scene_geometry(size, position, w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            m[static_cast<std::size_t>(y) * w + x] = shape_covers(shape, g, x + 0.5, y + 0.5) ? 1 : 0;
    return majority_filter(m, w, h);
}

int count(const Mask& m) { return static_cast<int>(std::count(m.begin(), m.end(), std::uint8_t{1})); }

Mask majority_filter(const Mask& in, int w, int h) {
    Mask out(in.size(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int votes = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy;
                    const int xx = x + dx;
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                    votes += in[static_cast<std::size_t>(yy) * w + xx];
                }
            }
            out[static_cast<std::size_t>(y) * w + x] = votes >= 5 ? 1 : 0;
        }
    }
    return out;
}

}  // namespace

SceneClassification classify_scene(const PixelImage& rgb) {
    if (rgb.channels() != 3) fail(ErrorCode::shape_mismatch, "classify_scene expects an RGB image");
    const int w = rgb.width();
    const int h = rgb.height();
    const float mid = 0.5f * (kPixelMin + kPixelMax);

    Mask raw(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float peak = std::max({rgb.at(y, x, 0), rgb.at(y, x, 1), rgb.at(y, x, 2)});
            raw[static_cast<std::size_t>(y) * w + x] = peak > mid ? 1 : 0;
        }
    }
    const Mask mask = majority_filter(raw, w, h);
    const int fg = count(mask);

    int smallest = std::numeric_limits<int>::max();
    for (std::size_t s = 0; s < kShapeNames.size(); ++s) {
        smallest = std::min(smallest, count(template_mask(static_cast<Shape>(s), Size::small, Position::center, w, h)));
    }

    SceneClassification out;
    if (fg < std::max(1, smallest / 2)) {
        out.no_foreground = true;
        return out;
    }

    // Position: centroid, nearest anchor.
    double sx = 0;
    double sy = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (mask[static_cast<std::size_t>(y) * w + x]) {
                sx += x + 0.5;
                sy += y + 0.5;
            }
    sx /= fg;
    sy /= fg;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < kPositionNames.size(); ++p) {
        const ShapeGeometry g = scene_geometry(Size::small, static_cast<Position>(p), w, h);
        const double d = (g.cx - sx) * (g.cx - sx) + (g.cy - sy) * (g.cy - sy);
        if (d < best_d) {
            best_d = d;
            out.scene.position = static_cast<Position>(p);
        }
    }

    // Size: split halfway (geometrically) between the largest small and the smallest large shape.
    int max_small = 0;
    int min_large = std::numeric_limits<int>::max();
    for (std::size_t s = 0; s < kShapeNames.size(); ++s) {
        max_small = std::max(max_small, count(template_mask(static_cast<Shape>(s), Size::small, out.scene.position, w, h)));
        min_large = std::min(min_large, count(template_mask(static_cast<Shape>(s), Size::large, out.scene.position, w, h)));
    }
    const double split = std::sqrt(static_cast<double>(max_small) * static_cast<double>(min_large));
    out.scene.size = fg > split ? Size::large : Size::small;

    // Shape: IoU against templates.
    double best_iou = -1.0;
    for (std::size_t s = 0; s < kShapeNames.size(); ++s) {
        const Mask t = template_mask(static_cast<Shape>(s), out.scene.size, out.scene.position, w, h);
        int inter = 0;
        int uni = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            inter += t[i] & mask[i];
            uni += t[i] | mask[i];
        }
        const double iou = uni > 0 ? static_cast<double>(inter) / uni : 0.0;
        if (iou > best_iou) {
            best_iou = iou;
            out.scene.shape = static_cast<Shape>(s);
        }
    }
    out.confidence = best_iou;

    // Color: mean foreground RGB, nearest palette entry.
    double mean[3] = {0, 0, 0};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (mask[static_cast<std::size_t>(y) * w + x])
                for (int c = 0; c < 3; ++c) mean[c] += rgb.at(y, x, c);
    for (double& m : mean) m /= fg;
    double best_c = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < kColorNames.size(); ++c) {
        const auto proto = color_rgb(static_cast<Color>(c));
        double d = 0;
        for (int k = 0; k < 3; ++k) d += (mean[k] - proto[static_cast<std::size_t>(k)]) * (mean[k] - proto[static_cast<std::size_t>(k)]);
        if (d < best_c) {
            best_c = d;
            out.scene.color = static_cast<Color>(c);
        }
    }
    return out;
}

}  // namespace unipix
