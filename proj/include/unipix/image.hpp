// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace unipix {

// Canonical pixel range shared by every modality.
inline constexpr float kPixelMin = -1.0f;
inline constexpr float kPixelMax = 1.0f;

struct ImageShape {
    int height = 0;
    int width = 0;
    int channels = 0;

    std::size_t size() const {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
               static_cast<std::size_t>(channels);
    }
    bool operator==(const ImageShape&) const = default;
};

// H x W x C raster, HWC interleaved, values in [kPixelMin, kPixelMax].
class PixelImage {
public:
    PixelImage() = default;
    PixelImage(ImageShape shape, float fill);
    PixelImage(int height, int width, int channels, float fill = kPixelMin)
        : PixelImage(ImageShape{height, width, channels}, fill) {}

    const ImageShape& shape() const { return shape_; }
    int height() const { return shape_.height; }
    int width() const { return shape_.width; }
    int channels() const { return shape_.channels; }

    float& at(int y, int x, int c) { return data_[index(y, x, c)]; }
    float at(int y, int x, int c) const { return data_[index(y, x, c)]; }

    std::vector<float>& data() { return data_; }
    const std::vector<float>& data() const { return data_; }

    bool operator==(const PixelImage&) const = default;

private:
    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(shape_.width) +
                static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(shape_.channels) +
               static_cast<std::size_t>(c);
    }

    ImageShape shape_;
    std::vector<float> data_;
};

// Clamp every value into the canonical range.
void clamp_pixels(PixelImage& image);

// Horizontal concatenation of equally tall images.
PixelImage hconcat(const std::vector<PixelImage>& images);

// 8-bit PNG persistence: kPixelMin maps to 0 and kPixelMax to 255.
void write_png(const std::filesystem::path& path, const PixelImage& image);
PixelImage read_png(const std::filesystem::path& path);

}  // namespace unipix
