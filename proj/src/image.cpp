// SPDX-License-Identifier: Apache-2.0
#include "unipix/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "unipix/error.hpp"

namespace unipix {

PixelImage::PixelImage(ImageShape shape, float fill) : shape_(shape), data_(shape.size(), fill) {
    if (shape.height <= 0 || shape.width <= 0 || shape.channels <= 0) {
        fail(ErrorCode::invalid_argument, "image dimensions must be positive");
    }
}

void clamp_pixels(PixelImage& image) {
    for (float& v : image.data()) v = std::clamp(v, kPixelMin, kPixelMax);
}

PixelImage hconcat(const std::vector<PixelImage>& images) {
    if (images.empty()) fail(ErrorCode::invalid_argument, "hconcat of no images");
    const int h = images.front().height();
    const int c = images.front().channels();
    int w = 0;
    for (const auto& im : images) {
        if (im.height() != h || im.channels() != c) {
            fail(ErrorCode::shape_mismatch, "hconcat requires equal height and channels");
        }
        w += im.width();
    }
    PixelImage out(h, w, c);
    int x0 = 0;
    for (const auto& im : images) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < im.width(); ++x)
                for (int ch = 0; ch < c; ++ch) out.at(y, x0 + x, ch) = im.at(y, x, ch);
        x0 += im.width();
    }
    return out;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_byte(float v) {
    const float scaled = (std::clamp(v, kPixelMin, kPixelMax) - kPixelMin) * 127.5f;
    return static_cast<std::uint8_t>(std::lround(scaled));
}

float from_byte(std::uint8_t b) { return static_cast<float>(b) / 127.5f + kPixelMin; }

int png_color_type(int channels) {
    return channels == 1 ? PNG_COLOR_TYPE_GRAY : channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_RGBA;
}

}  // namespace

void write_png(const std::filesystem::path& path, const PixelImage& image) {
    if (image.channels() != 1 && image.channels() != 3 && image.channels() != 4) {
        fail(ErrorCode::invalid_argument, "PNG output needs 1, 3 or 4 channels");
    }
    FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) fail(ErrorCode::io_error, "cannot open for writing: " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorCode::io_error, "libpng initialisation failed");
    }
    const int w = image.width();
    const int h = image.height();
    const int c = image.channels();
    std::vector<std::uint8_t> bytes(image.data().size());
    std::transform(image.data().begin(), image.data().end(), bytes.begin(), to_byte);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = bytes.data() + static_cast<std::size_t>(y) * w * c;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorCode::io_error, "PNG encoding failed: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, png_color_type(c),
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

PixelImage read_png(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) fail(ErrorCode::missing_file, "cannot open: " + path.string());

    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        fail(ErrorCode::format_error, "not a PNG file: " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorCode::io_error, "libpng initialisation failed");
    }
    std::vector<std::uint8_t> bytes;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorCode::format_error, "corrupt PNG: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_byte color_type = png_get_color_type(png, info);
    const png_byte bit_depth = png_get_bit_depth(png, info);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int c = png_get_channels(png, info);
    bytes.resize(static_cast<std::size_t>(w) * h * c);
    rows.resize(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = bytes.data() + static_cast<std::size_t>(y) * w * c;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    PixelImage image(h, w, c);
    std::transform(bytes.begin(), bytes.end(), image.data().begin(), from_byte);
    return image;
}

}  // namespace unipix
