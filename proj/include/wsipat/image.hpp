#pragma once

#include "wsipat/errors.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

// =============================================================================
// Minimal raster image support: 8-bit RGB in memory, PNG encode/decode
// (deflate via zlib), a baseline TIFF reader, and base64 for the worker wire
// protocol. Slide inputs are plain rasters; scanner-native formats are out of
// scope.
// =============================================================================

namespace wsipat {

struct ImageIoError : IoError {
    using IoError::IoError;
};

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    bool operator==(const Rgb&) const = default;
};

class Image {
public:
    Image() = default;
    Image(int width, int height, Rgb fill = {255, 255, 255});

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return width_ == 0 || height_ == 0; }

    Rgb pixel(int x, int y) const {
        const std::size_t o = offset(x, y);
        return Rgb{data_[o], data_[o + 1], data_[o + 2]};
    }
    void set_pixel(int x, int y, Rgb c) {
        const std::size_t o = offset(x, y);
        data_[o] = c.r;
        data_[o + 1] = c.g;
        data_[o + 2] = c.b;
    }

    const std::vector<std::uint8_t>& bytes() const { return data_; }
    std::vector<std::uint8_t>& bytes() { return data_; }

    // Copy of the axis-aligned window; the window must lie inside the image.
    Image crop(int x, int y, int w, int h) const;

    // Mean of the BT.601 luma over all pixels, in 0..255.
    double mean_luminance() const;

    bool operator==(const Image&) const = default;

private:
    std::size_t offset(int x, int y) const {
        return (static_cast<std::size_t>(y) * width_ + x) * 3;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

// Box-filter resize to round(scale * dims), scale in (0, 1]. Deterministic.
Image scale_image(const Image& src, double scale);

// ---------------------------------------------------------------------------
// PNG (always written as 8-bit RGB, filter 0, fixed zlib level: identical
// input produces identical bytes). The reader accepts 8/16-bit gray, RGB,
// palette and alpha variants; alpha is dropped, 16-bit is truncated.
// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(const std::uint8_t* data, std::size_t size);

void save_png(const Image& image, const std::string& path);

// Reads PNG or baseline (uncompressed) TIFF, dispatching on magic bytes.
Image load_image(const std::string& path);

// ---------------------------------------------------------------------------
// base64 (standard alphabet, padded, no line wrapping)
// ---------------------------------------------------------------------------

std::string base64_encode(const std::uint8_t* data, std::size_t size);
std::vector<std::uint8_t> base64_decode(const std::string& text);

} // namespace wsipat
