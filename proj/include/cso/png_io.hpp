#pragma once

// Minimal PNG reader/writer over zlib: 8-bit grayscale and 8-bit RGB,
// non-interlaced. The writer emits filter-0 scanlines with a fixed
// compression level, so identical pixels always produce identical files.
// The reader handles all five standard scanline filters.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cso::io {

struct PngImage {
    int width = 0;
    int height = 0;
    int channels = 1;  // 1 = grayscale, 3 = RGB
    std::vector<uint8_t> pixels;  // row-major, interleaved

    uint8_t& at(int x, int y, int c = 0) {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    uint8_t at(int x, int y, int c = 0) const {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
};

std::vector<uint8_t> encode_png(const PngImage& img);
PngImage decode_png(std::span<const uint8_t> bytes);

void write_png(const std::string& path, const PngImage& img);
PngImage read_png(const std::string& path);

}  // namespace cso::io
