#include "cso/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "cso/errors.hpp"

namespace cso::io {

namespace {

const uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void put_chunk(std::vector<uint8_t>& out, const char type[4],
               const uint8_t* data, size_t len) {
    put_u32(out, static_cast<uint32_t>(len));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    if (len) out.insert(out.end(), data, data + len);
    uint32_t crc = static_cast<uint32_t>(
        crc32(0, out.data() + start, static_cast<uInt>(4 + len)));
    put_u32(out, crc);
}

uint8_t paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return static_cast<uint8_t>(a);
    if (pb <= pc) return static_cast<uint8_t>(b);
    return static_cast<uint8_t>(c);
}

}  // namespace

std::vector<uint8_t> encode_png(const PngImage& img) {
    if (img.width <= 0 || img.height <= 0 || (img.channels != 1 && img.channels != 3))
        throw IoError("png encode: unsupported image geometry");
    const size_t rowbytes = static_cast<size_t>(img.width) * img.channels;
    if (img.pixels.size() != rowbytes * static_cast<size_t>(img.height))
        throw IoError("png encode: pixel buffer size mismatch");

    // filter byte 0 per scanline
    std::vector<uint8_t> raw((rowbytes + 1) * static_cast<size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        raw[static_cast<size_t>(y) * (rowbytes + 1)] = 0;
        std::memcpy(raw.data() + static_cast<size_t>(y) * (rowbytes + 1) + 1,
                    img.pixels.data() + static_cast<size_t>(y) * rowbytes, rowbytes);
    }

    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(),
                  static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw IoError("png encode: deflate failed");
    compressed.resize(bound);

    std::vector<uint8_t> out(kSignature, kSignature + 8);
    uint8_t ihdr[13];
    ihdr[0] = static_cast<uint8_t>(img.width >> 24);
    ihdr[1] = static_cast<uint8_t>(img.width >> 16);
    ihdr[2] = static_cast<uint8_t>(img.width >> 8);
    ihdr[3] = static_cast<uint8_t>(img.width);
    ihdr[4] = static_cast<uint8_t>(img.height >> 24);
    ihdr[5] = static_cast<uint8_t>(img.height >> 16);
    ihdr[6] = static_cast<uint8_t>(img.height >> 8);
    ihdr[7] = static_cast<uint8_t>(img.height);
    ihdr[8] = 8;                                           // bit depth
    ihdr[9] = img.channels == 1 ? 0 : 2;                   // color type
    ihdr[10] = 0;                                          // compression
    ihdr[11] = 0;                                          // filter method
    ihdr[12] = 0;                                          // no interlace
    put_chunk(out, "IHDR", ihdr, sizeof ihdr);
    put_chunk(out, "IDAT", compressed.data(), compressed.size());
    put_chunk(out, "IEND", nullptr, 0);
    return out;
}

PngImage decode_png(std::span<const uint8_t> bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0)
        throw IoError("png decode: bad signature");

    PngImage img;
    int bit_depth = 0, color_type = 0;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    bool saw_end = false;
    while (pos + 8 <= bytes.size() && !saw_end) {
        const uint32_t len = get_u32(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) throw IoError("png decode: truncated chunk");
        const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
        const uint8_t* data = bytes.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw IoError("png decode: bad IHDR");
            img.width = static_cast<int>(get_u32(data));
            img.height = static_cast<int>(get_u32(data + 4));
            bit_depth = data[8];
            color_type = data[9];
            if (bit_depth != 8 || (color_type != 0 && color_type != 2) || data[12] != 0)
                throw IoError("png decode: unsupported format (need 8-bit gray/RGB, no interlace)");
            img.channels = color_type == 0 ? 1 : 3;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_end = true;
        }
        pos += 12 + len;
    }
    if (img.width <= 0 || img.height <= 0 || idat.empty())
        throw IoError("png decode: missing IHDR or IDAT");

    const size_t rowbytes = static_cast<size_t>(img.width) * img.channels;
    const size_t rawsize = (rowbytes + 1) * static_cast<size_t>(img.height);
    std::vector<uint8_t> raw(rawsize);
    uLongf outlen = static_cast<uLongf>(rawsize);
    if (uncompress(raw.data(), &outlen, idat.data(),
                   static_cast<uLong>(idat.size())) != Z_OK ||
        outlen != rawsize)
        throw IoError("png decode: inflate failed");

    img.pixels.resize(rowbytes * static_cast<size_t>(img.height));
    const int bpp = img.channels;
    std::vector<uint8_t> prev(rowbytes, 0);
    for (int y = 0; y < img.height; ++y) {
        const uint8_t filter = raw[static_cast<size_t>(y) * (rowbytes + 1)];
        const uint8_t* src = raw.data() + static_cast<size_t>(y) * (rowbytes + 1) + 1;
        uint8_t* dst = img.pixels.data() + static_cast<size_t>(y) * rowbytes;
        for (size_t x = 0; x < rowbytes; ++x) {
            const int left = x >= static_cast<size_t>(bpp) ? dst[x - bpp] : 0;
            const int up = prev[x];
            const int ul = x >= static_cast<size_t>(bpp) ? prev[x - bpp] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += left; break;
                case 2: v += up; break;
                case 3: v += (left + up) / 2; break;
                case 4: v += paeth(left, up, ul); break;
                default: throw IoError("png decode: unknown scanline filter");
            }
            dst[x] = static_cast<uint8_t>(v);
        }
        std::memcpy(prev.data(), dst, rowbytes);
    }
    return img;
}

void write_png(const std::string& path, const PngImage& img) {
    const auto bytes = encode_png(img);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write: " + path);
}

PngImage read_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IoError("cannot open: " + path);
    const auto size = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) throw IoError("short read: " + path);
    return decode_png(bytes);
}

}  // namespace cso::io
