#include <doctest.h>

#include <filesystem>

#include "cso/png_io.hpp"
#include "cso/rng.hpp"
#include "cso/sprites.hpp"

using namespace cso;

namespace {

io::PngImage random_image(int w, int h, int channels, uint64_t seed) {
    Rng rng(seed);
    io::PngImage img;
    img.width = w;
    img.height = h;
    img.channels = channels;
    img.pixels.resize(static_cast<size_t>(w) * h * channels);
    for (auto& p : img.pixels) p = static_cast<uint8_t>(rng.uniform_int(0, 255));
    return img;
}

}  // namespace

TEST_CASE("png encode/decode round-trips grayscale and rgb") {
    for (uint64_t seed = 0; seed < 8; ++seed) {
        const int w = 3 + static_cast<int>(seed) * 7;
        const int h = 5 + static_cast<int>(seed) * 3;
        for (int ch : {1, 3}) {
            const auto img = random_image(w, h, ch, seed * 2 + ch);
            const auto decoded = io::decode_png(io::encode_png(img));
            CHECK(decoded.width == img.width);
            CHECK(decoded.height == img.height);
            CHECK(decoded.channels == img.channels);
            CHECK(decoded.pixels == img.pixels);
        }
    }
}

TEST_CASE("png file write/read round-trips") {
    const auto dir = std::filesystem::temp_directory_path() / "cso_png_test";
    std::filesystem::create_directories(dir);
    const auto img = random_image(31, 17, 1, 99);
    const auto path = (dir / "t.png").string();
    io::write_png(path, img);
    const auto back = io::read_png(path);
    CHECK(back.pixels == img.pixels);
    std::filesystem::remove_all(dir);
}

TEST_CASE("png decoder rejects garbage") {
    std::vector<uint8_t> junk = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    CHECK_THROWS_AS(io::decode_png(junk), IoError);
}

TEST_CASE("encoded pngs are byte-identical across calls") {
    const auto img = random_image(40, 40, 1, 5);
    CHECK(io::encode_png(img) == io::encode_png(img));
}

TEST_CASE("idx header arithmetic") {
    // 16-byte header for a (1,2,2) u8 tensor plus 4 payload bytes
    std::vector<uint8_t> bytes = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2,
                                  10, 20, 30, 40};
    const auto idx = sprites::parse_idx(bytes);
    CHECK(idx.shape == std::vector<int>{1, 2, 2});
    CHECK(idx.data == std::vector<uint8_t>{10, 20, 30, 40});
}

TEST_CASE("idx payload shorter than the shape demands") {
    std::vector<uint8_t> bytes = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2,
                                  10, 20, 30};
    CHECK_THROWS_AS(sprites::parse_idx(bytes), Truncated);
}

TEST_CASE("idx unknown magic") {
    std::vector<uint8_t> bytes = {0, 1, 8, 1, 0, 0, 0, 0};
    CHECK_THROWS_AS(sprites::parse_idx(bytes), BadMagic);
    std::vector<uint8_t> floaty = {0, 0, 0x0D, 1, 0, 0, 0, 0};
    CHECK_THROWS_AS(sprites::parse_idx(floaty), BadMagic);
}

TEST_CASE("idx serialize/parse round-trips") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        sprites::IdxData idx;
        const int ndim = 1 + static_cast<int>(rng.uniform_int(0, 2));
        size_t total = 1;
        for (int d = 0; d < ndim; ++d) {
            idx.shape.push_back(1 + static_cast<int>(rng.uniform_int(0, 4)));
            total *= static_cast<size_t>(idx.shape.back());
        }
        idx.data.resize(total);
        for (auto& b : idx.data) b = static_cast<uint8_t>(rng.uniform_int(0, 255));
        const auto back = sprites::parse_idx(sprites::serialize_idx(idx));
        CHECK(back.shape == idx.shape);
        CHECK(back.data == idx.data);
    }
}
