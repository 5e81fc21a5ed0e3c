#include "cso/sprites.hpp"

#include <fstream>

namespace cso::sprites {

const char* class_name(SemClass c) {
    switch (c) {
        case SemClass::shirt: return "shirt";
        case SemClass::pants: return "pants";
        case SemClass::bag: return "bag";
        case SemClass::shoe: return "shoe";
    }
    return "?";
}

IdxData parse_idx(std::span<const uint8_t> bytes) {
    if (bytes.size() < 4) throw Truncated("idx stream shorter than magic");
    if (bytes[0] != 0 || bytes[1] != 0 || bytes[2] != 0x08)
        throw BadMagic("idx magic bytes " + std::to_string(bytes[0]) + "," +
                       std::to_string(bytes[1]) + "," + std::to_string(bytes[2]) +
                       " (expected 0,0,8 for u8 data)");
    const int ndim = bytes[3];
    if (ndim < 1) throw BadMagic("idx dimension count 0");
    if (bytes.size() < 4 + 4 * static_cast<size_t>(ndim))
        throw Truncated("idx header shorter than declared dimension count");

    IdxData idx;
    size_t total = 1;
    for (int d = 0; d < ndim; ++d) {
        const uint8_t* p = bytes.data() + 4 + 4 * static_cast<size_t>(d);
        const uint32_t v = (static_cast<uint32_t>(p[0]) << 24) |
                           (static_cast<uint32_t>(p[1]) << 16) |
                           (static_cast<uint32_t>(p[2]) << 8) | p[3];
        idx.shape.push_back(static_cast<int>(v));
        total *= v;
    }
    const size_t payload_start = 4 + 4 * static_cast<size_t>(ndim);
    if (bytes.size() - payload_start < total)
        throw Truncated("idx payload has " + std::to_string(bytes.size() - payload_start) +
                        " bytes, shape demands " + std::to_string(total));
    idx.data.assign(bytes.begin() + static_cast<ptrdiff_t>(payload_start),
                    bytes.begin() + static_cast<ptrdiff_t>(payload_start + total));
    return idx;
}

std::vector<uint8_t> serialize_idx(const IdxData& idx) {
    std::vector<uint8_t> out = {0, 0, 0x08, static_cast<uint8_t>(idx.shape.size())};
    for (int d : idx.shape) {
        const auto v = static_cast<uint32_t>(d);
        out.push_back(static_cast<uint8_t>(v >> 24));
        out.push_back(static_cast<uint8_t>(v >> 16));
        out.push_back(static_cast<uint8_t>(v >> 8));
        out.push_back(static_cast<uint8_t>(v));
    }
    out.insert(out.end(), idx.data.begin(), idx.data.end());
    return out;
}

IdxData load_idx_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IoError("cannot open idx file: " + path);
    const auto size = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(size));
    f.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!f) throw IoError("short read: " + path);
    return parse_idx(bytes);
}

SpriteProvider SpriteProvider::synthetic() {
    SpriteProvider p;
    p.synthetic_ = true;
    return p;
}

SpriteProvider SpriteProvider::from_idx(const std::string& images_path,
                                        const std::string& labels_path,
                                        ClassLabelMap mapping) {
    IdxData images = load_idx_file(images_path);
    IdxData labels = load_idx_file(labels_path);
    if (images.shape.size() != 3 || images.shape[1] != Sprite::kSize ||
        images.shape[2] != Sprite::kSize)
        throw BadMagic("images file is not Nx28x28: " + images_path);
    if (labels.shape.size() != 1 || labels.shape[0] != images.shape[0])
        throw BadMagic("label count does not match image count");

    SpriteProvider p;
    p.synthetic_ = false;
    p.images_ = std::make_shared<const std::vector<uint8_t>>(std::move(images.data));
    for (int32_t i = 0; i < images.shape[0]; ++i) {
        const int lbl = labels.data[static_cast<size_t>(i)];
        for (int c = 0; c < kNumClasses; ++c)
            if (mapping.label[static_cast<size_t>(c)] == lbl)
                p.pools_[static_cast<size_t>(c)].push_back(i);
    }
    for (int c = 0; c < kNumClasses; ++c)
        if (p.pools_[static_cast<size_t>(c)].empty())
            throw EmptyPool(std::string("no sprites for class ") +
                            class_name(static_cast<SemClass>(c)));
    return p;
}

SpriteProvider SpriteProvider::from_dir(const std::string& dir, Split split,
                                        ClassLabelMap mapping) {
    const std::string prefix = dir + (split == Split::train ? "/train" : "/t10k");
    return from_idx(prefix + "-images-idx3-ubyte", prefix + "-labels-idx1-ubyte", mapping);
}

size_t SpriteProvider::pool_size(SemClass cls) const {
    return synthetic_ ? 0 : pools_[static_cast<size_t>(cls)].size();
}

Sprite SpriteProvider::sprite_for_draw(SemClass cls, uint64_t raw) const {
    if (synthetic_) return synth_glyph(cls, raw);
    const auto& pool = pools_[static_cast<size_t>(cls)];
    if (pool.empty()) throw EmptyPool(std::string("class ") + class_name(cls));
    // multiply-shift reduction of the raw draw onto the pool
    const auto idx = static_cast<size_t>(
        (static_cast<unsigned __int128>(raw) * pool.size()) >> 64);
    const int32_t img = pool[idx];
    Sprite s;
    s.cls = cls;
    const uint8_t* src = images_->data() + static_cast<size_t>(img) * Sprite::kSize * Sprite::kSize;
    for (int i = 0; i < Sprite::kSize * Sprite::kSize; ++i)
        s.px[static_cast<size_t>(i)] = static_cast<float>(src[i]) / 255.0f;
    return s;
}

namespace {

struct Rect {
    int x0, y0, x1, y1;  // inclusive
    bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

}  // namespace

Sprite synth_glyph(SemClass cls, uint64_t seed) {
    Rng rng(hash_seed(seed, static_cast<uint64_t>(cls) + 0x5EEDULL));
    const int dx = static_cast<int>(rng.uniform_int(-1, 1));
    const int dy = static_cast<int>(rng.uniform_int(-1, 1));

    Rect a{0, 0, -1, -1}, b{0, 0, -1, -1};
    Rect hole{0, 0, -1, -1};
    switch (cls) {
        case SemClass::shirt:  // T shape: sleeves bar over torso
            a = {3 + dx, 5 + dy, 24 + dx, 10 + dy};
            b = {9 + dx, 5 + dy, 18 + dx, 23 + dy};
            break;
        case SemClass::pants:  // waist + two legs
            a = {8 + dx, 4 + dy, 19 + dx, 8 + dy};
            b = {8 + dx, 8 + dy, 12 + dx, 24 + dy};
            break;
        case SemClass::bag:  // body + handle outline
            a = {6 + dx, 12 + dy, 21 + dx, 24 + dy};
            b = {10 + dx, 5 + dy, 17 + dx, 12 + dy};
            hole = {12 + dx, 7 + dy, 15 + dx, 12 + dy};
            break;
        case SemClass::shoe:  // sole + shaft, boot-like L
            a = {3 + dx, 18 + dy, 24 + dx, 23 + dy};
            b = {15 + dx, 10 + dy, 24 + dx, 17 + dy};
            break;
    }
    Rect b2 = b;
    if (cls == SemClass::pants) b2 = {15 + dx, 8 + dy, 19 + dx, 24 + dy};

    Sprite s;
    s.cls = cls;
    for (int y = 0; y < Sprite::kSize; ++y)
        for (int x = 0; x < Sprite::kSize; ++x) {
            bool in = a.contains(x, y) || b.contains(x, y);
            if (cls == SemClass::pants) in = in || b2.contains(x, y);
            if (hole.contains(x, y)) in = false;
            if (in) {
                // quantized to the u8 grid so PNG export round-trips exactly
                const double v = 0.55 + 0.45 * rng.uniform_real();
                s.px[static_cast<size_t>(y) * Sprite::kSize + x] =
                    static_cast<float>(std::round(v * 255.0) / 255.0);
            }
        }
    return s;
}

}  // namespace cso::sprites
