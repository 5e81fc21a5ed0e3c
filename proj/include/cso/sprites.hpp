#pragma once

// Sprite sources for scene generation: Fashion-MNIST IDX files on disk, or a
// deterministic synthetic glyph generator so tests and CI never depend on
// downloaded data.
//
// IDX layout (big-endian):
//   [offset 0]  magic: 0x00 0x00 0x08 <ndim>   (0x08 = unsigned byte data)
//               images use 0x00000803 (ndim 3), labels 0x00000801 (ndim 1)
//   [offset 4]  ndim u32 dimension sizes
//   then        prod(dims) payload bytes

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cso/errors.hpp"
#include "cso/rng.hpp"

namespace cso::sprites {

enum class SemClass : int { shirt = 0, pants = 1, bag = 2, shoe = 3 };
constexpr int kNumClasses = 4;
const char* class_name(SemClass c);

struct Sprite {
    static constexpr int kSize = 28;
    std::array<float, kSize * kSize> px{};  // intensities in [0,1]
    SemClass cls = SemClass::shirt;

    float at(int x, int y) const { return px[static_cast<size_t>(y) * kSize + x]; }
};

struct IdxData {
    std::vector<int> shape;
    std::vector<uint8_t> data;
};

IdxData parse_idx(std::span<const uint8_t> bytes);
std::vector<uint8_t> serialize_idx(const IdxData& idx);
IdxData load_idx_file(const std::string& path);

enum class Split { train, test };

// Semantic class -> Fashion-MNIST label. Defaults follow the dataset's label
// names: shirt=6 (Shirt), pants=1 (Trouser), bag=8 (Bag), shoe=7 (Sneaker).
// Configurable because the upstream naming is ambiguous (e.g. label 0 is
// "T-shirt/top").
struct ClassLabelMap {
    std::array<int, kNumClasses> label = {6, 1, 8, 7};
};

// Read-only after construction; safe for concurrent reads. Consumers own
// their seeded generators, and one sprite pick always consumes exactly one
// u64 draw regardless of the backing source.
class SpriteProvider {
public:
    static SpriteProvider synthetic();
    static SpriteProvider from_idx(const std::string& images_path,
                                   const std::string& labels_path,
                                   ClassLabelMap mapping = {});
    // Standard Fashion-MNIST file names inside `dir`:
    // train-images-idx3-ubyte / train-labels-idx1-ubyte and the t10k pair.
    static SpriteProvider from_dir(const std::string& dir, Split split,
                                   ClassLabelMap mapping = {});

    // Deterministic raw-draw -> sprite mapping; `raw` comes from the scene
    // sampler so instances can be re-rendered bit-exactly.
    Sprite sprite_for_draw(SemClass cls, uint64_t raw) const;

    Sprite get(SemClass cls, Rng& rng) const { return sprite_for_draw(cls, rng.next_u64()); }

    bool is_synthetic() const { return synthetic_; }
    size_t pool_size(SemClass cls) const;

private:
    bool synthetic_ = true;
    std::shared_ptr<const std::vector<uint8_t>> images_;   // N*28*28 u8
    std::array<std::vector<int32_t>, kNumClasses> pools_;  // image indices per class
};

// Deterministic, class-distinguishable 28x28 glyph with seeded shape jitter
// and per-pixel intensity texture in [0.55, 1.0].
Sprite synth_glyph(SemClass cls, uint64_t seed);

}  // namespace cso::sprites
