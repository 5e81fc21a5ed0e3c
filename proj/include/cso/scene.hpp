#pragma once

// Cloud of Structured Objects scenes: three objects of interest (shirt,
// pants, bag) forming a 48x64x80 right triangle, plus noise sprites, rendered
// to grayscale images with class-index masks.
//
// Scene sampling consumes rng draws in a fixed, documented order so instances
// regenerate bit-exactly from their seed:
//   1. structure offset x, then y           (uniform ints, +/- bound)
//   2. per-class jitter x, y for shirt, pants, bag (drawn even when bound 0)
//   3. noise center x, y per noise object
//   4. one raw u64 sprite draw per OI (shirt, pants, bag order)
//   5. one raw u64 sprite draw per noise object

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cso/rng.hpp"
#include "cso/sprites.hpp"

namespace cso::scene {

using sprites::SemClass;

enum class Regime { easy, hard, strict };
const char* regime_name(Regime r);
Regime regime_from_name(const std::string& name);

struct CsoConfig {
    Regime regime = Regime::easy;
    int image_size = 160;
    int triangle_leg_x = 64;  // horizontal long leg
    int triangle_leg_y = 48;  // vertical leg
    int structure_translation_bound = 32;
    int per_object_jitter_bound = 16;
    int noise_count = 3;
    SemClass noise_class = SemClass::shoe;
    bool noise_bottom_left_only = false;
    int noise_region_size = 80;
    std::vector<SemClass> target_classes = {SemClass::shirt, SemClass::pants, SemClass::bag};

    static CsoConfig make(Regime r);

    // Mask channels including background.
    int num_mask_classes() const { return static_cast<int>(target_classes.size()) + 1; }
    // 1-based mask label, or 0 when the class is not a segmentation target.
    int class_index(SemClass c) const;
};

struct Vec2i {
    int x = 0, y = 0;
    bool operator==(const Vec2i&) const = default;
};
struct Vec2f {
    float x = 0, y = 0;
    bool operator==(const Vec2f&) const = default;
};

struct SceneInstance {
    std::array<Vec2f, 3> oi_centers;  // shirt, pants, bag
    std::vector<Vec2f> noise_centers;
    Vec2i structure_offset;
    std::array<Vec2i, 3> jitters;
    std::array<uint64_t, 3> oi_sprite_draws{};
    std::vector<uint64_t> noise_sprite_draws;
    uint64_t seed = 0;
};

struct Image {
    int w = 0, h = 0;
    std::vector<float> px;  // [0,1], row-major
    Image() = default;
    Image(int w_, int h_) : w(w_), h(h_), px(static_cast<size_t>(w_) * h_, 0.0f) {}
    float at(int x, int y) const { return px[static_cast<size_t>(y) * w + x]; }
    float& at(int x, int y) { return px[static_cast<size_t>(y) * w + x]; }
};

struct Mask {
    int w = 0, h = 0;
    std::vector<uint8_t> v;  // 0 = background, 1..K = target class index
    Mask() = default;
    Mask(int w_, int h_) : w(w_), h(h_), v(static_cast<size_t>(w_) * h_, 0) {}
    uint8_t at(int x, int y) const { return v[static_cast<size_t>(y) * w + x]; }
    uint8_t& at(int x, int y) { return v[static_cast<size_t>(y) * w + x]; }
};

struct RenderedScene {
    Image image;
    Mask mask;
    SceneInstance instance;
};

// Triangle vertex centers with the structure's bounding box centered on the
// image: right angle at the shirt vertex, pants to its right, bag above.
std::array<Vec2f, 3> canonical_oi_centers(const CsoConfig& config);

SceneInstance sample_scene(const CsoConfig& config, Rng& rng);

// Painter's algorithm: noise sprites in list order, then the OIs in class
// order. A sprite writes only where its intensity is > 0; target-class OIs
// label the mask at exactly those pixels (later OIs overwrite earlier
// labels). Off-border sprites are clipped.
RenderedScene render_scene(const SceneInstance& instance, const CsoConfig& config,
                           const sprites::SpriteProvider& provider);

// Per-scene seeds are hash_seed(master_seed, index); scenes are independent
// and generated in parallel.
std::vector<RenderedScene> generate_dataset(const CsoConfig& config,
                                            const sprites::SpriteProvider& provider,
                                            int count, uint64_t master_seed);

// --- dataset on disk -------------------------------------------------------
// <dir>/images/NNNN.png   8-bit grayscale
// <dir>/masks/NNNN.png    8-bit, pixel value = class index
// <dir>/manifest.json     config, seeds, per-scene geometry and sprite draws

nlohmann::json config_to_json(const CsoConfig& config);
CsoConfig config_from_json(const nlohmann::json& j);

nlohmann::json export_dataset(const std::vector<RenderedScene>& scenes,
                              const CsoConfig& config, uint64_t master_seed,
                              const std::string& dir);

struct LoadedDataset {
    std::vector<Image> images;
    std::vector<Mask> masks;
    nlohmann::json manifest;
};
LoadedDataset load_dataset(const std::string& dir);

// u8 quantization used for PNG export; sprites quantize their intensities to
// the same grid, so export -> load is lossless.
uint8_t intensity_to_u8(float v);

}  // namespace cso::scene
