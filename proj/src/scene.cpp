#include "cso/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cso/png_io.hpp"

namespace cso::scene {

namespace fs = std::filesystem;
using nlohmann::json;

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::easy: return "easy";
        case Regime::hard: return "hard";
        case Regime::strict: return "strict";
    }
    return "?";
}

Regime regime_from_name(const std::string& name) {
    if (name == "easy") return Regime::easy;
    if (name == "hard") return Regime::hard;
    if (name == "strict") return Regime::strict;
    throw ConfigError("unknown regime '" + name + "' (easy|hard|strict)");
}

CsoConfig CsoConfig::make(Regime r) {
    CsoConfig c;
    c.regime = r;
    switch (r) {
        case Regime::easy:
            c.noise_class = SemClass::shoe;
            break;
        case Regime::hard:
            c.noise_class = SemClass::shirt;
            break;
        case Regime::strict:
            c.noise_class = SemClass::shirt;
            c.structure_translation_bound = 40;
            c.per_object_jitter_bound = 0;
            c.noise_bottom_left_only = true;
            c.target_classes = {SemClass::shirt};
            break;
    }
    return c;
}

int CsoConfig::class_index(SemClass c) const {
    for (size_t i = 0; i < target_classes.size(); ++i)
        if (target_classes[i] == c) return static_cast<int>(i) + 1;
    return 0;
}

std::array<Vec2f, 3> canonical_oi_centers(const CsoConfig& config) {
    const float cx = static_cast<float>(config.image_size) / 2.0f;
    const float cy = static_cast<float>(config.image_size) / 2.0f;
    const float ax = cx - static_cast<float>(config.triangle_leg_x) / 2.0f;
    const float ay = cy + static_cast<float>(config.triangle_leg_y) / 2.0f;
    return {Vec2f{ax, ay},                                                  // shirt
            Vec2f{ax + static_cast<float>(config.triangle_leg_x), ay},      // pants
            Vec2f{ax, ay - static_cast<float>(config.triangle_leg_y)}};     // bag
}

SceneInstance sample_scene(const CsoConfig& config, Rng& rng) {
    SceneInstance inst;
    const int tb = config.structure_translation_bound;
    inst.structure_offset.x = static_cast<int>(rng.uniform_int(-tb, tb));
    inst.structure_offset.y = static_cast<int>(rng.uniform_int(-tb, tb));

    const int jb = config.per_object_jitter_bound;
    for (auto& j : inst.jitters) {
        j.x = static_cast<int>(rng.uniform_int(-jb, jb));
        j.y = static_cast<int>(rng.uniform_int(-jb, jb));
    }

    const auto canon = canonical_oi_centers(config);
    for (int i = 0; i < 3; ++i) {
        inst.oi_centers[static_cast<size_t>(i)] = {
            canon[static_cast<size_t>(i)].x +
                static_cast<float>(inst.structure_offset.x + inst.jitters[static_cast<size_t>(i)].x),
            canon[static_cast<size_t>(i)].y +
                static_cast<float>(inst.structure_offset.y + inst.jitters[static_cast<size_t>(i)].y)};
    }

    inst.noise_centers.resize(static_cast<size_t>(config.noise_count));
    for (auto& nc : inst.noise_centers) {
        if (config.noise_bottom_left_only) {
            const int s = config.noise_region_size;
            nc.x = static_cast<float>(rng.uniform_int(0, s - 1));
            nc.y = static_cast<float>(rng.uniform_int(config.image_size - s, config.image_size - 1));
        } else {
            nc.x = static_cast<float>(rng.uniform_int(0, config.image_size - 1));
            nc.y = static_cast<float>(rng.uniform_int(0, config.image_size - 1));
        }
    }

    for (auto& d : inst.oi_sprite_draws) d = rng.next_u64();
    inst.noise_sprite_draws.resize(static_cast<size_t>(config.noise_count));
    for (auto& d : inst.noise_sprite_draws) d = rng.next_u64();
    return inst;
}

namespace {

void blit(Image& img, Mask* mask, const sprites::Sprite& sprite, Vec2f center,
          uint8_t label) {
    const int tlx = static_cast<int>(std::lround(center.x)) - sprites::Sprite::kSize / 2;
    const int tly = static_cast<int>(std::lround(center.y)) - sprites::Sprite::kSize / 2;
    for (int sy = 0; sy < sprites::Sprite::kSize; ++sy) {
        const int ty = tly + sy;
        if (ty < 0 || ty >= img.h) continue;
        for (int sx = 0; sx < sprites::Sprite::kSize; ++sx) {
            const int tx = tlx + sx;
            if (tx < 0 || tx >= img.w) continue;
            const float v = sprite.at(sx, sy);
            if (v <= 0.0f) continue;
            img.at(tx, ty) = v;
            if (mask) mask->at(tx, ty) = label;
        }
    }
}

constexpr SemClass kOiOrder[3] = {SemClass::shirt, SemClass::pants, SemClass::bag};

}  // namespace

RenderedScene render_scene(const SceneInstance& instance, const CsoConfig& config,
                           const sprites::SpriteProvider& provider) {
    RenderedScene out;
    out.instance = instance;
    out.image = Image(config.image_size, config.image_size);
    out.mask = Mask(config.image_size, config.image_size);

    for (size_t i = 0; i < instance.noise_centers.size(); ++i) {
        const auto sprite =
            provider.sprite_for_draw(config.noise_class, instance.noise_sprite_draws[i]);
        blit(out.image, nullptr, sprite, instance.noise_centers[i], 0);
    }
    for (int i = 0; i < 3; ++i) {
        const SemClass cls = kOiOrder[i];
        const auto sprite =
            provider.sprite_for_draw(cls, instance.oi_sprite_draws[static_cast<size_t>(i)]);
        const int label = config.class_index(cls);
        blit(out.image, label > 0 ? &out.mask : nullptr, sprite,
             instance.oi_centers[static_cast<size_t>(i)], static_cast<uint8_t>(label));
    }
    return out;
}

std::vector<RenderedScene> generate_dataset(const CsoConfig& config,
                                            const sprites::SpriteProvider& provider,
                                            int count, uint64_t master_seed) {
    std::vector<RenderedScene> scenes(static_cast<size_t>(count));
#pragma omp parallel for schedule(dynamic, 16)
    for (int i = 0; i < count; ++i) {
        const uint64_t seed = hash_seed(master_seed, static_cast<uint64_t>(i));
        Rng rng(seed);
        SceneInstance inst = sample_scene(config, rng);
        inst.seed = seed;
        scenes[static_cast<size_t>(i)] = render_scene(inst, config, provider);
    }
    return scenes;
}

uint8_t intensity_to_u8(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<uint8_t>(std::lround(c * 255.0f));
}

// --- config / manifest json --------------------------------------------------

namespace {

json class_list_to_json(const std::vector<SemClass>& classes) {
    json a = json::array();
    for (auto c : classes) a.push_back(sprites::class_name(c));
    return a;
}

SemClass class_from_name(const std::string& s) {
    for (int i = 0; i < sprites::kNumClasses; ++i)
        if (s == sprites::class_name(static_cast<SemClass>(i))) return static_cast<SemClass>(i);
    throw ConfigError("unknown class name '" + s + "'");
}

}  // namespace

json config_to_json(const CsoConfig& c) {
    json j;
    j["regime"] = regime_name(c.regime);
    j["image_size"] = c.image_size;
    j["triangle_leg_x"] = c.triangle_leg_x;
    j["triangle_leg_y"] = c.triangle_leg_y;
    j["structure_translation_bound"] = c.structure_translation_bound;
    j["per_object_jitter_bound"] = c.per_object_jitter_bound;
    j["noise_count"] = c.noise_count;
    j["noise_class"] = sprites::class_name(c.noise_class);
    j["noise_bottom_left_only"] = c.noise_bottom_left_only;
    j["noise_region_size"] = c.noise_region_size;
    j["target_classes"] = class_list_to_json(c.target_classes);
    return j;
}

CsoConfig config_from_json(const json& j) {
    CsoConfig c = CsoConfig::make(regime_from_name(j.at("regime").get<std::string>()));
    if (j.contains("image_size")) c.image_size = j.at("image_size").get<int>();
    if (j.contains("triangle_leg_x")) c.triangle_leg_x = j.at("triangle_leg_x").get<int>();
    if (j.contains("triangle_leg_y")) c.triangle_leg_y = j.at("triangle_leg_y").get<int>();
    if (j.contains("structure_translation_bound"))
        c.structure_translation_bound = j.at("structure_translation_bound").get<int>();
    if (j.contains("per_object_jitter_bound"))
        c.per_object_jitter_bound = j.at("per_object_jitter_bound").get<int>();
    if (j.contains("noise_count")) c.noise_count = j.at("noise_count").get<int>();
    if (j.contains("noise_class"))
        c.noise_class = class_from_name(j.at("noise_class").get<std::string>());
    if (j.contains("noise_bottom_left_only"))
        c.noise_bottom_left_only = j.at("noise_bottom_left_only").get<bool>();
    if (j.contains("noise_region_size"))
        c.noise_region_size = j.at("noise_region_size").get<int>();
    if (j.contains("target_classes")) {
        c.target_classes.clear();
        for (const auto& s : j.at("target_classes"))
            c.target_classes.push_back(class_from_name(s.get<std::string>()));
    }
    return c;
}

namespace {

json instance_to_json(const SceneInstance& inst) {
    json j;
    j["seed"] = inst.seed;
    j["structure_offset"] = {inst.structure_offset.x, inst.structure_offset.y};
    json jit = json::array(), ctr = json::array();
    for (int i = 0; i < 3; ++i) {
        jit.push_back({inst.jitters[static_cast<size_t>(i)].x, inst.jitters[static_cast<size_t>(i)].y});
        ctr.push_back({inst.oi_centers[static_cast<size_t>(i)].x, inst.oi_centers[static_cast<size_t>(i)].y});
    }
    j["jitters"] = jit;
    j["oi_centers"] = ctr;
    json nc = json::array();
    for (const auto& c : inst.noise_centers) nc.push_back({c.x, c.y});
    j["noise_centers"] = nc;
    j["oi_sprite_draws"] = inst.oi_sprite_draws;
    j["noise_sprite_draws"] = inst.noise_sprite_draws;
    return j;
}

std::string index_name(size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu.png", i);
    return buf;
}

}  // namespace

json export_dataset(const std::vector<RenderedScene>& scenes, const CsoConfig& config,
                    uint64_t master_seed, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "images", ec);
    fs::create_directories(fs::path(dir) / "masks", ec);
    if (ec) throw IoError("cannot create dataset directories under " + dir);

    json manifest;
    manifest["version"] = 1;
    manifest["type"] = "cso-dataset";
    manifest["config"] = config_to_json(config);
    manifest["master_seed"] = master_seed;
    manifest["count"] = scenes.size();
    json entries = json::array();

    for (size_t i = 0; i < scenes.size(); ++i) {
        const auto& s = scenes[i];
        io::PngImage img;
        img.width = s.image.w;
        img.height = s.image.h;
        img.channels = 1;
        img.pixels.resize(s.image.px.size());
        for (size_t p = 0; p < s.image.px.size(); ++p)
            img.pixels[p] = intensity_to_u8(s.image.px[p]);
        io::write_png((fs::path(dir) / "images" / index_name(i)).string(), img);

        io::PngImage msk;
        msk.width = s.mask.w;
        msk.height = s.mask.h;
        msk.channels = 1;
        msk.pixels = s.mask.v;
        io::write_png((fs::path(dir) / "masks" / index_name(i)).string(), msk);

        json e = instance_to_json(s.instance);
        e["index"] = i;
        e["image"] = "images/" + index_name(i);
        e["mask"] = "masks/" + index_name(i);
        entries.push_back(std::move(e));
    }
    manifest["scenes"] = std::move(entries);

    std::ofstream f(fs::path(dir) / "manifest.json");
    if (!f) throw IoError("cannot write manifest under " + dir);
    f << manifest.dump(2) << "\n";
    if (!f) throw IoError("short write of manifest under " + dir);
    return manifest;
}

LoadedDataset load_dataset(const std::string& dir) {
    std::ifstream f(fs::path(dir) / "manifest.json");
    if (!f) throw IoError("cannot open manifest under " + dir);
    LoadedDataset out;
    try {
        out.manifest = json::parse(f);
    } catch (const json::exception& e) {
        throw IoError(std::string("manifest parse failure: ") + e.what());
    }
    for (const auto& e : out.manifest.at("scenes")) {
        const auto img = io::read_png((fs::path(dir) / e.at("image").get<std::string>()).string());
        const auto msk = io::read_png((fs::path(dir) / e.at("mask").get<std::string>()).string());
        if (img.channels != 1 || msk.channels != 1)
            throw IoError("dataset images must be 8-bit grayscale");
        Image fi(img.width, img.height);
        for (size_t p = 0; p < fi.px.size(); ++p)
            fi.px[p] = static_cast<float>(img.pixels[p]) / 255.0f;
        Mask fm(msk.width, msk.height);
        fm.v = msk.pixels;
        out.images.push_back(std::move(fi));
        out.masks.push_back(std::move(fm));
    }
    return out;
}

}  // namespace cso::scene
