#include "cso/probe.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cso/metrics.hpp"

namespace cso::probe {

using scene::SemClass;

const char* measure_name(Measure m) {
    return m == Measure::precision ? "precision" : "recall";
}

namespace {

constexpr SemClass kOiOrder[3] = {SemClass::shirt, SemClass::pants, SemClass::bag};

void blit_label(scene::Mask& mask, const sprites::Sprite& sprite, scene::Vec2f center,
                uint8_t label) {
    const int tlx = static_cast<int>(std::lround(center.x)) - sprites::Sprite::kSize / 2;
    const int tly = static_cast<int>(std::lround(center.y)) - sprites::Sprite::kSize / 2;
    for (int sy = 0; sy < sprites::Sprite::kSize; ++sy) {
        const int ty = tly + sy;
        if (ty < 0 || ty >= mask.h) continue;
        for (int sx = 0; sx < sprites::Sprite::kSize; ++sx) {
            const int tx = tlx + sx;
            if (tx < 0 || tx >= mask.w) continue;
            if (sprite.at(sx, sy) > 0.0f) mask.at(tx, ty) = label;
        }
    }
}

void blit_image(scene::Image& img, const sprites::Sprite& sprite, scene::Vec2f center) {
    const int tlx = static_cast<int>(std::lround(center.x)) - sprites::Sprite::kSize / 2;
    const int tly = static_cast<int>(std::lround(center.y)) - sprites::Sprite::kSize / 2;
    for (int sy = 0; sy < sprites::Sprite::kSize; ++sy) {
        const int ty = tly + sy;
        if (ty < 0 || ty >= img.h) continue;
        for (int sx = 0; sx < sprites::Sprite::kSize; ++sx) {
            const int tx = tlx + sx;
            if (tx < 0 || tx >= img.w) continue;
            const float v = sprite.at(sx, sy);
            if (v > 0.0f) img.at(tx, ty) = v;
        }
    }
}

int class_slot(SemClass c) { return static_cast<int>(c); }

}  // namespace

namespace {

scene::SceneInstance sample_probe_instance(const scene::CsoConfig& config,
                                           SemClass reference, scene::Vec2f position,
                                           Rng& rng) {
    if (position.x < 0 || position.x >= static_cast<float>(config.image_size) ||
        position.y < 0 || position.y >= static_cast<float>(config.image_size))
        throw OutOfBounds("probe position outside the image");
    if (class_slot(reference) > 2)
        throw OutOfBounds("reference must be one of the three OIs");

    scene::SceneInstance inst;
    inst.structure_offset = {0, 0};
    for (auto& j : inst.jitters) j = {0, 0};

    const auto canon = canonical_oi_centers(config);
    for (int i = 0; i < 3; ++i) inst.oi_centers[static_cast<size_t>(i)] = canon[static_cast<size_t>(i)];
    inst.oi_centers[static_cast<size_t>(class_slot(reference))] = position;

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

scene::RenderedScene render_probe(const scene::SceneInstance& inst,
                                  const scene::CsoConfig& config, SemClass reference,
                                  const sprites::SpriteProvider& provider) {
    scene::RenderedScene out;
    out.instance = inst;
    out.image = scene::Image(config.image_size, config.image_size);
    out.mask = scene::Mask(config.image_size, config.image_size);

    sprites::Sprite oi_sprites[3];
    for (int i = 0; i < 3; ++i)
        oi_sprites[i] = provider.sprite_for_draw(kOiOrder[i],
                                                 inst.oi_sprite_draws[static_cast<size_t>(i)]);

    // image: noise, non-reference OIs in class order, reference last
    for (size_t i = 0; i < inst.noise_centers.size(); ++i)
        blit_image(out.image,
                   provider.sprite_for_draw(config.noise_class, inst.noise_sprite_draws[i]),
                   inst.noise_centers[i]);
    for (int i = 0; i < 3; ++i)
        if (kOiOrder[i] != reference)
            blit_image(out.image, oi_sprites[i], inst.oi_centers[static_cast<size_t>(i)]);
    const int ref = class_slot(reference);
    blit_image(out.image, oi_sprites[ref], inst.oi_centers[static_cast<size_t>(ref)]);

    // metric truth: every class labeled at its actual position, shirt last so
    // reference occlusion never erases its truth pixels
    for (int i = 2; i >= 0; --i) {
        const int label = config.class_index(kOiOrder[i]);
        if (label > 0)
            blit_label(out.mask, oi_sprites[i], inst.oi_centers[static_cast<size_t>(i)],
                       static_cast<uint8_t>(label));
    }
    return out;
}

}  // namespace

scene::RenderedScene make_probe_scene(const scene::CsoConfig& config, SemClass reference,
                                      scene::Vec2f position, Rng& rng,
                                      const sprites::SpriteProvider& provider) {
    return render_probe(sample_probe_instance(config, reference, position, rng), config,
                        reference, provider);
}

scene::Mask visible_truth_mask(const scene::CsoConfig& config,
                               const scene::RenderedScene& probe_scene,
                               SemClass reference,
                               const sprites::SpriteProvider& provider) {
    const auto& inst = probe_scene.instance;
    scene::Mask mask(config.image_size, config.image_size);
    // topmost-sprite labels, mirroring the image compositing order exactly
    for (size_t i = 0; i < inst.noise_centers.size(); ++i)
        blit_label(mask,
                   provider.sprite_for_draw(config.noise_class, inst.noise_sprite_draws[i]),
                   inst.noise_centers[i], 0);
    for (int i = 0; i < 3; ++i)
        if (kOiOrder[i] != reference)
            blit_label(mask,
                       provider.sprite_for_draw(kOiOrder[i], inst.oi_sprite_draws[static_cast<size_t>(i)]),
                       inst.oi_centers[static_cast<size_t>(i)],
                       static_cast<uint8_t>(config.class_index(kOiOrder[i])));
    const int ref = class_slot(reference);
    blit_label(mask, provider.sprite_for_draw(reference, inst.oi_sprite_draws[static_cast<size_t>(ref)]),
               inst.oi_centers[static_cast<size_t>(ref)],
               static_cast<uint8_t>(config.class_index(reference)));
    return mask;
}

Segmenter model_segmenter(const unet::UNetModel<float>& model,
                          const scene::CsoConfig& config) {
    if (model.arch.out_channels != config.num_mask_classes())
        throw RegimeMismatch("model has " + std::to_string(model.arch.out_channels) +
                             " classes, probe regime needs " +
                             std::to_string(config.num_mask_classes()));
    const unet::UNetModel<float>* m = &model;
    return [m](const scene::RenderedScene& s) {
        nn::Tape<float> tape;
        nn::Tensor<float> input({1, 1, s.image.h, s.image.w});
        std::copy(s.image.px.begin(), s.image.px.end(), input.data.begin());
        auto logits = tape.value(m->forward(tape, tape.leaf(std::move(input), false), false));
        return experiment::argmax_classes(logits, 0);
    };
}

std::vector<Heatmap> run_probe(const Segmenter& segment, const ProbeConfig& probe,
                               const scene::CsoConfig& config,
                               const sprites::SpriteProvider& provider) {
    if (probe.stride <= 0 || config.image_size % probe.stride != 0)
        throw ConfigError("probe stride must divide the image size");
    if (probe.images_per_position < 1)
        throw ConfigError("images_per_position must be >= 1");
    const int g = config.image_size / probe.stride;

    Heatmap precision, recall;
    for (Heatmap* hm : {&precision, &recall}) {
        hm->grid_w = hm->grid_h = g;
        hm->stride = probe.stride;
        hm->reference = probe.reference;
        hm->values.assign(static_cast<size_t>(g) * g, 0.0);
    }
    precision.measure = Measure::precision;
    recall.measure = Measure::recall;

    for (int j = 0; j < g; ++j)
        for (int i = 0; i < g; ++i) {
            const uint64_t cell = static_cast<uint64_t>(j) * static_cast<uint64_t>(g) + static_cast<uint64_t>(i);
            double psum = 0.0, rsum = 0.0;
            for (int k = 0; k < probe.images_per_position; ++k) {
                Rng rng(hash_seed(probe.seed, cell, static_cast<uint64_t>(k)));
                const auto ps = make_probe_scene(config, probe.reference,
                                                 recall.center(i, j), rng, provider);
                const scene::Mask pred = segment(ps);
                const auto counts = experiment::compute_metrics(pred, ps.mask, 1);
                psum += counts.precision();
                rsum += counts.recall();
            }
            const double n = static_cast<double>(probe.images_per_position);
            precision.values[static_cast<size_t>(cell)] = psum / n;
            recall.values[static_cast<size_t>(cell)] = rsum / n;
        }

    std::vector<Heatmap> out;
    if (probe.want_precision) out.push_back(std::move(precision));
    if (probe.want_recall) out.push_back(std::move(recall));
    return out;
}

void write_heatmap_csv(const Heatmap& hm, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << "# cso-heatmap measure=" << measure_name(hm.measure)
      << " reference=" << sprites::class_name(hm.reference) << " stride=" << hm.stride
      << " grid_w=" << hm.grid_w << " grid_h=" << hm.grid_h << "\n";
    f << "y\\x";
    for (int i = 0; i < hm.grid_w; ++i) f << "," << hm.stride / 2 + hm.stride * i;
    f << "\n";
    for (int j = 0; j < hm.grid_h; ++j) {
        f << hm.stride / 2 + hm.stride * j;
        for (int i = 0; i < hm.grid_w; ++i) {
            char buf[40];
            std::snprintf(buf, sizeof buf, ",%.17g", hm.at(i, j));
            f << buf;
        }
        f << "\n";
    }
    if (!f) throw IoError("short write: " + path);
}

Heatmap read_heatmap_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("# cso-heatmap", 0) != 0)
        throw IoError("not a heatmap csv: " + path);

    Heatmap hm;
    std::istringstream hdr(line.substr(std::strlen("# cso-heatmap")));
    std::string kv;
    while (hdr >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
        if (key == "measure")
            hm.measure = val == "precision" ? Measure::precision : Measure::recall;
        else if (key == "reference") {
            for (int c = 0; c < sprites::kNumClasses; ++c)
                if (val == sprites::class_name(static_cast<SemClass>(c)))
                    hm.reference = static_cast<SemClass>(c);
        } else if (key == "stride")
            hm.stride = std::stoi(val);
        else if (key == "grid_w")
            hm.grid_w = std::stoi(val);
        else if (key == "grid_h")
            hm.grid_h = std::stoi(val);
    }
    if (hm.grid_w <= 0 || hm.grid_h <= 0) throw IoError("heatmap csv missing grid dims");

    if (!std::getline(f, line)) throw IoError("heatmap csv missing position header");
    hm.values.reserve(static_cast<size_t>(hm.grid_w) * hm.grid_h);
    for (int j = 0; j < hm.grid_h; ++j) {
        if (!std::getline(f, line)) throw IoError("heatmap csv truncated");
        std::istringstream row(line);
        std::string cellv;
        std::getline(row, cellv, ',');  // row label
        for (int i = 0; i < hm.grid_w; ++i) {
            if (!std::getline(row, cellv, ',')) throw IoError("heatmap csv row truncated");
            hm.values.push_back(std::strtod(cellv.c_str(), nullptr));
        }
    }
    return hm;
}

namespace {

// viridis anchors, linearly interpolated
void colormap(double v, uint8_t& r, uint8_t& g, uint8_t& b) {
    static const int anchors[9][3] = {{68, 1, 84},    {72, 40, 120},  {62, 74, 137},
                                      {49, 104, 142}, {38, 130, 142}, {31, 158, 137},
                                      {53, 183, 121}, {109, 205, 89}, {253, 231, 37}};
    v = std::min(1.0, std::max(0.0, v)) * 8.0;
    const int lo = std::min(7, static_cast<int>(v));
    const double t = v - lo;
    r = static_cast<uint8_t>(std::lround(anchors[lo][0] + t * (anchors[lo + 1][0] - anchors[lo][0])));
    g = static_cast<uint8_t>(std::lround(anchors[lo][1] + t * (anchors[lo + 1][1] - anchors[lo][1])));
    b = static_cast<uint8_t>(std::lround(anchors[lo][2] + t * (anchors[lo + 1][2] - anchors[lo][2])));
}

}  // namespace

io::PngImage render_heatmap(const Heatmap& hm, const scene::CsoConfig& config,
                            const sprites::SpriteProvider& provider) {
    // dummy centered structure: the three OIs, no noise, fixed sprite draws
    scene::Image dummy(config.image_size, config.image_size);
    const auto canon = canonical_oi_centers(config);
    for (int i = 0; i < 3; ++i)
        blit_image(dummy, provider.sprite_for_draw(kOiOrder[i], hash_seed(0xD011u, static_cast<uint64_t>(i))),
                   canon[static_cast<size_t>(i)]);

    io::PngImage out;
    out.width = config.image_size;
    out.height = config.image_size;
    out.channels = 3;
    out.pixels.resize(static_cast<size_t>(out.width) * out.height * 3);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            const int i = std::min(hm.grid_w - 1, x / hm.stride);
            const int j = std::min(hm.grid_h - 1, y / hm.stride);
            uint8_t r, g, b;
            colormap(hm.at(i, j), r, g, b);
            const double gray = 255.0 * static_cast<double>(dummy.at(x, y));
            const size_t p = (static_cast<size_t>(y) * out.width + x) * 3;
            out.pixels[p + 0] = static_cast<uint8_t>(std::lround(0.6 * r + 0.4 * gray));
            out.pixels[p + 1] = static_cast<uint8_t>(std::lround(0.6 * g + 0.4 * gray));
            out.pixels[p + 2] = static_cast<uint8_t>(std::lround(0.6 * b + 0.4 * gray));
        }
    return out;
}

}  // namespace cso::probe
