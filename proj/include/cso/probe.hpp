#pragma once

// Sliding-reference perturbation probing: one OI (the reference) is slid
// across a stride-20 grid while the triangle stays perfectly centered with
// zero jitter, and shirt precision/recall are averaged over a fixed number of
// scenes per position.
//
// Probe scene rules:
//   - the reference is composited last, above the other OIs and all noise
//   - the metric truth for the reference class follows its slid position;
//     truth for the other classes stays at the canonical vertices, and shirt
//     truth is never erased by reference occlusion
//   - noise and sprites are resampled per image from seeds derived as
//     hash_seed(probe_seed, cell_index, image_index); each probe scene
//     consumes rng draws in the order: noise centers (x,y each), OI sprite
//     draws (shirt, pants, bag), noise sprite draws

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cso/png_io.hpp"
#include "cso/scene.hpp"
#include "cso/unet.hpp"

namespace cso::probe {

enum class Measure { precision, recall };
const char* measure_name(Measure m);

struct ProbeConfig {
    scene::SemClass reference = scene::SemClass::shirt;
    int stride = 20;
    int images_per_position = 20;
    bool want_precision = true;
    bool want_recall = true;
    uint64_t seed = 1;
};

struct Heatmap {
    int grid_w = 0, grid_h = 0;
    int stride = 20;
    Measure measure = Measure::recall;
    scene::SemClass reference = scene::SemClass::shirt;
    std::vector<double> values;  // row-major, [0,1]

    double at(int i, int j) const { return values[static_cast<size_t>(j) * grid_w + i]; }
    // cell centers tile the image symmetrically: (stride/2 + stride*i, ...)
    scene::Vec2f center(int i, int j) const {
        return {static_cast<float>(stride / 2 + stride * i),
                static_cast<float>(stride / 2 + stride * j)};
    }
};

// Centered, zero-jitter scene with the reference moved to `position`.
scene::RenderedScene make_probe_scene(const scene::CsoConfig& config,
                                      scene::SemClass reference, scene::Vec2f position,
                                      Rng& rng, const sprites::SpriteProvider& provider);

// What an ideal segmenter of visible pixels would answer: topmost-sprite
// labels, including the reference occluding shirt truth. This is the
// "truth-predicting oracle" used to validate the probe pipeline.
scene::Mask visible_truth_mask(const scene::CsoConfig& config,
                               const scene::RenderedScene& probe_scene,
                               scene::SemClass reference,
                               const sprites::SpriteProvider& provider);

using Segmenter = std::function<scene::Mask(const scene::RenderedScene&)>;

// Wraps a trained model; throws RegimeMismatch when the model's class count
// does not match the probe regime.
Segmenter model_segmenter(const unet::UNetModel<float>& model,
                          const scene::CsoConfig& config);

std::vector<Heatmap> run_probe(const Segmenter& segment, const ProbeConfig& probe,
                               const scene::CsoConfig& config,
                               const sprites::SpriteProvider& provider);

// CSV: one comment header line with the heatmap metadata, then a position
// header row and grid_h value rows. Values round-trip bit-exactly.
void write_heatmap_csv(const Heatmap& hm, const std::string& path);
Heatmap read_heatmap_csv(const std::string& path);

// Colormapped grid alpha-blended over a dummy centered-structure image (the
// reference itself is not displayed).
io::PngImage render_heatmap(const Heatmap& hm, const scene::CsoConfig& config,
                            const sprites::SpriteProvider& provider);

}  // namespace cso::probe
