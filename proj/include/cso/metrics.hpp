#pragma once

// Per-pixel segmentation metrics and the diagnostic overlay rendering.
//
// Conventions: precision = TP/(TP+FP), 0 when the model predicts nothing;
// recall = TP/(TP+FN), 1 when the class has no truth pixels. Counts are
// additive, so test-set metrics pool counts across images before the ratio.

#include <cstdint>

#include "cso/png_io.hpp"
#include "cso/scene.hpp"
#include "cso/tensor.hpp"

namespace cso::experiment {

struct ClassCounts {
    int64_t tp = 0, fp = 0, fn = 0;

    double precision() const {
        return tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    }
    double recall() const {
        return tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
    }
};

ClassCounts compute_metrics(const scene::Mask& pred, const scene::Mask& truth, int class_id);

// Per-pixel argmax over channels; ties resolve to the lowest class index.
scene::Mask argmax_classes(const nn::Tensor<float>& logits, int batch_index);

// Fig-2 style diagnostic: green = true positives of any target class,
// blue = false negatives, yellow = shirt false positives, magenta = false
// positives of other classes, grayscale input elsewhere.
io::PngImage render_overlay(const scene::Image& image, const scene::Mask& pred,
                            const scene::Mask& truth);

}  // namespace cso::experiment
