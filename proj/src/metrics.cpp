#include "cso/metrics.hpp"

namespace cso::experiment {

ClassCounts compute_metrics(const scene::Mask& pred, const scene::Mask& truth, int class_id) {
    if (pred.w != truth.w || pred.h != truth.h)
        throw ShapeMismatch("prediction and truth masks differ in size");
    ClassCounts c;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        const bool p = pred.v[i] == class_id;
        const bool t = truth.v[i] == class_id;
        if (p && t) ++c.tp;
        else if (p) ++c.fp;
        else if (t) ++c.fn;
    }
    return c;
}

scene::Mask argmax_classes(const nn::Tensor<float>& logits, int batch_index) {
    const int c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    const size_t plane = static_cast<size_t>(h) * w;
    const float* base = logits.data.data() + static_cast<size_t>(batch_index) * c * plane;
    scene::Mask m(w, h);
    for (size_t px = 0; px < plane; ++px) {
        int best = 0;
        float bv = base[px];
        for (int ch = 1; ch < c; ++ch) {
            const float v = base[static_cast<size_t>(ch) * plane + px];
            if (v > bv) { bv = v; best = ch; }
        }
        m.v[px] = static_cast<uint8_t>(best);
    }
    return m;
}

io::PngImage render_overlay(const scene::Image& image, const scene::Mask& pred,
                            const scene::Mask& truth) {
    if (image.w != pred.w || image.h != pred.h || pred.w != truth.w || pred.h != truth.h)
        throw ShapeMismatch("overlay inputs differ in size");
    io::PngImage out;
    out.width = image.w;
    out.height = image.h;
    out.channels = 3;
    out.pixels.resize(static_cast<size_t>(image.w) * image.h * 3);
    for (size_t i = 0; i < pred.v.size(); ++i) {
        const uint8_t p = pred.v[i], t = truth.v[i];
        uint8_t r, g, b;
        if (p == t && t > 0) {           // true positive
            r = 0; g = 200; b = 0;
        } else if (p > 0) {              // false positive (p != t here)
            if (p == 1) { r = 230; g = 230; b = 0; }   // shirt
            else        { r = 230; g = 0; b = 230; }   // other target classes
        } else if (t > 0) {              // false negative
            r = 0; g = 0; b = 230;
        } else {
            const uint8_t v = scene::intensity_to_u8(image.px[i]);
            r = g = b = v;
        }
        out.pixels[i * 3 + 0] = r;
        out.pixels[i * 3 + 1] = g;
        out.pixels[i * 3 + 2] = b;
    }
    return out;
}

}  // namespace cso::experiment
