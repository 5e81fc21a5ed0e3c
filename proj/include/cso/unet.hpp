#pragma once

// 4-level U-Net assembled from the autodiff primitives.
//
// Layout per level L (widths double each level, base_width at level 1):
//   encoder: convs_per_level 3x3 zero-padded convs + relu, then 2x2 maxpool
//   bottleneck (level `levels`): convs_per_level convs
//   decoder: 2x2 stride-2 transposed conv, concat(upsampled, skip), convs
//   head: 1x1 conv to out_channels logits
//
// Parameter names are stable and ordered exactly as initialized:
//   enc{L}.conv{i}.weight/.bias, bott.conv{i}.*, up{L}.weight,
//   dec{L}.conv{i}.*, head.weight/.bias
//
// Checkpoint file: "CSOUNET1" magic, u32-LE header length, JSON header
// (arch, config digest, tensor index with offsets), then raw little-endian
// f32 tensor payloads.

#include <cstdint>
#include <string>
#include <vector>

#include "cso/autodiff.hpp"
#include "cso/receptive_field.hpp"

namespace cso::unet {

struct UNetArch {
    int levels = 4;
    int base_width = 16;      // 16 = desk profile, 64 = paper-scale profile
    int in_channels = 1;
    int out_channels = 4;     // 4 for Easy/Hard masks, 2 for Strict
    int convs_per_level = 2;
    int kernel = 3;
    int padding = 1;
    bool operator==(const UNetArch&) const = default;
};

template <typename T>
struct UNetModel {
    struct Param {
        std::string name;
        nn::Tensor<T> value;
    };

    UNetArch arch;
    std::vector<Param> params;

    size_t parameter_count() const {
        size_t n = 0;
        for (const auto& p : params) n += p.value.numel();
        return n;
    }

    // Registers every parameter as a tape leaf (requires_grad = train) and
    // runs the network. `param_ids`, when given, receives the leaf ids in
    // params order so the caller can read gradients back.
    typename nn::Tape<T>::NodeId forward(
        nn::Tape<T>& tape, typename nn::Tape<T>::NodeId input, bool train = false,
        std::vector<typename nn::Tape<T>::NodeId>* param_ids = nullptr) const;
};

// He-initialized weights (fan_in = k*k*C_in), zero biases; the draw sequence
// is the documented parameter order, so equal seeds give equal models.
template <typename T>
UNetModel<T> build_unet(const UNetArch& arch, uint64_t seed);

// Layer stacks for the receptive-field calculator.
std::vector<nn::LayerSpec> encoder_layer_stack(const UNetArch& arch);
std::vector<nn::LayerSpec> full_layer_stack(const UNetArch& arch);

void save_checkpoint(const UNetModel<float>& model, const std::string& path,
                     const std::string& config_digest = "");
UNetModel<float> load_checkpoint(const std::string& path);

extern template struct UNetModel<float>;
extern template struct UNetModel<double>;
extern template UNetModel<float> build_unet<float>(const UNetArch&, uint64_t);
extern template UNetModel<double> build_unet<double>(const UNetArch&, uint64_t);

}  // namespace cso::unet
