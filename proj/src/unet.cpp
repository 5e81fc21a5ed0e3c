#include "cso/unet.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "cso/init.hpp"
#include "cso/rng.hpp"

namespace cso::unet {

using nlohmann::json;

namespace {

struct ParamSpec {
    std::string name;
    std::vector<int> shape;
    int fan_in;  // 0 = zero-initialized (biases)
};

int width_at(const UNetArch& a, int level) { return a.base_width << (level - 1); }

// The single source of truth for parameter names, shapes and order.
std::vector<ParamSpec> param_specs(const UNetArch& a) {
    std::vector<ParamSpec> specs;
    const int k = a.kernel;
    auto conv = [&](const std::string& prefix, int cin, int cout, int kk) {
        specs.push_back({prefix + ".weight", {cout, cin, kk, kk}, kk * kk * cin});
        specs.push_back({prefix + ".bias", {cout}, 0});
    };

    int cin = a.in_channels;
    for (int l = 1; l < a.levels; ++l) {
        const int w = width_at(a, l);
        for (int i = 1; i <= a.convs_per_level; ++i) {
            conv("enc" + std::to_string(l) + ".conv" + std::to_string(i), cin, w, k);
            cin = w;
        }
    }
    const int wb = width_at(a, a.levels);
    for (int i = 1; i <= a.convs_per_level; ++i) {
        conv("bott.conv" + std::to_string(i), cin, wb, k);
        cin = wb;
    }
    for (int l = a.levels - 1; l >= 1; --l) {
        const int w = width_at(a, l);
        // transposed conv: weight (C_in, C_out, 2, 2), no bias
        specs.push_back({"up" + std::to_string(l) + ".weight", {cin, w, 2, 2}, 4 * cin});
        cin = w;
        for (int i = 1; i <= a.convs_per_level; ++i) {
            const int in_ch = i == 1 ? 2 * w : w;  // concat(upsampled, skip)
            conv("dec" + std::to_string(l) + ".conv" + std::to_string(i), in_ch, w, k);
        }
    }
    conv("head", cin, a.out_channels, 1);
    return specs;
}

}  // namespace

template <typename T>
UNetModel<T> build_unet(const UNetArch& arch, uint64_t seed) {
    UNetModel<T> model;
    model.arch = arch;
    Rng rng(hash_seed(seed, fnv1a("unet-init")));
    for (const auto& spec : param_specs(arch)) {
        nn::Tensor<T> t = spec.fan_in > 0 ? nn::he_init<T>(spec.shape, spec.fan_in, rng)
                                          : nn::Tensor<T>(spec.shape);
        model.params.push_back({spec.name, std::move(t)});
    }
    return model;
}

template <typename T>
typename nn::Tape<T>::NodeId UNetModel<T>::forward(
    nn::Tape<T>& tape, typename nn::Tape<T>::NodeId input, bool train,
    std::vector<typename nn::Tape<T>::NodeId>* param_ids) const {
    using NodeId = typename nn::Tape<T>::NodeId;

    const auto& in_shape = tape.value(input).shape;
    if (in_shape.size() != 4 || in_shape[1] != arch.in_channels)
        throw ShapeMismatch("unet input must be (N," + std::to_string(arch.in_channels) + ",H,W)");
    const int div = 1 << (arch.levels - 1);
    if (in_shape[2] % div != 0 || in_shape[3] % div != 0)
        throw BadSpatialDims("unet input spatial dims must be divisible by " + std::to_string(div));

    std::map<std::string, NodeId> leaf;
    for (const auto& p : params) {
        NodeId id = tape.leaf(p.value, train);
        leaf[p.name] = id;
        if (param_ids) param_ids->push_back(id);
    }
    auto conv_block = [&](NodeId x, const std::string& prefix, int pad) {
        return tape.relu(tape.conv2d(x, leaf.at(prefix + ".weight"), leaf.at(prefix + ".bias"), 1, pad));
    };

    NodeId x = input;
    std::vector<NodeId> skips;
    for (int l = 1; l < arch.levels; ++l) {
        for (int i = 1; i <= arch.convs_per_level; ++i)
            x = conv_block(x, "enc" + std::to_string(l) + ".conv" + std::to_string(i), arch.padding);
        skips.push_back(x);
        x = tape.maxpool2d(x);
    }
    for (int i = 1; i <= arch.convs_per_level; ++i)
        x = conv_block(x, "bott.conv" + std::to_string(i), arch.padding);
    for (int l = arch.levels - 1; l >= 1; --l) {
        x = tape.transposed_conv2d(x, leaf.at("up" + std::to_string(l) + ".weight"), 2, 2);
        x = tape.concat_channels(x, skips[static_cast<size_t>(l - 1)]);
        for (int i = 1; i <= arch.convs_per_level; ++i)
            x = conv_block(x, "dec" + std::to_string(l) + ".conv" + std::to_string(i), arch.padding);
    }
    return tape.conv2d(x, leaf.at("head.weight"), leaf.at("head.bias"), 1, 0);
}

std::vector<nn::LayerSpec> encoder_layer_stack(const UNetArch& a) {
    using K = nn::LayerSpec::Kind;
    std::vector<nn::LayerSpec> layers;
    for (int l = 1; l < a.levels; ++l) {
        for (int i = 1; i <= a.convs_per_level; ++i)
            layers.push_back({K::conv, a.kernel, 1, a.padding,
                              "enc" + std::to_string(l) + ".conv" + std::to_string(i)});
        layers.push_back({K::pool, 2, 2, 0, "pool" + std::to_string(l)});
    }
    for (int i = 1; i <= a.convs_per_level; ++i)
        layers.push_back({K::conv, a.kernel, 1, a.padding, "bott.conv" + std::to_string(i)});
    return layers;
}

std::vector<nn::LayerSpec> full_layer_stack(const UNetArch& a) {
    using K = nn::LayerSpec::Kind;
    auto layers = encoder_layer_stack(a);
    for (int l = a.levels - 1; l >= 1; --l) {
        layers.push_back({K::tconv, 2, 2, 0, "up" + std::to_string(l)});
        for (int i = 1; i <= a.convs_per_level; ++i)
            layers.push_back({K::conv, a.kernel, 1, a.padding,
                              "dec" + std::to_string(l) + ".conv" + std::to_string(i)});
    }
    layers.push_back({K::conv, 1, 1, 0, "head"});
    return layers;
}

// --- checkpoints -------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'C', 'S', 'O', 'U', 'N', 'E', 'T', '1'};

json arch_to_json(const UNetArch& a) {
    return json{{"levels", a.levels},
                {"base_width", a.base_width},
                {"in_channels", a.in_channels},
                {"out_channels", a.out_channels},
                {"convs_per_level", a.convs_per_level},
                {"kernel", a.kernel},
                {"padding", a.padding}};
}

UNetArch arch_from_json(const json& j) {
    UNetArch a;
    a.levels = j.at("levels").get<int>();
    a.base_width = j.at("base_width").get<int>();
    a.in_channels = j.at("in_channels").get<int>();
    a.out_channels = j.at("out_channels").get<int>();
    a.convs_per_level = j.at("convs_per_level").get<int>();
    a.kernel = j.at("kernel").get<int>();
    a.padding = j.at("padding").get<int>();
    return a;
}
}  // namespace

void save_checkpoint(const UNetModel<float>& model, const std::string& path,
                     const std::string& config_digest) {
    json header;
    header["version"] = 1;
    header["arch"] = arch_to_json(model.arch);
    header["config_digest"] = config_digest;
    json tensors = json::array();
    size_t offset = 0;
    for (const auto& p : model.params) {
        const size_t nbytes = p.value.numel() * sizeof(float);
        tensors.push_back({{"name", p.name},
                           {"shape", p.value.shape},
                           {"offset", offset},
                           {"nbytes", nbytes}});
        offset += nbytes;
    }
    header["tensors"] = std::move(tensors);
    const std::string hdr = header.dump();

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open for write: " + tmp);
        f.write(kMagic, sizeof kMagic);
        const uint32_t hlen = static_cast<uint32_t>(hdr.size());
        const uint8_t lenb[4] = {static_cast<uint8_t>(hlen), static_cast<uint8_t>(hlen >> 8),
                                 static_cast<uint8_t>(hlen >> 16), static_cast<uint8_t>(hlen >> 24)};
        f.write(reinterpret_cast<const char*>(lenb), 4);
        f.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
        for (const auto& p : model.params)
            f.write(reinterpret_cast<const char*>(p.value.data.data()),
                    static_cast<std::streamsize>(p.value.numel() * sizeof(float)));
        if (!f) throw IoError("short write: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place: " + path);
}

UNetModel<float> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    const auto fsize = static_cast<size_t>(f.tellg());
    f.seekg(0);
    std::vector<char> bytes(fsize);
    f.read(bytes.data(), static_cast<std::streamsize>(fsize));
    if (!f) throw IoError("short read: " + path);

    if (fsize < 12 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw CorruptHeader("not a checkpoint file: " + path);
    const auto* lb = reinterpret_cast<const uint8_t*>(bytes.data() + 8);
    const uint32_t hlen = static_cast<uint32_t>(lb[0]) | (static_cast<uint32_t>(lb[1]) << 8) |
                          (static_cast<uint32_t>(lb[2]) << 16) | (static_cast<uint32_t>(lb[3]) << 24);
    if (12 + static_cast<size_t>(hlen) > fsize)
        throw CorruptHeader("header length exceeds file size");

    json header;
    try {
        header = json::parse(bytes.data() + 12, bytes.data() + 12 + hlen);
    } catch (const json::exception& e) {
        throw CorruptHeader(std::string("header json: ") + e.what());
    }
    if (header.at("version").get<int>() != 1) throw CorruptHeader("unsupported checkpoint version");

    UNetModel<float> model;
    model.arch = arch_from_json(header.at("arch"));

    // The header's tensor index must agree name-for-name and shape-for-shape
    // with what the declared arch implies.
    const auto specs = param_specs(model.arch);
    const auto& tensors = header.at("tensors");
    if (tensors.size() != specs.size())
        throw ArchMismatch("checkpoint lists " + std::to_string(tensors.size()) +
                           " tensors, arch implies " + std::to_string(specs.size()));

    const size_t payload_start = 12 + hlen;
    for (size_t i = 0; i < specs.size(); ++i) {
        const auto& te = tensors[i];
        if (te.at("name").get<std::string>() != specs[i].name ||
            te.at("shape").get<std::vector<int>>() != specs[i].shape)
            throw ArchMismatch("tensor " + std::to_string(i) + " (" + specs[i].name +
                               ") does not match the declared arch");
        const size_t offset = te.at("offset").get<size_t>();
        const size_t nbytes = te.at("nbytes").get<size_t>();
        nn::Tensor<float> t(specs[i].shape);
        if (nbytes != t.numel() * sizeof(float))
            throw ArchMismatch("tensor " + specs[i].name + " byte count mismatch");
        if (payload_start + offset + nbytes > fsize)
            throw IoError("checkpoint payload truncated at tensor " + specs[i].name);
        std::memcpy(t.data.data(), bytes.data() + payload_start + offset, nbytes);
        model.params.push_back({specs[i].name, std::move(t)});
    }
    return model;
}

template struct UNetModel<float>;
template struct UNetModel<double>;
template UNetModel<float> build_unet<float>(const UNetArch&, uint64_t);
template UNetModel<double> build_unet<double>(const UNetArch&, uint64_t);

}  // namespace cso::unet
