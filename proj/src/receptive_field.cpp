#include "cso/receptive_field.hpp"

#include <stdexcept>

namespace cso::nn {

std::vector<RfEntry> receptive_field(std::span<const LayerSpec> layers) {
    std::vector<RfEntry> out;
    out.reserve(layers.size());
    double r = 1.0, j = 1.0;
    for (const LayerSpec& l : layers) {
        if (l.kernel < 1 || l.stride < 1 || l.padding < 0)
            throw std::invalid_argument("receptive_field: bad layer spec");
        switch (l.kind) {
            case LayerSpec::Kind::conv:
            case LayerSpec::Kind::pool:
                r += static_cast<double>(l.kernel - 1) * j;
                j *= static_cast<double>(l.stride);
                break;
            case LayerSpec::Kind::tconv:
                j /= static_cast<double>(l.stride);
                r += static_cast<double>(l.kernel - 1) * j;
                break;
        }
        out.push_back({l.label, r, j});
    }
    return out;
}

}  // namespace cso::nn
