#pragma once

#include "cso/rng.hpp"
#include "cso/tensor.hpp"

namespace cso::nn {

// Zero-mean normal draws with variance 2/fan_in, filled in row-major order.
template <typename T>
Tensor<T> he_init(std::vector<int> shape, int fan_in, Rng& rng) {
    Tensor<T> t(std::move(shape));
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t.data) v = static_cast<T>(rng.normal() * stddev);
    return t;
}

}  // namespace cso::nn
