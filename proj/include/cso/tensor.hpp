#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "cso/errors.hpp"

namespace cso::nn {

// Dense N-dimensional array. Feature maps use NCHW order.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, T fill = T{0}) : shape(std::move(s)) {
        data.assign(numel(shape), fill);
    }
    Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel(shape))
            throw ShapeMismatch("tensor data size " + std::to_string(data.size()) +
                                " does not match shape product " + std::to_string(numel(shape)));
    }

    static size_t numel(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) n *= static_cast<size_t>(d);
        return n;
    }
    size_t numel() const { return data.size(); }

    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }

    T& at4(int n, int c, int h, int w) {
        assert(ndim() == 4);
        return data[((static_cast<size_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    const T& at4(int n, int c, int h, int w) const {
        return const_cast<Tensor*>(this)->at4(n, c, h, w);
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

template <typename T>
std::string shape_str(const Tensor<T>& t) {
    std::string s = "(";
    for (size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(t.shape[i]);
    }
    return s + ")";
}

}  // namespace cso::nn
