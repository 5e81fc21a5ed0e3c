#pragma once

// ADAM with bias correction. State rows are aligned index-for-index with the
// parameter list handed to step().

#include <cstdint>
#include <vector>

#include "cso/tensor.hpp"

namespace cso::nn {

template <typename T>
struct AdamState {
    T lr = T(1e-3);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
    int64_t t = 0;
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;

    void step(std::vector<Tensor<T>*> params, const std::vector<const Tensor<T>*>& grads) {
        if (params.size() != grads.size())
            throw ShapeMismatch("adam_step params/grads count mismatch");
        if (m.empty()) {
            m.resize(params.size());
            v.resize(params.size());
            for (size_t i = 0; i < params.size(); ++i) {
                m[i].assign(params[i]->numel(), T(0));
                v[i].assign(params[i]->numel(), T(0));
            }
        }
        ++t;
        const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta1), static_cast<double>(t)));
        const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta2), static_cast<double>(t)));
        for (size_t i = 0; i < params.size(); ++i) {
            Tensor<T>& p = *params[i];
            const Tensor<T>& g = *grads[i];
            if (!p.same_shape(g) || m[i].size() != p.numel())
                throw ShapeMismatch("adam_step shape mismatch at parameter " + std::to_string(i));
            T* mp = m[i].data();
            T* vp = v[i].data();
#pragma omp simd
            for (size_t j = 0; j < p.numel(); ++j) {
                const T gj = g.data[j];
                mp[j] = beta1 * mp[j] + (T(1) - beta1) * gj;
                vp[j] = beta2 * vp[j] + (T(1) - beta2) * gj * gj;
                const T mhat = mp[j] / bc1;
                const T vhat = vp[j] / bc2;
                p.data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
};

}  // namespace cso::nn
