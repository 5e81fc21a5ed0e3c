#include "cso/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "cso/gemm.hpp"

namespace cso::nn {

namespace {

// Expands one image (C,H,W) into the patch matrix (C*k*k, oh*ow).
template <typename T>
void im2col(const T* src, int c, int h, int w, int k, int s, int p, int oh,
            int ow, T* col) {
    for (int ch = 0; ch < c; ++ch) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                T* dst = col + (static_cast<size_t>(ch) * k * k + ki * k + kj) *
                                   (static_cast<size_t>(oh) * ow);
                for (int y = 0; y < oh; ++y) {
                    const int iy = y * s + ki - p;
                    if (iy < 0 || iy >= h) {
                        for (int x = 0; x < ow; ++x) dst[y * ow + x] = T(0);
                        continue;
                    }
                    const T* srow = src + (static_cast<size_t>(ch) * h + iy) * w;
                    for (int x = 0; x < ow; ++x) {
                        const int ix = x * s + kj - p;
                        dst[y * ow + x] = (ix >= 0 && ix < w) ? srow[ix] : T(0);
                    }
                }
            }
        }
    }
}

// Scatter-add of a patch matrix back onto an image; adjoint of im2col.
template <typename T>
void col2im_add(const T* col, int c, int h, int w, int k, int s, int p, int oh,
                int ow, T* dst) {
    for (int ch = 0; ch < c; ++ch) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const T* srccol = col + (static_cast<size_t>(ch) * k * k + ki * k + kj) *
                                            (static_cast<size_t>(oh) * ow);
                for (int y = 0; y < oh; ++y) {
                    const int iy = y * s + ki - p;
                    if (iy < 0 || iy >= h) continue;
                    T* drow = dst + (static_cast<size_t>(ch) * h + iy) * w;
                    for (int x = 0; x < ow; ++x) {
                        const int ix = x * s + kj - p;
                        if (ix >= 0 && ix < w) drow[ix] += srccol[y * ow + x];
                    }
                }
            }
        }
    }
}

}  // namespace

template <typename T>
typename Tape<T>::NodeId Tape<T>::push(Tensor<T> value, bool requires_grad,
                                       std::function<void(Tape&)> backprop) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

template <typename T>
Tensor<T>& Tape<T>::grad_buf(NodeId id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.grad_touched) {
        n.grad = Tensor<T>(n.value.shape);
        n.grad_touched = true;
    }
    return n.grad;
}

template <typename T>
const Tensor<T>& Tape<T>::grad(NodeId id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.grad_touched) {
        n.grad = Tensor<T>(n.value.shape);
        n.grad_touched = true;
    }
    return n.grad;
}

template <typename T>
void Tape<T>::backward(NodeId output) {
    if (value(output).numel() != 1)
        throw ShapeMismatch("backward requires a scalar output node");
    grad_buf(output).data[0] = T(1);
    for (NodeId id = output; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.backprop && n.requires_grad && n.grad_touched) n.backprop(*this);
    }
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::conv2d(NodeId xid, NodeId wid, NodeId bid,
                                         int stride, int pad) {
    const Tensor<T>& x = value(xid);
    const Tensor<T>& w = value(wid);
    const Tensor<T>& b = value(bid);
    if (x.ndim() != 4 || w.ndim() != 4)
        throw ShapeMismatch("conv2d expects 4-d input and weight");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), ww = x.dim(3);
    const int o = w.dim(0), k = w.dim(2);
    if (w.dim(1) != c)
        throw ShapeMismatch("conv2d weight channels " + std::to_string(w.dim(1)) +
                            " vs input channels " + std::to_string(c));
    if (w.dim(3) != k) throw ShapeMismatch("conv2d kernel must be square");
    if (b.ndim() != 1 || b.dim(0) != o)
        throw ShapeMismatch("conv2d bias must have one entry per output channel");
    if (h + 2 * pad < k || ww + 2 * pad < k)
        throw ShapeMismatch("conv2d kernel larger than padded input");
    const int oh = (h + 2 * pad - k) / stride + 1;
    const int ow = (ww + 2 * pad - k) / stride + 1;
    const int ckk = c * k * k;
    const size_t opix = static_cast<size_t>(oh) * ow;

    Tensor<T> y({n, o, oh, ow});
    std::vector<T> col(static_cast<size_t>(ckk) * opix);
    for (int i = 0; i < n; ++i) {
        const T* xi = x.data.data() + static_cast<size_t>(i) * c * h * ww;
        im2col(xi, c, h, ww, k, stride, pad, oh, ow, col.data());
        T* yi = y.data.data() + static_cast<size_t>(i) * o * opix;
        gemm_nn(o, static_cast<int>(opix), ckk, w.data.data(), ckk, col.data(),
                static_cast<int>(opix), yi, static_cast<int>(opix), false);
        for (int oc = 0; oc < o; ++oc) {
            const T bv = b.data[static_cast<size_t>(oc)];
            T* row = yi + static_cast<size_t>(oc) * opix;
            for (size_t px = 0; px < opix; ++px) row[px] += bv;
        }
    }

    const bool rg = requires_grad(xid) || requires_grad(wid) || requires_grad(bid);
    NodeId out = push(std::move(y), rg, nullptr);
    if (rg) {
        nodes_.back().backprop = [=](Tape& t) {
            const Tensor<T>& gy = t.grad(out);
            const Tensor<T>& xv = t.value(xid);
            const Tensor<T>& wv = t.value(wid);
            std::vector<T> colbuf(static_cast<size_t>(ckk) * opix);
            std::vector<T> dcol;

            if (t.requires_grad(bid)) {
                Tensor<T>& gb = t.grad_buf(bid);
                for (int i = 0; i < n; ++i)
                    for (int oc = 0; oc < o; ++oc) {
                        const T* row = gy.data.data() +
                                       (static_cast<size_t>(i) * o + oc) * opix;
                        T s = T(0);
#pragma omp simd reduction(+ : s)
                        for (size_t px = 0; px < opix; ++px) s += row[px];
                        gb.data[static_cast<size_t>(oc)] += s;
                    }
            }
            if (t.requires_grad(wid)) {
                Tensor<T>& gw = t.grad_buf(wid);
                for (int i = 0; i < n; ++i) {
                    const T* xi = xv.data.data() + static_cast<size_t>(i) * c * h * ww;
                    im2col(xi, c, h, ww, k, stride, pad, oh, ow, colbuf.data());
                    const T* gyi = gy.data.data() + static_cast<size_t>(i) * o * opix;
                    gemm_nt(o, ckk, static_cast<int>(opix), gyi,
                            static_cast<int>(opix), colbuf.data(),
                            static_cast<int>(opix), gw.data.data(), ckk, true);
                }
            }
            if (t.requires_grad(xid)) {
                Tensor<T>& gx = t.grad_buf(xid);
                dcol.assign(static_cast<size_t>(ckk) * opix, T(0));
                for (int i = 0; i < n; ++i) {
                    const T* gyi = gy.data.data() + static_cast<size_t>(i) * o * opix;
                    gemm_tn(ckk, static_cast<int>(opix), o, wv.data.data(), ckk,
                            gyi, static_cast<int>(opix), dcol.data(),
                            static_cast<int>(opix), false);
                    T* gxi = gx.data.data() + static_cast<size_t>(i) * c * h * ww;
                    col2im_add(dcol.data(), c, h, ww, k, stride, pad, oh, ow, gxi);
                }
            }
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::transposed_conv2d(NodeId xid, NodeId wid,
                                                    int kernel, int stride) {
    const Tensor<T>& x = value(xid);
    const Tensor<T>& w = value(wid);
    if (x.ndim() != 4 || w.ndim() != 4)
        throw ShapeMismatch("transposed_conv2d expects 4-d input and weight");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), ww = x.dim(3);
    if (w.dim(0) != c)
        throw ShapeMismatch("transposed_conv2d weight in-channels " +
                            std::to_string(w.dim(0)) + " vs input channels " +
                            std::to_string(c));
    if (w.dim(2) != kernel || w.dim(3) != kernel)
        throw ShapeMismatch("transposed_conv2d weight kernel dims mismatch");
    const int o = w.dim(1), k = kernel, s = stride;
    const int oh = s * (h - 1) + k;
    const int ow = s * (ww - 1) + k;
    const int okk = o * k * k;
    const size_t ipix = static_cast<size_t>(h) * ww;

    // y[n] = col2im( (w as (c, o*k*k))^T * x[n] ), the exact adjoint of the
    // conv2d input path above.
    Tensor<T> y({n, o, oh, ow});
    std::vector<T> col(static_cast<size_t>(okk) * ipix);
    for (int i = 0; i < n; ++i) {
        const T* xi = x.data.data() + static_cast<size_t>(i) * c * ipix;
        gemm_tn(okk, static_cast<int>(ipix), c, w.data.data(), okk, xi,
                static_cast<int>(ipix), col.data(), static_cast<int>(ipix), false);
        T* yi = y.data.data() + static_cast<size_t>(i) * o * oh * ow;
        std::fill(yi, yi + static_cast<size_t>(o) * oh * ow, T(0));
        col2im_add(col.data(), o, oh, ow, k, s, 0, h, ww, yi);
    }

    const bool rg = requires_grad(xid) || requires_grad(wid);
    NodeId out = push(std::move(y), rg, nullptr);
    if (rg) {
        nodes_.back().backprop = [=](Tape& t) {
            const Tensor<T>& gy = t.grad(out);
            const Tensor<T>& xv = t.value(xid);
            const Tensor<T>& wv = t.value(wid);
            std::vector<T> dcol(static_cast<size_t>(okk) * ipix);
            for (int i = 0; i < n; ++i) {
                const T* gyi = gy.data.data() + static_cast<size_t>(i) * o * oh * ow;
                im2col(gyi, o, oh, ow, k, s, 0, h, ww, dcol.data());
                if (t.requires_grad(xid)) {
                    T* gxi = t.grad_buf(xid).data.data() + static_cast<size_t>(i) * c * ipix;
                    std::vector<T> tmp(static_cast<size_t>(c) * ipix);
                    gemm_nn(c, static_cast<int>(ipix), okk, wv.data.data(), okk,
                            dcol.data(), static_cast<int>(ipix), tmp.data(),
                            static_cast<int>(ipix), false);
                    for (size_t j = 0; j < tmp.size(); ++j) gxi[j] += tmp[j];
                }
                if (t.requires_grad(wid)) {
                    const T* xi = xv.data.data() + static_cast<size_t>(i) * c * ipix;
                    gemm_nt(c, okk, static_cast<int>(ipix), xi,
                            static_cast<int>(ipix), dcol.data(),
                            static_cast<int>(ipix), t.grad_buf(wid).data.data(),
                            okk, true);
                }
            }
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::maxpool2d(NodeId xid) {
    const Tensor<T>& x = value(xid);
    if (x.ndim() != 4) throw ShapeMismatch("maxpool2d expects a 4-d input");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 != 0 || w % 2 != 0)
        throw OddSpatialDim("maxpool2d requires even spatial dims, got " +
                            std::to_string(h) + "x" + std::to_string(w));
    const int oh = h / 2, ow = w / 2;

    Tensor<T> y({n, c, oh, ow});
    auto argmax = std::make_shared<std::vector<int32_t>>(y.numel());
    size_t oi = 0;
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const T* plane = x.data.data() + (static_cast<size_t>(i) * c + ch) * h * w;
            for (int y0 = 0; y0 < oh; ++y0)
                for (int x0 = 0; x0 < ow; ++x0, ++oi) {
                    // candidates scanned in row-major order; strict > keeps
                    // the first cell on ties
                    int best = (2 * y0) * w + 2 * x0;
                    T bv = plane[best];
                    const int cand[3] = {(2 * y0) * w + 2 * x0 + 1,
                                         (2 * y0 + 1) * w + 2 * x0,
                                         (2 * y0 + 1) * w + 2 * x0 + 1};
                    for (int cc : cand)
                        if (plane[cc] > bv) { bv = plane[cc]; best = cc; }
                    y.data[oi] = bv;
                    (*argmax)[oi] = best;
                }
        }

    const bool rg = requires_grad(xid);
    NodeId out = push(std::move(y), rg, nullptr);
    if (rg) {
        nodes_.back().backprop = [=](Tape& t) {
            const Tensor<T>& gy = t.grad(out);
            Tensor<T>& gx = t.grad_buf(xid);
            size_t k = 0;
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < c; ++ch) {
                    T* plane = gx.data.data() + (static_cast<size_t>(i) * c + ch) * h * w;
                    for (int px = 0; px < oh * ow; ++px, ++k)
                        plane[(*argmax)[k]] += gy.data[k];
                }
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::relu(NodeId xid) {
    const Tensor<T>& x = value(xid);
    Tensor<T> y(x.shape);
    for (size_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);

    const bool rg = requires_grad(xid);
    NodeId out = push(std::move(y), rg, nullptr);
    if (rg) {
        nodes_.back().backprop = [=](Tape& t) {
            const Tensor<T>& gy = t.grad(out);
            const Tensor<T>& xv = t.value(xid);
            Tensor<T>& gx = t.grad_buf(xid);
            for (size_t i = 0; i < xv.numel(); ++i)
                if (xv.data[i] > T(0)) gx.data[i] += gy.data[i];
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::concat_channels(NodeId aid, NodeId bid) {
    const Tensor<T>& a = value(aid);
    const Tensor<T>& b = value(bid);
    if (a.ndim() != 4 || b.ndim() != 4 || a.dim(0) != b.dim(0) ||
        a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw ShapeMismatch("concat_channels needs matching N, H, W: " +
                            shape_str(a) + " vs " + shape_str(b));
    const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    const size_t plane = static_cast<size_t>(a.dim(2)) * a.dim(3);

    Tensor<T> y({n, ca + cb, a.dim(2), a.dim(3)});
    for (int i = 0; i < n; ++i) {
        std::copy_n(a.data.data() + static_cast<size_t>(i) * ca * plane, ca * plane,
                    y.data.data() + static_cast<size_t>(i) * (ca + cb) * plane);
        std::copy_n(b.data.data() + static_cast<size_t>(i) * cb * plane, cb * plane,
                    y.data.data() + (static_cast<size_t>(i) * (ca + cb) + ca) * plane);
    }

    const bool rg = requires_grad(aid) || requires_grad(bid);
    NodeId out = push(std::move(y), rg, nullptr);
    if (rg) {
        nodes_.back().backprop = [=](Tape& t) {
            const Tensor<T>& gy = t.grad(out);
            for (int i = 0; i < n; ++i) {
                if (t.requires_grad(aid)) {
                    T* ga = t.grad_buf(aid).data.data() + static_cast<size_t>(i) * ca * plane;
                    const T* src = gy.data.data() + static_cast<size_t>(i) * (ca + cb) * plane;
                    for (size_t j = 0; j < ca * plane; ++j) ga[j] += src[j];
                }
                if (t.requires_grad(bid)) {
                    T* gb = t.grad_buf(bid).data.data() + static_cast<size_t>(i) * cb * plane;
                    const T* src = gy.data.data() +
                                   (static_cast<size_t>(i) * (ca + cb) + ca) * plane;
                    for (size_t j = 0; j < cb * plane; ++j) gb[j] += src[j];
                }
            }
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::softmax_cross_entropy(
    NodeId lid, const Tensor<int32_t>& target) {
    const Tensor<T>& logits = value(lid);
    if (logits.ndim() != 4) throw ShapeMismatch("softmax_cross_entropy expects NCHW logits");
    const int n = logits.dim(0), c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    if (target.ndim() != 3 || target.dim(0) != n || target.dim(1) != h || target.dim(2) != w)
        throw ShapeMismatch("target map shape must be (N,H,W) matching logits");
    const size_t plane = static_cast<size_t>(h) * w;
    const size_t npix = static_cast<size_t>(n) * plane;

    auto probs = std::make_shared<Tensor<T>>(logits.shape);
    auto tgt = std::make_shared<Tensor<int32_t>>(target);
    double loss_acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const T* li = logits.data.data() + static_cast<size_t>(i) * c * plane;
        T* pi = probs->data.data() + static_cast<size_t>(i) * c * plane;
        for (size_t px = 0; px < plane; ++px) {
            const int32_t t = target.data[static_cast<size_t>(i) * plane + px];
            if (t < 0 || t >= c)
                throw IndexOutOfRange("target class " + std::to_string(t) +
                                      " outside [0," + std::to_string(c) + ")");
            T m = li[px];
            for (int ch = 1; ch < c; ++ch) m = std::max(m, li[static_cast<size_t>(ch) * plane + px]);
            double denom = 0.0;
            for (int ch = 0; ch < c; ++ch)
                denom += std::exp(static_cast<double>(li[static_cast<size_t>(ch) * plane + px] - m));
            const double lse = std::log(denom);
            for (int ch = 0; ch < c; ++ch)
                pi[static_cast<size_t>(ch) * plane + px] = static_cast<T>(
                    std::exp(static_cast<double>(li[static_cast<size_t>(ch) * plane + px] - m)) / denom);
            loss_acc += lse - static_cast<double>(li[static_cast<size_t>(t) * plane + px] - m);
        }
    }

    Tensor<T> loss({1});
    loss.data[0] = static_cast<T>(loss_acc / static_cast<double>(npix));

    const bool rg = requires_grad(lid);
    NodeId out = push(std::move(loss), rg, nullptr);
    if (rg) {
        nodes_.back().backprop = [=](Tape& t) {
            const T g = t.grad(out).data[0];
            Tensor<T>& gl = t.grad_buf(lid);
            const T scale = g / static_cast<T>(npix);
            for (int i = 0; i < n; ++i) {
                const T* pi = probs->data.data() + static_cast<size_t>(i) * c * plane;
                T* gi = gl.data.data() + static_cast<size_t>(i) * c * plane;
                for (size_t px = 0; px < plane; ++px) {
                    const int32_t tv = tgt->data[static_cast<size_t>(i) * plane + px];
                    for (int ch = 0; ch < c; ++ch) {
                        T p = pi[static_cast<size_t>(ch) * plane + px];
                        if (ch == tv) p -= T(1);
                        gi[static_cast<size_t>(ch) * plane + px] += scale * p;
                    }
                }
            }
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::sum(NodeId xid) {
    const Tensor<T>& x = value(xid);
    double s = 0.0;
    for (T v : x.data) s += static_cast<double>(v);
    Tensor<T> y({1});
    y.data[0] = static_cast<T>(s);

    const bool rg = requires_grad(xid);
    NodeId out = push(std::move(y), rg, nullptr);
    if (rg) {
        nodes_.back().backprop = [=](Tape& t) {
            const T g = t.grad(out).data[0];
            Tensor<T>& gx = t.grad_buf(xid);
            for (size_t i = 0; i < gx.numel(); ++i) gx.data[i] += g;
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::weighted_sum(NodeId xid, Tensor<T> weights) {
    const Tensor<T>& x = value(xid);
    if (!x.same_shape(weights))
        throw ShapeMismatch("weighted_sum weights shape " + shape_str(weights) +
                            " vs input " + shape_str(x));
    auto wts = std::make_shared<Tensor<T>>(std::move(weights));
    double s = 0.0;
    for (size_t i = 0; i < x.numel(); ++i)
        s += static_cast<double>(x.data[i]) * static_cast<double>(wts->data[i]);
    Tensor<T> y({1});
    y.data[0] = static_cast<T>(s);

    const bool rg = requires_grad(xid);
    NodeId out = push(std::move(y), rg, nullptr);
    if (rg) {
        nodes_.back().backprop = [=](Tape& t) {
            const T g = t.grad(out).data[0];
            Tensor<T>& gx = t.grad_buf(xid);
            for (size_t i = 0; i < gx.numel(); ++i) gx.data[i] += g * wts->data[i];
        };
    }
    return out;
}

template <typename T>
typename Tape<T>::NodeId Tape<T>::custom(const std::vector<NodeId>& parents,
                                         Tensor<T> value,
                                         std::function<void(Tape&)> backprop) {
    bool rg = false;
    for (NodeId p : parents) rg = rg || requires_grad(p);
    return push(std::move(value), rg, rg ? std::move(backprop) : nullptr);
}

template class Tape<float>;
template class Tape<double>;

}  // namespace cso::nn
