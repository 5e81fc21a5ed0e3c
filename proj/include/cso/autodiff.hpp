#pragma once

// Reverse-mode automatic differentiation over dense tensors.
//
// Execution is eager: every op computes its output immediately and records a
// backprop closure on the tape. Node ids are assigned in creation order, so
// the tape is already topologically sorted and backward() is a single reverse
// sweep that visits each node exactly once. Gradients of shared inputs
// accumulate, which is what makes skip connections work.
//
// Conventions fixed here (they matter for determinism):
//   - relu subgradient at 0 is 0
//   - maxpool ties route the gradient to the first cell in row-major order
//   - convolution is cross-correlation with zero padding

#include <cstdint>
#include <functional>
#include <vector>

#include "cso/tensor.hpp"

namespace cso::nn {

template <typename T>
class Tape {
public:
    using NodeId = int32_t;

    NodeId leaf(Tensor<T> value, bool requires_grad);

    // y = cross_correlate(x, w) + b.  x: (N,C,H,W), w: (O,C,k,k), b: (O).
    // Output spatial size: floor((H + 2p - k) / s) + 1.
    NodeId conv2d(NodeId x, NodeId w, NodeId b, int stride, int pad);

    // Adjoint of conv2d with the same (k, s) and zero padding.
    // x: (N,C,H,W), w: (C,O,k,k). Output spatial size: s*(H-1) + k.
    NodeId transposed_conv2d(NodeId x, NodeId w, int kernel, int stride);

    // 2x2 stride-2 max pooling; requires even H and W.
    NodeId maxpool2d(NodeId x);

    NodeId relu(NodeId x);

    // Concatenates along the channel axis; N, H, W must match.
    NodeId concat_channels(NodeId a, NodeId b);

    // Pixelwise softmax + NLL, averaged over all N*H*W pixels.
    // logits: (N,C,H,W), target: (N,H,W) class indices in [0, C).
    NodeId softmax_cross_entropy(NodeId logits, const Tensor<int32_t>& target);

    // Scalar reductions used by tests and the gradient checker.
    NodeId sum(NodeId x);
    NodeId weighted_sum(NodeId x, Tensor<T> weights);

    // Extension point: append a node with an explicit value and backprop
    // closure. requires_grad is inherited from the parents.
    NodeId custom(const std::vector<NodeId>& parents, Tensor<T> value,
                  std::function<void(Tape&)> backprop);

    void backward(NodeId output);

    const Tensor<T>& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
    // Valid after backward(); zero tensor for untouched nodes.
    const Tensor<T>& grad(NodeId id);
    bool requires_grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;  // allocated on first touch during backward
        bool requires_grad = false;
        bool grad_touched = false;
        std::function<void(Tape&)> backprop;  // empty for leaves
    };

    NodeId push(Tensor<T> value, bool requires_grad, std::function<void(Tape&)> backprop);
    Tensor<T>& grad_buf(NodeId id);

    std::vector<Node> nodes_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace cso::nn
