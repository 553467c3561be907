#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tcf/nn/tensor.hpp"

namespace tcf::nn {

// A trainable tensor together with its gradient and Adam state. Modules own
// their Params; tapes reference them and accumulate into `grad`.
struct Param {
    Param() = default;
    Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) { reset_state(); }

    void reset_state() {
        grad = Tensor(value.dims());
        m = Tensor(value.dims());
        v = Tensor(value.dims());
    }
    void zero_grad() { grad.fill(0.0); }
    long numel() const { return value.numel(); }

    std::string name;
    Tensor value;
    Tensor grad;
    Tensor m;  // Adam first moment
    Tensor v;  // Adam second moment
};

// Eager reverse-mode autodiff tape over double tensors. Each op computes its
// value immediately and records a closure that propagates the adjoint. One
// tape is built per loss evaluation and swept once by backward().
class Tape {
  public:
    using NodeId = int;

    NodeId leaf(Tensor value, bool requires_grad = false);
    NodeId constant(Tensor value) { return leaf(std::move(value), false); }
    NodeId scalar(double v) { return leaf(Tensor::scalar(v), false); }
    // Leaf bound to a Param: backward() adds the node adjoint into p.grad.
    NodeId param(Param& p);

    // Elementwise (same shape unless noted).
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double s);
    NodeId add_scalar(NodeId a, double c);
    NodeId relu(NodeId a);
    NodeId tanh_act(NodeId a);
    NodeId sigmoid_act(NodeId a);
    NodeId log_act(NodeId a);
    NodeId clamp(NodeId a, double lo, double hi);

    // Shape ops.
    NodeId reshape(NodeId a, std::vector<long> dims);
    NodeId concat(const std::vector<NodeId>& xs, int axis);
    NodeId slice(NodeId a, int axis, long start, long len);
    NodeId detach(NodeId a);  // value copy, gradient flow cut

    // y[n,o] = sum_i x[n,i] * W[o,i] + b[o]; pass bias = -1 to omit.
    NodeId linear(NodeId x, NodeId W, NodeId bias);

    // Convolutions; x is [N,C,(D),H,W], w is [Co,Ci,(kd),kh,kw], zero padding.
    NodeId conv3d(NodeId x, NodeId w, NodeId bias, int sd, int sh, int sw, int pd, int ph, int pw);
    NodeId conv2d(NodeId x, NodeId w, NodeId bias, int sh, int sw, int ph, int pw);
    NodeId upsample3d_nearest(NodeId x, int fd, int fh, int fw);
    NodeId crop3d(NodeId x, long d, long h, long w);
    // [N,C,spatial...] -> [N,C] mean over spatial dims.
    NodeId global_avg_pool(NodeId x);

    // Reductions / losses.
    NodeId sum_all(NodeId a);
    NodeId mean_all(NodeId a);
    NodeId softmax_last(NodeId a);
    NodeId log_softmax_last(NodeId a);
    // Huber value per batch row, mean-reduced over the row's elements.
    NodeId huber_per_sample(NodeId pred, const Tensor& target, double delta);
    // Scalar sum_i x_i * w_i with constant weights.
    NodeId weighted_sum(NodeId x, const Tensor& weights);

    // Seeds d(root)=1 (root must be scalar) and sweeps the tape in reverse.
    // Parameter adjoints are accumulated into their Param::grad.
    void backward(NodeId root);

    const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    Tensor& grad(NodeId id) { return nodes_[static_cast<std::size_t>(id)].grad; }
    bool requires_grad(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
    std::size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Tape&)> back;  // captures ids/constants, never pointers into nodes_
    };

    NodeId push(Tensor value, bool requires_grad, std::function<void(Tape&)> back);
    Node& node(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }

    std::vector<Node> nodes_;
};

}  // namespace tcf::nn
