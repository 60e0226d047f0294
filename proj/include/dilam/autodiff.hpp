#pragma once

// Reverse-mode autodiff over a per-forward-pass tape. Nodes are appended in
// topological order during the forward pass; backward() walks ids in reverse.
// Leaves referencing a ParameterT accumulate into its external grad buffer
// iff the parameter is trainable. Everything is deterministic: fixed
// accumulation order, no pointer-keyed iteration.

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dilam/kernels.hpp"
#include "dilam/tensor.hpp"

namespace dilam {

template <typename T>
class GraphT;

template <typename T>
class VarT {
  public:
    VarT() = default;
    VarT(GraphT<T>* g, int id) : g_(g), id_(id) {}
    const TensorT<T>& value() const;
    bool requires_grad() const;
    T scalar() const {
        const auto& v = value();
        if (v.numel() != 1) throw std::invalid_argument("scalar() on tensor of shape " + v.shape_str());
        return v[0];
    }
    int id() const { return id_; }
    GraphT<T>* graph() const { return g_; }
    bool valid() const { return g_ != nullptr; }

  private:
    GraphT<T>* g_ = nullptr;
    int id_ = -1;
};

template <typename T>
class GraphT {
  public:
    /// When set, every op output is scanned for NaN/Inf and raises NumericError.
    bool finite_checks = true;

    VarT<T> input(TensorT<T> value) {
        Node n;
        n.owned = std::move(value);
        n.requires_grad = false;
        nodes_.push_back(std::move(n));
        return VarT<T>(this, static_cast<int>(nodes_.size()) - 1);
    }

    VarT<T> param(ParameterT<T>& p) {
        Node n;
        n.extern_value = &p.value;
        n.extern_grad = p.trainable ? &p.grad : nullptr;
        n.requires_grad = p.trainable;
        nodes_.push_back(std::move(n));
        return VarT<T>(this, static_cast<int>(nodes_.size()) - 1);
    }

    int add_op(TensorT<T> value, bool requires_grad, const char* op_name) {
        if (finite_checks && !value.all_finite())
            throw NumericError(std::string("non-finite values in ") + op_name + " output");
        Node n;
        n.owned = std::move(value);
        n.requires_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    void set_backfn(int id, std::function<void(GraphT&)> fn) { nodes_[size_t(id)].backfn = std::move(fn); }

    const TensorT<T>& value_of(int id) const {
        const Node& n = nodes_[size_t(id)];
        return n.extern_value ? *n.extern_value : n.owned;
    }

    bool needs_grad(int id) const { return nodes_[size_t(id)].requires_grad; }

    bool has_grad(int id) const { return nodes_[size_t(id)].has_grad; }

    /// Gradient buffer for accumulation; allocates (zeroed) on first touch.
    TensorT<T>& grad_buf(int id) {
        Node& n = nodes_[size_t(id)];
        n.has_grad = true;
        if (n.extern_grad) return *n.extern_grad;
        if (n.grad.numel() == 0) n.grad = TensorT<T>(value_of(id).shape());
        return n.grad;
    }

    const TensorT<T>& grad_of(int id) const { return nodes_[size_t(id)].extern_grad ? *nodes_[size_t(id)].extern_grad : nodes_[size_t(id)].grad; }

    /// Accumulates d(loss)/d(reachable trainable parameters). One call per
    /// recorded forward pass.
    void backward(VarT<T> loss) {
        if (loss.graph() != this) throw std::logic_error("backward: loss from another graph");
        if (value_of(loss.id()).numel() != 1)
            throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                        value_of(loss.id()).shape_str());
        if (backward_done_)
            throw std::logic_error("backward called twice without a new forward pass");
        backward_done_ = true;
        grad_buf(loss.id())[0] += T(1);
        for (int id = loss.id(); id >= 0; --id) {
            Node& n = nodes_[size_t(id)];
            if (n.requires_grad && n.has_grad && n.backfn) n.backfn(*this);
        }
        if (finite_checks) {
            for (const Node& n : nodes_) {
                if (n.extern_grad && n.has_grad && !n.extern_grad->all_finite())
                    throw NumericError("non-finite parameter gradient after backward");
            }
        }
    }

  private:
    struct Node {
        TensorT<T> owned;
        const TensorT<T>* extern_value = nullptr;
        TensorT<T>* extern_grad = nullptr;
        TensorT<T> grad;
        bool requires_grad = false;
        bool has_grad = false;
        std::function<void(GraphT&)> backfn;
    };
    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

template <typename T>
const TensorT<T>& VarT<T>::value() const {
    return g_->value_of(id_);
}
template <typename T>
bool VarT<T>::requires_grad() const {
    return g_->needs_grad(id_);
}

using Graph = GraphT<float>;
using Var = VarT<float>;

namespace detail {
inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}
template <typename T>
GraphT<T>& same_graph(VarT<T> a, VarT<T> b) {
    require(a.graph() != nullptr && a.graph() == b.graph(), "op: vars from different graphs");
    return *a.graph();
}
}  // namespace detail

// ---- primitive ops ----------------------------------------------------

template <typename T>
VarT<T> conv2d(VarT<T> x, VarT<T> w, VarT<T> b, int stride, int padding) {
    auto& g = detail::same_graph(x, w);
    const auto& xv = x.value();
    const auto& wv = w.value();
    const auto& bv = b.value();
    detail::require(xv.ndim() == 4 && wv.ndim() == 4,
                    "conv2d: expected 4-d input and weight, got " + xv.shape_str() + " and " + wv.shape_str());
    const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    const int K = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    detail::require(wv.dim(1) == C, "conv2d: channel mismatch between input " + xv.shape_str() +
                                        " and weight " + wv.shape_str());
    detail::require(bv.ndim() == 1 && bv.dim(0) == K,
                    "conv2d: bias shape " + bv.shape_str() + " does not match weight " + wv.shape_str());
    detail::require(kh % 2 == 1 && kw % 2 == 1, "conv2d: kernel dims must be odd, got " + wv.shape_str());
    detail::require(stride >= 1 && padding >= 0, "conv2d: invalid stride/padding");
    const int num_h = H + 2 * padding - kh;
    const int num_w = W + 2 * padding - kw;
    detail::require(num_h >= 0 && num_w >= 0 && num_h % stride == 0 && num_w % stride == 0,
                    "conv2d: output size not integral for input " + xv.shape_str() + ", weight " +
                        wv.shape_str() + ", stride " + std::to_string(stride) + ", pad " +
                        std::to_string(padding));
    const int OH = num_h / stride + 1, OW = num_w / stride + 1;

    TensorT<T> out({N, K, OH, OW});
    kernels::conv2d_forward(xv.data(), N, C, H, W, wv.data(), K, kh, kw, bv.data(), stride, padding,
                            out.data(), OH, OW);
    const bool rg = x.requires_grad() || w.requires_grad() || b.requires_grad();
    int id = g.add_op(std::move(out), rg, "conv2d");
    if (rg) {
        int xid = x.id(), wid = w.id(), bid = b.id();
        g.set_backfn(id, [=](GraphT<T>& gg) {
            const auto& dout = gg.grad_of(id);
            if (gg.needs_grad(xid))
                kernels::conv2d_backward_input(dout.data(), gg.value_of(wid).data(), N, C, H, W, K, kh,
                                               kw, stride, padding, OH, OW, gg.grad_buf(xid).data());
            if (gg.needs_grad(wid))
                kernels::conv2d_backward_weight(dout.data(), gg.value_of(xid).data(), N, C, H, W, K, kh,
                                                kw, stride, padding, OH, OW, gg.grad_buf(wid).data());
            if (gg.needs_grad(bid))
                kernels::conv2d_backward_bias(dout.data(), N, K, OH, OW, gg.grad_buf(bid).data());
        });
    }
    return VarT<T>(&g, id);
}

template <typename T>
VarT<T> linear(VarT<T> x, VarT<T> w, VarT<T> b) {
    auto& g = detail::same_graph(x, w);
    const auto& xv = x.value();
    const auto& wv = w.value();
    const auto& bv = b.value();
    detail::require(xv.ndim() == 2 && wv.ndim() == 2, "linear: expected 2-d input and weight, got " +
                                                          xv.shape_str() + " and " + wv.shape_str());
    const int N = xv.dim(0), D = xv.dim(1), M = wv.dim(0);
    detail::require(wv.dim(1) == D, "linear: inner dimension mismatch, input " + xv.shape_str() +
                                        " vs weight " + wv.shape_str());
    detail::require(bv.ndim() == 1 && bv.dim(0) == M, "linear: bias shape mismatch " + bv.shape_str());

    TensorT<T> out({N, M});
    kernels::linear_forward(xv.data(), N, D, wv.data(), M, bv.data(), out.data());
    const bool rg = x.requires_grad() || w.requires_grad() || b.requires_grad();
    int id = g.add_op(std::move(out), rg, "linear");
    if (rg) {
        int xid = x.id(), wid = w.id(), bid = b.id();
        g.set_backfn(id, [=](GraphT<T>& gg) {
            const auto& dout = gg.grad_of(id);
            if (gg.needs_grad(xid))
                kernels::linear_backward_input(dout.data(), gg.value_of(wid).data(), N, D, M,
                                               gg.grad_buf(xid).data());
            if (gg.needs_grad(wid))
                kernels::linear_backward_weight(dout.data(), gg.value_of(xid).data(), N, D, M,
                                                gg.grad_buf(wid).data());
            if (gg.needs_grad(bid))
                kernels::linear_backward_bias(dout.data(), N, M, gg.grad_buf(bid).data());
        });
    }
    return VarT<T>(&g, id);
}

template <typename T>
VarT<T> relu(VarT<T> x) {
    auto& g = *x.graph();
    const auto& xv = x.value();
    TensorT<T> out(xv.shape());
    kernels::relu_forward(xv.data(), xv.numel(), out.data());
    const bool rg = x.requires_grad();
    int id = g.add_op(std::move(out), rg, "relu");
    if (rg) {
        int xid = x.id();
        g.set_backfn(id, [=](GraphT<T>& gg) {
            const auto& dout = gg.grad_of(id);
            kernels::relu_backward(dout.data(), gg.value_of(xid).data(), dout.numel(),
                                   gg.grad_buf(xid).data());
        });
    }
    return VarT<T>(&g, id);
}

template <typename T>
VarT<T> max_pool2d(VarT<T> x, int k, int stride) {
    auto& g = *x.graph();
    const auto& xv = x.value();
    detail::require(xv.ndim() == 4, "max_pool2d: expected 4-d input, got " + xv.shape_str());
    const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    detail::require(k >= 1 && stride >= 1 && H >= k && W >= k && (H - k) % stride == 0 &&
                        (W - k) % stride == 0,
                    "max_pool2d: window " + std::to_string(k) + "/stride " + std::to_string(stride) +
                        " does not tile input " + xv.shape_str());
    const int OH = (H - k) / stride + 1, OW = (W - k) / stride + 1;
    TensorT<T> out({N, C, OH, OW});
    auto argmax = std::make_shared<std::vector<int32_t>>(size_t(int64_t(N) * C * OH * OW));
    kernels::max_pool2d_forward(xv.data(), N, C, H, W, k, stride, out.data(), argmax->data(), OH, OW);
    const bool rg = x.requires_grad();
    int id = g.add_op(std::move(out), rg, "max_pool2d");
    if (rg) {
        int xid = x.id();
        g.set_backfn(id, [=](GraphT<T>& gg) {
            kernels::max_pool2d_backward(gg.grad_of(id).data(), argmax->data(), N, C, OH, OW, H, W,
                                         gg.grad_buf(xid).data());
        });
    }
    return VarT<T>(&g, id);
}

template <typename T>
VarT<T> global_avg_pool(VarT<T> x) {
    auto& g = *x.graph();
    const auto& xv = x.value();
    detail::require(xv.ndim() == 4, "global_avg_pool: expected 4-d input, got " + xv.shape_str());
    const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    TensorT<T> out({N, C});
    kernels::global_avg_pool_forward(xv.data(), N, C, H, W, out.data());
    const bool rg = x.requires_grad();
    int id = g.add_op(std::move(out), rg, "global_avg_pool");
    if (rg) {
        int xid = x.id();
        g.set_backfn(id, [=](GraphT<T>& gg) {
            kernels::global_avg_pool_backward(gg.grad_of(id).data(), N, C, H, W,
                                              gg.grad_buf(xid).data());
        });
    }
    return VarT<T>(&g, id);
}

/// Normalization with statistics computed from the batch (training mode).
/// Optionally emits the batch statistics for running-average updates.
template <typename T>
VarT<T> batch_norm(VarT<T> x, VarT<T> gamma, VarT<T> beta, T eps, TensorT<T>* out_mean = nullptr,
                   TensorT<T>* out_var = nullptr) {
    auto& g = detail::same_graph(x, gamma);
    const auto& xv = x.value();
    const auto& gv = gamma.value();
    const auto& bv = beta.value();
    detail::require(xv.ndim() == 4, "batch_norm: expected 4-d input, got " + xv.shape_str());
    const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    detail::require(gv.numel() == C && bv.numel() == C,
                    "batch_norm: gamma/beta size mismatch for input " + xv.shape_str());
    detail::require(eps > T(0), "batch_norm: eps must be positive");

    TensorT<T> mean({C}), var({C});
    kernels::channel_mean_var(xv.data(), N, C, H, W, mean.data(), var.data());
    auto inv_std = std::make_shared<TensorT<T>>(std::vector<int>{C});
    for (int c = 0; c < C; ++c) (*inv_std)[c] = T(1) / std::sqrt(var[c] + eps);
    if (out_mean) *out_mean = mean;
    if (out_var) *out_var = var;

    TensorT<T> out(xv.shape());
    auto xhat = std::make_shared<TensorT<T>>(xv.shape());
    kernels::norm_apply(xv.data(), N, C, H, W, mean.data(), inv_std->data(), gv.data(), bv.data(),
                        out.data(), xhat->data());
    const bool rg = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
    int id = g.add_op(std::move(out), rg, "batch_norm");
    if (rg) {
        int xid = x.id(), gid = gamma.id(), bid = beta.id();
        g.set_backfn(id, [=](GraphT<T>& gg) {
            const auto& dout = gg.grad_of(id);
            const bool want_din = gg.needs_grad(xid);
            kernels::batch_norm_backward(dout.data(), xhat->data(), inv_std->data(),
                                         gg.value_of(gid).data(), N, C, H, W,
                                         want_din ? gg.grad_buf(xid).data() : nullptr,
                                         gg.needs_grad(gid) ? gg.grad_buf(gid).data() : nullptr,
                                         gg.needs_grad(bid) ? gg.grad_buf(bid).data() : nullptr,
                                         want_din);
        });
    }
    return VarT<T>(&g, id);
}

/// Normalization with supplied frozen statistics (inference / adaptation).
template <typename T>
VarT<T> frozen_norm(VarT<T> x, VarT<T> gamma, VarT<T> beta, const TensorT<T>& mean,
                    const TensorT<T>& var, T eps) {
    auto& g = detail::same_graph(x, gamma);
    const auto& xv = x.value();
    const auto& gv = gamma.value();
    const auto& bv = beta.value();
    detail::require(xv.ndim() == 4, "frozen_norm: expected 4-d input, got " + xv.shape_str());
    const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    detail::require(gv.numel() == C && bv.numel() == C && mean.numel() == C && var.numel() == C,
                    "frozen_norm: per-channel array size mismatch for input " + xv.shape_str());
    detail::require(eps > T(0), "frozen_norm: eps must be positive");
    for (int c = 0; c < C; ++c)
        if (var[c] < T(0))
            throw std::invalid_argument("frozen_norm: negative variance at channel " + std::to_string(c));

    auto inv_std = std::make_shared<TensorT<T>>(std::vector<int>{C});
    for (int c = 0; c < C; ++c) (*inv_std)[c] = T(1) / std::sqrt(var[c] + eps);
    TensorT<T> out(xv.shape());
    auto xhat = std::make_shared<TensorT<T>>(xv.shape());
    kernels::norm_apply(xv.data(), N, C, H, W, mean.data(), inv_std->data(), gv.data(), bv.data(),
                        out.data(), xhat->data());
    const bool rg = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
    int id = g.add_op(std::move(out), rg, "frozen_norm");
    if (rg) {
        int xid = x.id(), gid = gamma.id(), bid = beta.id();
        g.set_backfn(id, [=](GraphT<T>& gg) {
            const auto& dout = gg.grad_of(id);
            const bool want_din = gg.needs_grad(xid);
            kernels::frozen_norm_backward(dout.data(), xhat->data(), inv_std->data(),
                                          gg.value_of(gid).data(), N, C, H, W,
                                          want_din ? gg.grad_buf(xid).data() : nullptr,
                                          gg.needs_grad(gid) ? gg.grad_buf(gid).data() : nullptr,
                                          gg.needs_grad(bid) ? gg.grad_buf(bid).data() : nullptr,
                                          want_din);
        });
    }
    return VarT<T>(&g, id);
}

template <typename T>
VarT<T> group_norm(VarT<T> x, VarT<T> gamma, VarT<T> beta, int groups, T eps) {
    auto& g = detail::same_graph(x, gamma);
    const auto& xv = x.value();
    const auto& gv = gamma.value();
    const auto& bv = beta.value();
    detail::require(xv.ndim() == 4, "group_norm: expected 4-d input, got " + xv.shape_str());
    const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    detail::require(groups >= 1 && C % groups == 0,
                    "group_norm: channels " + std::to_string(C) + " not divisible by groups " +
                        std::to_string(groups));
    detail::require(gv.numel() == C && bv.numel() == C, "group_norm: gamma/beta size mismatch");
    detail::require(eps > T(0), "group_norm: eps must be positive");

    TensorT<T> out(xv.shape());
    auto xhat = std::make_shared<TensorT<T>>(xv.shape());
    auto inv_std = std::make_shared<TensorT<T>>(std::vector<int>{N * groups});
    kernels::group_norm_forward(xv.data(), N, C, H, W, groups, gv.data(), bv.data(), eps, out.data(),
                                xhat->data(), inv_std->data());
    const bool rg = x.requires_grad() || gamma.requires_grad() || beta.requires_grad();
    int id = g.add_op(std::move(out), rg, "group_norm");
    if (rg) {
        int xid = x.id(), gid = gamma.id(), bid = beta.id();
        g.set_backfn(id, [=](GraphT<T>& gg) {
            const auto& dout = gg.grad_of(id);
            const bool want_din = gg.needs_grad(xid);
            kernels::group_norm_backward(dout.data(), xhat->data(), inv_std->data(),
                                         gg.value_of(gid).data(), N, C, H, W, groups,
                                         want_din ? gg.grad_buf(xid).data() : nullptr,
                                         gg.needs_grad(gid) ? gg.grad_buf(gid).data() : nullptr,
                                         gg.needs_grad(bid) ? gg.grad_buf(bid).data() : nullptr,
                                         want_din);
        });
    }
    return VarT<T>(&g, id);
}

template <typename T>
VarT<T> softmax_cross_entropy(VarT<T> logits, const std::vector<int>& labels) {
    auto& g = *logits.graph();
    const auto& lv = logits.value();
    detail::require(lv.ndim() == 2, "softmax_cross_entropy: expected 2-d logits, got " + lv.shape_str());
    const int N = lv.dim(0), M = lv.dim(1);
    detail::require(N > 0, "softmax_cross_entropy: empty batch");
    detail::require(static_cast<int>(labels.size()) == N,
                    "softmax_cross_entropy: label count mismatch");
    for (int n = 0; n < N; ++n)
        detail::require(labels[n] >= 0 && labels[n] < M,
                        "softmax_cross_entropy: label " + std::to_string(labels[n]) +
                            " out of range at row " + std::to_string(n));
    TensorT<T> out({1});
    kernels::softmax_cross_entropy_forward(lv.data(), labels.data(), N, M, out.data());
    const bool rg = logits.requires_grad();
    int id = g.add_op(std::move(out), rg, "softmax_cross_entropy");
    if (rg) {
        int lid = logits.id();
        auto lbl = std::make_shared<std::vector<int>>(labels);
        g.set_backfn(id, [=](GraphT<T>& gg) {
            kernels::softmax_cross_entropy_backward(gg.value_of(lid).data(), lbl->data(), N, M,
                                                    gg.grad_of(id)[0], gg.grad_buf(lid).data());
        });
    }
    return VarT<T>(&g, id);
}

/// Eq.-style statistic match: per-element batch mean and population variance
/// against stored targets, element-averaged L1 on each, summed.
template <typename T>
VarT<T> stat_l1_loss(VarT<T> x, const TensorT<T>& target_mean, const TensorT<T>& target_var) {
    auto& g = *x.graph();
    const auto& xv = x.value();
    detail::require(xv.ndim() >= 2, "stat_l1_loss: expected at least 2-d input, got " + xv.shape_str());
    const int N = xv.dim(0);
    const int64_t E = xv.numel() / N;
    detail::require(target_mean.numel() == E && target_var.numel() == E,
                    "stat_l1_loss: target arrays do not match per-sample element count " +
                        std::to_string(E));
    auto mu = std::make_shared<std::vector<T>>(size_t(E));
    auto var = std::make_shared<std::vector<T>>(size_t(E));
    TensorT<T> out({1});
    kernels::stat_l1_forward(xv.data(), N, E, target_mean.data(), target_var.data(), mu->data(),
                             var->data(), out.data());
    const bool rg = x.requires_grad();
    int id = g.add_op(std::move(out), rg, "stat_l1_loss");
    if (rg) {
        int xid = x.id();
        auto tm = std::make_shared<TensorT<T>>(target_mean);
        auto tv = std::make_shared<TensorT<T>>(target_var);
        g.set_backfn(id, [=](GraphT<T>& gg) {
            kernels::stat_l1_backward(gg.value_of(xid).data(), N, E, tm->data(), tv->data(),
                                      mu->data(), var->data(), gg.grad_of(id)[0],
                                      gg.grad_buf(xid).data());
        });
    }
    return VarT<T>(&g, id);
}

template <typename T>
VarT<T> add(VarT<T> a, VarT<T> b) {
    auto& g = detail::same_graph(a, b);
    const auto& av = a.value();
    const auto& bv = b.value();
    detail::require(av.same_shape(bv),
                    "add: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    TensorT<T> out(av.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[i];
    const bool rg = a.requires_grad() || b.requires_grad();
    int id = g.add_op(std::move(out), rg, "add");
    if (rg) {
        int aid = a.id(), bid = b.id();
        g.set_backfn(id, [=](GraphT<T>& gg) {
            const auto& dout = gg.grad_of(id);
            if (gg.needs_grad(aid)) {
                auto& da = gg.grad_buf(aid);
                for (int64_t i = 0; i < dout.numel(); ++i) da[i] += dout[i];
            }
            if (gg.needs_grad(bid)) {
                auto& db = gg.grad_buf(bid);
                for (int64_t i = 0; i < dout.numel(); ++i) db[i] += dout[i];
            }
        });
    }
    return VarT<T>(&g, id);
}

template <typename T>
VarT<T> mul(VarT<T> a, VarT<T> b) {
    auto& g = detail::same_graph(a, b);
    const auto& av = a.value();
    const auto& bv = b.value();
    detail::require(av.same_shape(bv),
                    "mul: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    TensorT<T> out(av.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[i];
    const bool rg = a.requires_grad() || b.requires_grad();
    int id = g.add_op(std::move(out), rg, "mul");
    if (rg) {
        int aid = a.id(), bid = b.id();
        g.set_backfn(id, [=](GraphT<T>& gg) {
            const auto& dout = gg.grad_of(id);
            if (gg.needs_grad(aid)) {
                auto& da = gg.grad_buf(aid);
                const auto& bvv = gg.value_of(bid);
                for (int64_t i = 0; i < dout.numel(); ++i) da[i] += dout[i] * bvv[i];
            }
            if (gg.needs_grad(bid)) {
                auto& db = gg.grad_buf(bid);
                const auto& avv = gg.value_of(aid);
                for (int64_t i = 0; i < dout.numel(); ++i) db[i] += dout[i] * avv[i];
            }
        });
    }
    return VarT<T>(&g, id);
}

template <typename T>
VarT<T> scale(VarT<T> x, T c) {
    auto& g = *x.graph();
    const auto& xv = x.value();
    TensorT<T> out(xv.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = xv[i] * c;
    const bool rg = x.requires_grad();
    int id = g.add_op(std::move(out), rg, "scale");
    if (rg) {
        int xid = x.id();
        g.set_backfn(id, [=](GraphT<T>& gg) {
            const auto& dout = gg.grad_of(id);
            auto& dx = gg.grad_buf(xid);
            for (int64_t i = 0; i < dout.numel(); ++i) dx[i] += dout[i] * c;
        });
    }
    return VarT<T>(&g, id);
}

template <typename T>
VarT<T> sum_all(VarT<T> x) {
    auto& g = *x.graph();
    const auto& xv = x.value();
    TensorT<T> out({1});
    T acc = T(0);
    for (int64_t i = 0; i < xv.numel(); ++i) acc += xv[i];
    out[0] = acc;
    const bool rg = x.requires_grad();
    int id = g.add_op(std::move(out), rg, "sum");
    if (rg) {
        int xid = x.id();
        g.set_backfn(id, [=](GraphT<T>& gg) {
            const T gr = gg.grad_of(id)[0];
            auto& dx = gg.grad_buf(xid);
            for (int64_t i = 0; i < dx.numel(); ++i) dx[i] += gr;
        });
    }
    return VarT<T>(&g, id);
}

/// Free-function form of GraphT::backward.
template <typename T>
void backward(VarT<T> loss) {
    loss.graph()->backward(loss);
}

}  // namespace dilam
