#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "fp/common.hpp"

namespace fp::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Reverse-mode tape over the fixed primitive set the fusion network needs:
// linear, batch-norm, ReLU, sigmoid, segment/column max, broadcast, concat,
// per-segment scalar gating, softmax cross-entropy. Nodes are created in
// forward order; backward() walks them in reverse.
template <typename S>
class Graph {
public:
    using M = Mat<S>;

    int input(M value) { return add_leaf(std::move(value), false); }
    int param(M value) { return add_leaf(std::move(value), true); }

    // y = x * W^T + b with x: R x I, W: O x I, b: 1 x O.
    int linear(int x, int w, int b) {
        check_cols(x, int(node(w).value.cols()), "linear: input width vs weight fan-in");
        if (node(b).value.rows() != 1 || node(b).value.cols() != node(w).value.rows()) {
            throw ShapeError("linear: bias shape must be 1 x out_dim");
        }
        Node n(Op::Linear, x, w, b);
        n.value.noalias() = node(x).value * node(w).value.transpose();
        n.value.rowwise() += node(b).value.row(0);
        return push(std::move(n));
    }

    // Batch statistics; updates the caller's running mean/var in place.
    int batchnorm_train(int x, int gamma, int beta, M& running_mean, M& running_var,
                        S momentum, S eps) {
        const auto& xv = node(x).value;
        const S n_rows = static_cast<S>(xv.rows());
        Node n(Op::BatchNorm, x, gamma, beta);
        M mu = xv.colwise().mean();
        M centered = xv.rowwise() - mu.row(0);
        M var = centered.array().square().colwise().sum().matrix() / n_rows;  // biased
        n.aux_b = (var.array() + eps).rsqrt().matrix();                       // 1 x C inv_std
        n.aux = centered.array().rowwise() * n.aux_b.row(0).array();          // xhat
        n.value = (n.aux.array().rowwise() * node(gamma).value.row(0).array()).matrix();
        n.value.rowwise() += node(beta).value.row(0);
        running_mean = momentum * running_mean + (S(1) - momentum) * mu;
        running_var = momentum * running_var + (S(1) - momentum) * var;
        return push(std::move(n));
    }

    int batchnorm_eval(int x, int gamma, int beta, const M& running_mean,
                       const M& running_var, S eps) {
        Node n(Op::BatchNorm, x, gamma, beta);
        n.aux_b = (running_var.array() + eps).rsqrt().matrix();
        n.aux = ((node(x).value.rowwise() - running_mean.row(0)).array().rowwise() *
                 n.aux_b.row(0).array())
                    .matrix();
        n.value = (n.aux.array().rowwise() * node(gamma).value.row(0).array()).matrix();
        n.value.rowwise() += node(beta).value.row(0);
        n.eval_norm = true;
        return push(std::move(n));
    }

    int relu(int x) {
        Node n(Op::Relu, x);
        n.value = node(x).value.cwiseMax(S(0));
        return push(std::move(n));
    }

    // Numerically stable in both tails.
    int sigmoid(int x) {
        Node n(Op::Sigmoid, x);
        n.value = node(x).value.unaryExpr([](S v) {
            if (v >= S(0)) return S(1) / (S(1) + std::exp(-v));
            const S e = std::exp(v);
            return e / (S(1) + e);
        });
        return push(std::move(n));
    }

    // Componentwise max over fixed-size row segments; ties go to the lowest
    // row. seg == rows() collapses to a single row (column max).
    int segment_max(int x, Eigen::Index seg) {
        const auto& xv = node(x).value;
        if (seg < 1 || xv.rows() % seg != 0) throw ShapeError("segment_max: bad segment size");
        const Eigen::Index groups = xv.rows() / seg;
        Node n(Op::SegMax, x);
        n.seg = seg;
        n.value.resize(groups, xv.cols());
        n.iaux.resize(size_t(groups) * size_t(xv.cols()));
        for (Eigen::Index g = 0; g < groups; ++g) {
            for (Eigen::Index c = 0; c < xv.cols(); ++c) {
                Eigen::Index best = g * seg;
                for (Eigen::Index r = g * seg + 1; r < (g + 1) * seg; ++r) {
                    if (xv(r, c) > xv(best, c)) best = r;
                }
                n.value(g, c) = xv(best, c);
                n.iaux[size_t(g) * size_t(xv.cols()) + size_t(c)] = static_cast<int32_t>(best);
            }
        }
        return push(std::move(n));
    }

    int broadcast_rows(int x, Eigen::Index rows) {
        if (node(x).value.rows() != 1) throw ShapeError("broadcast_rows: input must have 1 row");
        Node n(Op::Broadcast, x);
        n.value = node(x).value.replicate(rows, 1);
        return push(std::move(n));
    }

    int concat_cols(int a, int b, int c = -1) {
        Node n(Op::Concat, a, b, c);
        const Eigen::Index rows = node(a).value.rows();
        Eigen::Index cols = node(a).value.cols() + node(b).value.cols();
        if (c >= 0) cols += node(c).value.cols();
        if (node(b).value.rows() != rows || (c >= 0 && node(c).value.rows() != rows)) {
            throw ShapeError("concat_cols: row mismatch");
        }
        n.value.resize(rows, cols);
        n.value.leftCols(node(a).value.cols()) = node(a).value;
        n.value.middleCols(node(a).value.cols(), node(b).value.cols()) = node(b).value;
        if (c >= 0) n.value.rightCols(node(c).value.cols()) = node(c).value;
        return push(std::move(n));
    }

    // Scales each row r of x by s[r / seg] (or 1 - s[r / seg]); s is G x 1
    // where G = rows(x) / seg.
    int segment_scale(int x, int s, Eigen::Index seg, bool complement) {
        const auto& xv = node(x).value;
        const auto& sv = node(s).value;
        if (seg < 1 || xv.rows() % seg != 0 || sv.cols() != 1 || sv.rows() != xv.rows() / seg) {
            throw ShapeError("segment_scale: shape mismatch");
        }
        Node n(Op::SegScale, x, s);
        n.seg = seg;
        n.complement = complement;
        n.value.resizeLike(xv);
        for (Eigen::Index g = 0; g < sv.rows(); ++g) {
            const S f = complement ? S(1) - sv(g, 0) : sv(g, 0);
            n.value.middleRows(g * seg, seg) = xv.middleRows(g * seg, seg) * f;
        }
        return push(std::move(n));
    }

    // Mean of -log softmax(logits)[target] over rows where mask != 0,
    // computed via log-sum-exp. Returns a 1x1 node.
    int softmax_xent(int logits, const std::vector<int32_t>& targets,
                     const std::vector<uint8_t>& mask) {
        const auto& lv = node(logits).value;
        if (targets.size() != size_t(lv.rows()) || mask.size() != size_t(lv.rows())) {
            throw ShapeError("softmax_xent: targets/mask length must equal row count");
        }
        Node n(Op::Xent, logits);
        n.aux.setZero(lv.rows(), lv.cols());  // softmax probabilities on masked rows
        n.iaux.assign(targets.begin(), targets.end());
        n.mask = mask;
        S loss = S(0);
        Eigen::Index count = 0;
        for (Eigen::Index r = 0; r < lv.rows(); ++r) {
            if (!mask[size_t(r)]) continue;
            const int32_t t = targets[size_t(r)];
            if (t < 0 || t >= lv.cols()) throw DataError("softmax_xent: target class out of range");
            const S mx = lv.row(r).maxCoeff();
            S sum = S(0);
            for (Eigen::Index c = 0; c < lv.cols(); ++c) sum += std::exp(lv(r, c) - mx);
            const S lse = std::log(sum) + mx;
            loss += lse - lv(r, t);
            n.aux.row(r) = (lv.row(r).array() - lse).exp();
            ++count;
        }
        if (count == 0) throw InternalError("softmax_xent: empty mask");
        n.seg = count;
        n.value.resize(1, 1);
        n.value(0, 0) = loss / static_cast<S>(count);
        return push(std::move(n));
    }

    int sum_all(int x) {
        Node n(Op::SumAll, x);
        n.value.resize(1, 1);
        n.value(0, 0) = node(x).value.sum();
        return push(std::move(n));
    }

    // Seeds d(node)/d(node) = upstream and propagates to every leaf that
    // requires gradients. Callable once per graph.
    void backward(int loss_node, S upstream = S(1)) {
        if (node(loss_node).value.size() != 1) {
            throw InternalError("backward: loss must be scalar");
        }
        for (auto& n : nodes_) {
            if (n.needs_grad) n.grad.setZero(n.value.rows(), n.value.cols());
        }
        auto& top = node(loss_node);
        if (!top.needs_grad) return;  // no parameters anywhere upstream
        top.grad(0, 0) = upstream;
        for (int id = loss_node; id >= 0; --id) {
            Node& n = nodes_[size_t(id)];
            if (!n.needs_grad || n.op == Op::Leaf) continue;
            backprop(n);
        }
    }

    const M& value(int id) const { return node(id).value; }
    const M& grad(int id) const { return node(id).grad; }

private:
    enum class Op { Leaf, Linear, BatchNorm, Relu, Sigmoid, SegMax, Broadcast, Concat, SegScale, Xent, SumAll };

    struct Node {
        explicit Node(Op o, int a_ = -1, int b_ = -1, int c_ = -1) : op(o), a(a_), b(b_), c(c_) {}
        Op op;
        int a, b, c;
        M value;
        M grad;
        M aux;     // op-specific: xhat (batch-norm), probs (xent)
        M aux_b;   // op-specific: inv_std (batch-norm)
        std::vector<int32_t> iaux;
        std::vector<uint8_t> mask;
        Eigen::Index seg = 0;
        bool complement = false;
        bool eval_norm = false;
        bool needs_grad = false;
    };

    Node& node(int id) { return nodes_[size_t(id)]; }
    const Node& node(int id) const { return nodes_[size_t(id)]; }

    int add_leaf(M value, bool trainable) {
        Node n(Op::Leaf);
        n.value = std::move(value);
        n.needs_grad = trainable;
        nodes_.push_back(std::move(n));
        return int(nodes_.size()) - 1;
    }

    int push(Node n) {
        n.needs_grad = (n.a >= 0 && node(n.a).needs_grad) || (n.b >= 0 && node(n.b).needs_grad) ||
                       (n.c >= 0 && node(n.c).needs_grad);
        nodes_.push_back(std::move(n));
        return int(nodes_.size()) - 1;
    }

    void check_cols(int x, int expect, const char* what) {
        if (node(x).value.cols() != expect) throw ShapeError(what);
    }

    void add_grad(int id, const M& g) {
        if (id >= 0 && node(id).needs_grad) node(id).grad += g;
    }

    void backprop(Node& n) {
        const M& gy = n.grad;
        switch (n.op) {
            case Op::Linear: {
                const M& x = node(n.a).value;
                const M& w = node(n.b).value;
                if (node(n.a).needs_grad) node(n.a).grad.noalias() += gy * w;
                if (node(n.b).needs_grad) node(n.b).grad.noalias() += gy.transpose() * x;
                if (node(n.c).needs_grad) node(n.c).grad += gy.colwise().sum();
                break;
            }
            case Op::BatchNorm: {
                const M& gamma = node(n.b).value;
                if (node(n.b).needs_grad) {
                    node(n.b).grad += (gy.array() * n.aux.array()).colwise().sum().matrix();
                }
                if (node(n.c).needs_grad) node(n.c).grad += gy.colwise().sum();
                if (node(n.a).needs_grad) {
                    M dxhat = gy.array().rowwise() * gamma.row(0).array();
                    if (n.eval_norm) {
                        node(n.a).grad += (dxhat.array().rowwise() * n.aux_b.row(0).array()).matrix();
                    } else {
                        const S rows = static_cast<S>(gy.rows());
                        M sum_dxhat = dxhat.colwise().sum();
                        M sum_dxhat_xhat = (dxhat.array() * n.aux.array()).colwise().sum().matrix();
                        M dx = rows * dxhat;
                        dx.rowwise() -= sum_dxhat.row(0);
                        dx -= (n.aux.array().rowwise() * sum_dxhat_xhat.row(0).array()).matrix();
                        dx = (dx.array().rowwise() * n.aux_b.row(0).array()).matrix() / rows;
                        node(n.a).grad += dx;
                    }
                }
                break;
            }
            case Op::Relu: {
                if (node(n.a).needs_grad) {
                    node(n.a).grad +=
                        (gy.array() * (node(n.a).value.array() > S(0)).template cast<S>()).matrix();
                }
                break;
            }
            case Op::Sigmoid: {
                if (node(n.a).needs_grad) {
                    node(n.a).grad +=
                        (gy.array() * n.value.array() * (S(1) - n.value.array())).matrix();
                }
                break;
            }
            case Op::SegMax: {
                if (node(n.a).needs_grad) {
                    auto& gx = node(n.a).grad;
                    for (Eigen::Index g = 0; g < n.value.rows(); ++g) {
                        for (Eigen::Index c = 0; c < n.value.cols(); ++c) {
                            gx(n.iaux[size_t(g) * size_t(n.value.cols()) + size_t(c)], c) += gy(g, c);
                        }
                    }
                }
                break;
            }
            case Op::Broadcast: {
                if (node(n.a).needs_grad) node(n.a).grad += gy.colwise().sum();
                break;
            }
            case Op::Concat: {
                Eigen::Index off = 0;
                for (int id : {n.a, n.b, n.c}) {
                    if (id < 0) continue;
                    const Eigen::Index w = node(id).value.cols();
                    if (node(id).needs_grad) node(id).grad += gy.middleCols(off, w);
                    off += w;
                }
                break;
            }
            case Op::SegScale: {
                const M& x = node(n.a).value;
                const M& s = node(n.b).value;
                for (Eigen::Index g = 0; g < s.rows(); ++g) {
                    const S f = n.complement ? S(1) - s(g, 0) : s(g, 0);
                    if (node(n.a).needs_grad) {
                        node(n.a).grad.middleRows(g * n.seg, n.seg) +=
                            gy.middleRows(g * n.seg, n.seg) * f;
                    }
                    if (node(n.b).needs_grad) {
                        const S d = (gy.middleRows(g * n.seg, n.seg).array() *
                                     x.middleRows(g * n.seg, n.seg).array())
                                        .sum();
                        node(n.b).grad(g, 0) += n.complement ? -d : d;
                    }
                }
                break;
            }
            case Op::Xent: {
                if (node(n.a).needs_grad) {
                    const S scale = gy(0, 0) / static_cast<S>(n.seg);
                    auto& gx = node(n.a).grad;
                    for (Eigen::Index r = 0; r < n.aux.rows(); ++r) {
                        if (!n.mask[size_t(r)]) continue;
                        gx.row(r) += n.aux.row(r) * scale;
                        gx(r, n.iaux[size_t(r)]) -= scale;
                    }
                }
                break;
            }
            case Op::SumAll: {
                if (node(n.a).needs_grad) {
                    node(n.a).grad.array() += gy(0, 0);
                }
                break;
            }
            case Op::Leaf:
                break;
        }
    }

    std::vector<Node> nodes_;
};

}  // namespace fp::nn
