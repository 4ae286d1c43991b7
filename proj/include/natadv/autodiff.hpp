#pragma once

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "natadv/errors.hpp"
#include "natadv/mat.hpp"

namespace natadv {

// Trainable tensor. Gradients and Adam moments live next to the values so a
// parameter can move between tapes and optimizer steps without bookkeeping.
struct Param {
    Mat value;
    Mat grad;
    Mat m, v; // Adam moments, sized lazily by the optimizer

    Param() = default;
    explicit Param(Mat init) : value(std::move(init)), grad(Mat::zeros_like(value)) {}

    void zero_grad() { std::fill(grad.a.begin(), grad.a.end(), 0.0); }
};

struct Var {
    int i = -1;
};

// Reverse-mode tape over batched matrices. Values are computed eagerly as the
// graph is built; backward() runs once from a scalar root. A tape is built,
// differentiated and discarded per training step.
class Tape {
    enum class Op {
        Leaf, Const,
        MatmulNT, MatmulNN,
        AddRow, MulRow, BroadcastRow,
        Add, Sub, Mul,
        Scale, AddScalar,
        Tanh, Exp, Square, OneMinusSquare, Softplus,
        ClampPass, Min, Max,
        RowSum, SumAll, MeanAll,
        AddScalarNode, Neg,
    };

    struct Node {
        Op op;
        int p0 = -1, p1 = -1;
        double c0 = 0.0, c1 = 0.0;
        Param* param = nullptr;
        bool needs_grad = false;
        Mat val;
        Mat grad;
    };

public:
    const Mat& val(Var v) const { return nodes_[v.i].val; }

    Var leaf(Param& p) {
        auto it = leaf_cache_.find(&p);
        if (it != leaf_cache_.end()) return Var{it->second};
        Node n;
        n.op = Op::Leaf;
        n.param = &p;
        n.needs_grad = true;
        n.val = p.value;
        const int idx = push(std::move(n));
        leaf_cache_.emplace(&p, idx);
        return Var{idx};
    }

    Var constant(Mat m) {
        Node n;
        n.op = Op::Const;
        n.val = std::move(m);
        return Var{push(std::move(n))};
    }

    // X:(B,in) * W:(out,in)^T -> (B,out)
    Var matmul_nt(Var x, Var w) {
        const Mat& X = nodes_[x.i].val;
        const Mat& W = nodes_[w.i].val;
        if (X.cols != W.cols) throw ContractError("matmul_nt: inner dims differ");
        Mat out(X.rows, W.rows);
        gemm_nt(X, W, out, false);
        return make(Op::MatmulNT, x, w, std::move(out));
    }

    // A:(B,k) * B:(k,c) -> (B,c)
    Var matmul_nn(Var a, Var b) {
        const Mat& A = nodes_[a.i].val;
        const Mat& B = nodes_[b.i].val;
        if (A.cols != B.rows) throw ContractError("matmul_nn: inner dims differ");
        Mat out(A.rows, B.cols);
        gemm_nn(A, B, out, false);
        return make(Op::MatmulNN, a, b, std::move(out));
    }

    Var add_row(Var x, Var v) { // broadcast (1,C) over rows
        const Mat& X = nodes_[x.i].val;
        const Mat& V = nodes_[v.i].val;
        if (V.rows != 1 || V.cols != X.cols) throw ContractError("add_row: shape");
        Mat out = X;
        for (int i = 0; i < out.rows; ++i)
            for (int j = 0; j < out.cols; ++j) out(i, j) += V(0, j);
        return make(Op::AddRow, x, v, std::move(out));
    }

    Var mul_row(Var x, Var v) {
        const Mat& X = nodes_[x.i].val;
        const Mat& V = nodes_[v.i].val;
        if (V.rows != 1 || V.cols != X.cols) throw ContractError("mul_row: shape");
        Mat out = X;
        for (int i = 0; i < out.rows; ++i)
            for (int j = 0; j < out.cols; ++j) out(i, j) *= V(0, j);
        return make(Op::MulRow, x, v, std::move(out));
    }

    Var broadcast_row(Var v, int rows) {
        const Mat& V = nodes_[v.i].val;
        if (V.rows != 1) throw ContractError("broadcast_row: expects row vector");
        Mat out(rows, V.cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < V.cols; ++j) out(i, j) = V(0, j);
        return make(Op::BroadcastRow, v, Var{-1}, std::move(out));
    }

    Var add(Var a, Var b) { return ew2(Op::Add, a, b, [](double x, double y) { return x + y; }); }
    Var sub(Var a, Var b) { return ew2(Op::Sub, a, b, [](double x, double y) { return x - y; }); }
    Var mul(Var a, Var b) { return ew2(Op::Mul, a, b, [](double x, double y) { return x * y; }); }
    Var min_(Var a, Var b) { return ew2(Op::Min, a, b, [](double x, double y) { return x < y ? x : y; }); }
    Var max_(Var a, Var b) { return ew2(Op::Max, a, b, [](double x, double y) { return x > y ? x : y; }); }

    Var scale(Var x, double c) {
        Mat out = nodes_[x.i].val;
        for (double& e : out.a) e *= c;
        Var r = make(Op::Scale, x, Var{-1}, std::move(out));
        nodes_[r.i].c0 = c;
        return r;
    }

    Var add_scalar(Var x, double c) {
        Mat out = nodes_[x.i].val;
        for (double& e : out.a) e += c;
        return make(Op::AddScalar, x, Var{-1}, std::move(out));
    }

    Var neg(Var x) { return scale(x, -1.0); }

    Var tanh_(Var x) {
        Mat out = nodes_[x.i].val;
        for (double& e : out.a) e = std::tanh(e);
        return make(Op::Tanh, x, Var{-1}, std::move(out));
    }

    Var exp_(Var x) {
        Mat out = nodes_[x.i].val;
        for (double& e : out.a) e = std::exp(e);
        return make(Op::Exp, x, Var{-1}, std::move(out));
    }

    Var square(Var x) {
        Mat out = nodes_[x.i].val;
        for (double& e : out.a) e *= e;
        return make(Op::Square, x, Var{-1}, std::move(out));
    }

    Var one_minus_square(Var x) {
        Mat out = nodes_[x.i].val;
        for (double& e : out.a) e = 1.0 - e * e;
        return make(Op::OneMinusSquare, x, Var{-1}, std::move(out));
    }

    // log(1 + e^x), overflow-safe
    Var softplus(Var x) {
        Mat out = nodes_[x.i].val;
        for (double& e : out.a) e = e > 30.0 ? e : std::log1p(std::exp(e));
        return make(Op::Softplus, x, Var{-1}, std::move(out));
    }

    // Clamp with pass-through gradient inside [lo, hi].
    Var clamp_pass(Var x, double lo, double hi) {
        Mat out = nodes_[x.i].val;
        for (double& e : out.a) e = e < lo ? lo : (e > hi ? hi : e);
        Var r = make(Op::ClampPass, x, Var{-1}, std::move(out));
        nodes_[r.i].c0 = lo;
        nodes_[r.i].c1 = hi;
        return r;
    }

    Var rowsum(Var x) {
        const Mat& X = nodes_[x.i].val;
        Mat out(X.rows, 1);
        for (int i = 0; i < X.rows; ++i) {
            double acc = 0.0;
            for (int j = 0; j < X.cols; ++j) acc += X(i, j);
            out(i, 0) = acc;
        }
        return make(Op::RowSum, x, Var{-1}, std::move(out));
    }

    Var sum_all(Var x) {
        const Mat& X = nodes_[x.i].val;
        double acc = 0.0;
        for (double e : X.a) acc += e;
        Mat out(1, 1);
        out(0, 0) = acc;
        return make(Op::SumAll, x, Var{-1}, std::move(out));
    }

    Var mean_all(Var x) {
        const Mat& X = nodes_[x.i].val;
        double acc = 0.0;
        for (double e : X.a) acc += e;
        Mat out(1, 1);
        out(0, 0) = acc / static_cast<double>(X.size());
        return make(Op::MeanAll, x, Var{-1}, std::move(out));
    }

    // X + k * s, with s a (1,1) node broadcast over all entries of X.
    Var add_scalar_node(Var x, Var s, double k) {
        const Mat& X = nodes_[x.i].val;
        const Mat& S = nodes_[s.i].val;
        if (S.rows != 1 || S.cols != 1) throw ContractError("add_scalar_node: s must be 1x1");
        Mat out = X;
        for (double& e : out.a) e += k * S(0, 0);
        Var r = make(Op::AddScalarNode, x, s, std::move(out));
        nodes_[r.i].c0 = k;
        return r;
    }

    // Accumulates d(root)/d(param) into Param::grad for every leaf.
    void backward(Var root) {
        Node& r = nodes_[root.i];
        if (r.val.rows != 1 || r.val.cols != 1) throw ContractError("backward: root must be scalar");
        if (!r.needs_grad) return;
        ensure_grad(root.i);
        r.grad(0, 0) = 1.0;
        for (int idx = root.i; idx >= 0; --idx) {
            Node& n = nodes_[idx];
            if (!n.needs_grad || n.grad.size() == 0) continue;
            step_back(n);
        }
        for (auto& [param, idx] : leaf_cache_) {
            Node& n = nodes_[idx];
            if (n.grad.size() == 0) continue;
            for (std::size_t k = 0; k < param->grad.a.size(); ++k) param->grad.a[k] += n.grad.a[k];
        }
    }

    std::size_t node_count() const { return nodes_.size(); }

private:
    template <typename F>
    Var ew2(Op op, Var a, Var b, F f) {
        const Mat& A = nodes_[a.i].val;
        const Mat& B = nodes_[b.i].val;
        if (!A.same_shape(B)) throw ContractError("elementwise op: shape mismatch");
        Mat out(A.rows, A.cols);
        for (std::size_t k = 0; k < A.size(); ++k) out.a[k] = f(A.a[k], B.a[k]);
        return make(op, a, b, std::move(out));
    }

    Var make(Op op, Var p0, Var p1, Mat val) {
        Node n;
        n.op = op;
        n.p0 = p0.i;
        n.p1 = p1.i;
        n.val = std::move(val);
        n.needs_grad = (p0.i >= 0 && nodes_[p0.i].needs_grad) || (p1.i >= 0 && nodes_[p1.i].needs_grad);
        return Var{push(std::move(n))};
    }

    int push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    void ensure_grad(int idx) {
        Node& n = nodes_[idx];
        if (n.grad.size() == 0) n.grad = Mat::zeros_like(n.val);
    }

    Mat* grad_of(int idx) {
        if (idx < 0 || !nodes_[idx].needs_grad) return nullptr;
        ensure_grad(idx);
        return &nodes_[idx].grad;
    }

    void step_back(Node& n) {
        const Mat& G = n.grad;
        switch (n.op) {
        case Op::Leaf:
        case Op::Const:
            break;
        case Op::MatmulNT: { // Y = X*W^T
            const Mat& X = nodes_[n.p0].val;
            const Mat& W = nodes_[n.p1].val;
            if (Mat* gx = grad_of(n.p0)) gemm_nn(G, W, *gx, true);
            if (Mat* gw = grad_of(n.p1)) gemm_tn(G, X, *gw, true);
            break;
        }
        case Op::MatmulNN: { // Y = A*B
            const Mat& A = nodes_[n.p0].val;
            const Mat& B = nodes_[n.p1].val;
            if (Mat* ga = grad_of(n.p0)) gemm_nt(G, B, *ga, true);
            if (Mat* gb = grad_of(n.p1)) gemm_tn(A, G, *gb, true);
            break;
        }
        case Op::AddRow: {
            if (Mat* gx = grad_of(n.p0))
                for (std::size_t k = 0; k < G.size(); ++k) gx->a[k] += G.a[k];
            if (Mat* gv = grad_of(n.p1))
                for (int i = 0; i < G.rows; ++i)
                    for (int j = 0; j < G.cols; ++j) (*gv)(0, j) += G(i, j);
            break;
        }
        case Op::MulRow: {
            const Mat& X = nodes_[n.p0].val;
            const Mat& V = nodes_[n.p1].val;
            if (Mat* gx = grad_of(n.p0))
                for (int i = 0; i < G.rows; ++i)
                    for (int j = 0; j < G.cols; ++j) (*gx)(i, j) += G(i, j) * V(0, j);
            if (Mat* gv = grad_of(n.p1))
                for (int i = 0; i < G.rows; ++i)
                    for (int j = 0; j < G.cols; ++j) (*gv)(0, j) += G(i, j) * X(i, j);
            break;
        }
        case Op::BroadcastRow: {
            if (Mat* gv = grad_of(n.p0))
                for (int i = 0; i < G.rows; ++i)
                    for (int j = 0; j < G.cols; ++j) (*gv)(0, j) += G(i, j);
            break;
        }
        case Op::Add: {
            if (Mat* ga = grad_of(n.p0))
                for (std::size_t k = 0; k < G.size(); ++k) ga->a[k] += G.a[k];
            if (Mat* gb = grad_of(n.p1))
                for (std::size_t k = 0; k < G.size(); ++k) gb->a[k] += G.a[k];
            break;
        }
        case Op::Sub: {
            if (Mat* ga = grad_of(n.p0))
                for (std::size_t k = 0; k < G.size(); ++k) ga->a[k] += G.a[k];
            if (Mat* gb = grad_of(n.p1))
                for (std::size_t k = 0; k < G.size(); ++k) gb->a[k] -= G.a[k];
            break;
        }
        case Op::Mul: {
            const Mat& A = nodes_[n.p0].val;
            const Mat& B = nodes_[n.p1].val;
            if (Mat* ga = grad_of(n.p0))
                for (std::size_t k = 0; k < G.size(); ++k) ga->a[k] += G.a[k] * B.a[k];
            if (Mat* gb = grad_of(n.p1))
                for (std::size_t k = 0; k < G.size(); ++k) gb->a[k] += G.a[k] * A.a[k];
            break;
        }
        case Op::Min: {
            const Mat& A = nodes_[n.p0].val;
            const Mat& B = nodes_[n.p1].val;
            Mat* ga = grad_of(n.p0);
            Mat* gb = grad_of(n.p1);
            for (std::size_t k = 0; k < G.size(); ++k) {
                if (A.a[k] <= B.a[k]) {
                    if (ga) ga->a[k] += G.a[k];
                } else if (gb) {
                    gb->a[k] += G.a[k];
                }
            }
            break;
        }
        case Op::Max: {
            const Mat& A = nodes_[n.p0].val;
            const Mat& B = nodes_[n.p1].val;
            Mat* ga = grad_of(n.p0);
            Mat* gb = grad_of(n.p1);
            for (std::size_t k = 0; k < G.size(); ++k) {
                if (A.a[k] >= B.a[k]) {
                    if (ga) ga->a[k] += G.a[k];
                } else if (gb) {
                    gb->a[k] += G.a[k];
                }
            }
            break;
        }
        case Op::Scale: {
            if (Mat* gx = grad_of(n.p0))
                for (std::size_t k = 0; k < G.size(); ++k) gx->a[k] += n.c0 * G.a[k];
            break;
        }
        case Op::AddScalar: {
            if (Mat* gx = grad_of(n.p0))
                for (std::size_t k = 0; k < G.size(); ++k) gx->a[k] += G.a[k];
            break;
        }
        case Op::Tanh: {
            if (Mat* gx = grad_of(n.p0))
                for (std::size_t k = 0; k < G.size(); ++k) gx->a[k] += G.a[k] * (1.0 - n.val.a[k] * n.val.a[k]);
            break;
        }
        case Op::Exp: {
            if (Mat* gx = grad_of(n.p0))
                for (std::size_t k = 0; k < G.size(); ++k) gx->a[k] += G.a[k] * n.val.a[k];
            break;
        }
        case Op::Square: {
            const Mat& X = nodes_[n.p0].val;
            if (Mat* gx = grad_of(n.p0))
                for (std::size_t k = 0; k < G.size(); ++k) gx->a[k] += 2.0 * G.a[k] * X.a[k];
            break;
        }
        case Op::OneMinusSquare: {
            const Mat& X = nodes_[n.p0].val;
            if (Mat* gx = grad_of(n.p0))
                for (std::size_t k = 0; k < G.size(); ++k) gx->a[k] -= 2.0 * G.a[k] * X.a[k];
            break;
        }
        case Op::Softplus: {
            const Mat& X = nodes_[n.p0].val;
            if (Mat* gx = grad_of(n.p0))
                for (std::size_t k = 0; k < G.size(); ++k) {
                    const double s = 1.0 / (1.0 + std::exp(-X.a[k]));
                    gx->a[k] += G.a[k] * s;
                }
            break;
        }
        case Op::ClampPass: {
            const Mat& X = nodes_[n.p0].val;
            if (Mat* gx = grad_of(n.p0))
                for (std::size_t k = 0; k < G.size(); ++k)
                    if (X.a[k] >= n.c0 && X.a[k] <= n.c1) gx->a[k] += G.a[k];
            break;
        }
        case Op::RowSum: {
            if (Mat* gx = grad_of(n.p0))
                for (int i = 0; i < gx->rows; ++i) {
                    const double g = G(i, 0);
                    for (int j = 0; j < gx->cols; ++j) (*gx)(i, j) += g;
                }
            break;
        }
        case Op::SumAll: {
            if (Mat* gx = grad_of(n.p0)) {
                const double g = G(0, 0);
                for (double& e : gx->a) e += g;
            }
            break;
        }
        case Op::MeanAll: {
            if (Mat* gx = grad_of(n.p0)) {
                const double g = G(0, 0) / static_cast<double>(gx->size());
                for (double& e : gx->a) e += g;
            }
            break;
        }
        case Op::AddScalarNode: {
            if (Mat* gx = grad_of(n.p0))
                for (std::size_t k = 0; k < G.size(); ++k) gx->a[k] += G.a[k];
            if (Mat* gs = grad_of(n.p1)) {
                double acc = 0.0;
                for (double e : G.a) acc += e;
                (*gs)(0, 0) += n.c0 * acc;
            }
            break;
        }
        case Op::Neg:
            break;
        }
    }

    std::vector<Node> nodes_;
    std::unordered_map<Param*, int> leaf_cache_;
};

} // namespace natadv
