#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "tensor/store.hpp"

namespace bplab::tensor {

// y[m,n] += a[m,k] * b[k,n]. k is the outer loop per row so each output
// element accumulates in a fixed sequential order (bitwise reproducible)
// while the inner loop stays vectorizable.
template <class Real>
void gemm_acc(const Real* a, const Real* b, Real* y, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const Real* ai = a + static_cast<size_t>(i) * k;
        Real* yi = y + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const Real av = ai[p];
            const Real* bp = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) yi[j] += av * bp[j];
        }
    }
}

template <class Real>
Real stable_sigmoid(Real x) {
    if (x >= Real(0)) {
        const Real e = std::exp(-x);
        return Real(1) / (Real(1) + e);
    }
    const Real e = std::exp(x);
    return e / (Real(1) + e);
}

// Eager reverse-mode tape. One Tape records one forward pass; backward()
// walks the nodes in reverse creation order, which is a valid topological
// order because parents always precede children.
template <class Real>
class Tape {
public:
    enum class Op : uint8_t {
        Constant, Param, Add, Sub, Mul, Scale, OneMinus, Sigmoid, Tanh, Relu,
        Linear, Conv2d, ConcatCols, ConcatChan, TileSpatial, Reshape,
        GatherRows, ConcatRows, RowDot, MatmulNT, SoftmaxCE, BceLogits, MseT,
        WSum,
    };

    struct Node {
        Op op;
        bool needs_grad = false;
        Shape shape;
        std::vector<Real> val;
        std::vector<Real> grad;
        int a = -1, b = -1, c = -1; // parents
        std::vector<int> many;      // extra parents or index metadata
        std::vector<Real> aux;      // cached values (softmax probs, W^T, ...)
        int i0 = 0;                 // op-specific (kernel size, ...)
        ParamTensor<Real>* pt = nullptr;
    };

    int size() const { return static_cast<int>(nodes_.size()); }
    const std::vector<Real>& val(int id) const { return nodes_[id].val; }
    const std::vector<Real>& grad(int id) const { return nodes_[id].grad; }
    const Shape& shape(int id) const { return nodes_[id].shape; }

    int constant(Shape shape, std::vector<Real> values) {
        check(values.size() == numel(shape), ErrorCode::ShapeMismatch, "constant size");
        Node n;
        n.op = Op::Constant;
        n.shape = std::move(shape);
        n.val = std::move(values);
        return push(std::move(n));
    }

    int zeros(Shape shape) { return constant(shape, std::vector<Real>(numel(shape), Real(0))); }

    int param(ParamTensor<Real>* p) {
        Node n;
        n.op = Op::Param;
        n.shape = p->shape;
        n.val = p->value;
        n.pt = p;
        n.needs_grad = !p->frozen;
        return push(std::move(n));
    }

    int add(int a, int b) { return binary(Op::Add, a, b); }
    int sub(int a, int b) { return binary(Op::Sub, a, b); }
    int mul(int a, int b) { return binary(Op::Mul, a, b); }

    int scale(int a, Real s) {
        Node n = unary_base(Op::Scale, a);
        n.aux = {s};
        for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = nodes_[a].val[i] * s;
        return push(std::move(n));
    }
    int one_minus(int a) {
        Node n = unary_base(Op::OneMinus, a);
        for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = Real(1) - nodes_[a].val[i];
        return push(std::move(n));
    }
    int sigmoid(int a) {
        Node n = unary_base(Op::Sigmoid, a);
        for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = stable_sigmoid(nodes_[a].val[i]);
        return push(std::move(n));
    }
    int tanh_(int a) {
        Node n = unary_base(Op::Tanh, a);
        for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = std::tanh(nodes_[a].val[i]);
        return push(std::move(n));
    }
    int relu(int a) {
        Node n = unary_base(Op::Relu, a);
        for (size_t i = 0; i < n.val.size(); ++i)
            n.val[i] = nodes_[a].val[i] > Real(0) ? nodes_[a].val[i] : Real(0);
        return push(std::move(n));
    }

    // y = x W^T (+ bias). x [m,in], W [out,in], bias [out] or -1.
    int linear(int x, int w, int bias = -1) {
        const Node& xn = nodes_[x];
        const Node& wn = nodes_[w];
        check(xn.shape.size() == 2 && wn.shape.size() == 2, ErrorCode::ShapeMismatch,
              "linear wants 2-D operands");
        const int m = xn.shape[0], in = xn.shape[1], out = wn.shape[0];
        check(wn.shape[1] == in, ErrorCode::ShapeMismatch,
              "linear: " + shape_str(xn.shape) + " vs " + shape_str(wn.shape));
        if (bias >= 0)
            check(nodes_[bias].shape == Shape{out}, ErrorCode::ShapeMismatch, "linear bias");
        Node n;
        n.op = Op::Linear;
        n.shape = {m, out};
        n.a = x;
        n.b = w;
        n.c = bias;
        n.needs_grad = xn.needs_grad || wn.needs_grad || (bias >= 0 && nodes_[bias].needs_grad);
        n.val.assign(static_cast<size_t>(m) * out, Real(0));
        // cache W^T for the forward gemm
        n.aux.assign(static_cast<size_t>(in) * out, Real(0));
        for (int o = 0; o < out; ++o)
            for (int i = 0; i < in; ++i)
                n.aux[static_cast<size_t>(i) * out + o] = wn.val[static_cast<size_t>(o) * in + i];
        gemm_acc(xn.val.data(), n.aux.data(), n.val.data(), m, in, out);
        if (bias >= 0) {
            const std::vector<Real>& bv = nodes_[bias].val;
            for (int r = 0; r < m; ++r)
                for (int o = 0; o < out; ++o) n.val[static_cast<size_t>(r) * out + o] += bv[o];
        }
        return push(std::move(n));
    }

    // x [N,Ci,H,W], w [Co,Ci,k,k], bias [Co] or -1; zero padding (k-1)/2.
    int conv2d(int x, int w, int bias = -1) {
        const Node& xn = nodes_[x];
        const Node& wn = nodes_[w];
        check(xn.shape.size() == 4 && wn.shape.size() == 4, ErrorCode::ShapeMismatch,
              "conv2d wants 4-D x and w");
        const int N = xn.shape[0], ci = xn.shape[1], h = xn.shape[2], wd = xn.shape[3];
        const int co = wn.shape[0], k = wn.shape[2];
        check(wn.shape[1] == ci && wn.shape[3] == k && k % 2 == 1, ErrorCode::ShapeMismatch,
              "conv2d kernels " + shape_str(wn.shape));
        if (bias >= 0)
            check(nodes_[bias].shape == Shape{co}, ErrorCode::ShapeMismatch, "conv2d bias");
        Node n;
        n.op = Op::Conv2d;
        n.shape = {N, co, h, wd};
        n.a = x;
        n.b = w;
        n.c = bias;
        n.i0 = k;
        n.needs_grad = xn.needs_grad || wn.needs_grad || (bias >= 0 && nodes_[bias].needs_grad);
        n.val.assign(numel(n.shape), Real(0));
        const int hw = h * wd;
        if (k == 1) {
            // pointwise conv == gemm w[co,ci] * x[ci,hw] per instance
            for (int i = 0; i < N; ++i)
                gemm_acc(wn.val.data(), xn.val.data() + static_cast<size_t>(i) * ci * hw,
                         n.val.data() + static_cast<size_t>(i) * co * hw, co, ci, hw);
        } else {
            const int pad = (k - 1) / 2;
            for (int i = 0; i < N; ++i)
                for (int oc = 0; oc < co; ++oc)
                    for (int ic = 0; ic < ci; ++ic)
                        for (int oy = 0; oy < h; ++oy)
                            for (int ox = 0; ox < wd; ++ox) {
                                Real acc = 0;
                                for (int ky = 0; ky < k; ++ky)
                                    for (int kx = 0; kx < k; ++kx) {
                                        const int iy = oy + ky - pad, ix = ox + kx - pad;
                                        if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                                        acc += xn.val[((static_cast<size_t>(i) * ci + ic) * h + iy) * wd + ix] *
                                               wn.val[((static_cast<size_t>(oc) * ci + ic) * k + ky) * k + kx];
                                    }
                                n.val[((static_cast<size_t>(i) * co + oc) * h + oy) * wd + ox] += acc;
                            }
        }
        if (bias >= 0) {
            const std::vector<Real>& bv = nodes_[bias].val;
            for (int i = 0; i < N; ++i)
                for (int oc = 0; oc < co; ++oc)
                    for (int p = 0; p < hw; ++p)
                        n.val[(static_cast<size_t>(i) * co + oc) * hw + p] += bv[oc];
        }
        return push(std::move(n));
    }

    int concat_cols(int a, int b) {
        const Node& an = nodes_[a];
        const Node& bn = nodes_[b];
        check(an.shape.size() == 2 && bn.shape.size() == 2 && an.shape[0] == bn.shape[0],
              ErrorCode::ShapeMismatch, "concat_cols");
        const int m = an.shape[0], da = an.shape[1], db = bn.shape[1];
        Node n;
        n.op = Op::ConcatCols;
        n.shape = {m, da + db};
        n.a = a;
        n.b = b;
        n.needs_grad = an.needs_grad || bn.needs_grad;
        n.val.resize(static_cast<size_t>(m) * (da + db));
        for (int r = 0; r < m; ++r) {
            std::copy_n(an.val.data() + static_cast<size_t>(r) * da, da,
                        n.val.data() + static_cast<size_t>(r) * (da + db));
            std::copy_n(bn.val.data() + static_cast<size_t>(r) * db, db,
                        n.val.data() + static_cast<size_t>(r) * (da + db) + da);
        }
        return push(std::move(n));
    }

    // [N,C1,H,W] ++ [N,C2,H,W] -> [N,C1+C2,H,W]
    int concat_chan(int a, int b) {
        const Node& an = nodes_[a];
        const Node& bn = nodes_[b];
        check(an.shape.size() == 4 && bn.shape.size() == 4 && an.shape[0] == bn.shape[0] &&
                  an.shape[2] == bn.shape[2] && an.shape[3] == bn.shape[3],
              ErrorCode::ShapeMismatch, "concat_chan");
        const int N = an.shape[0], c1 = an.shape[1], c2 = bn.shape[1];
        const int hw = an.shape[2] * an.shape[3];
        Node n;
        n.op = Op::ConcatChan;
        n.shape = {N, c1 + c2, an.shape[2], an.shape[3]};
        n.a = a;
        n.b = b;
        n.needs_grad = an.needs_grad || bn.needs_grad;
        n.val.resize(numel(n.shape));
        for (int i = 0; i < N; ++i) {
            std::copy_n(an.val.data() + static_cast<size_t>(i) * c1 * hw, c1 * hw,
                        n.val.data() + static_cast<size_t>(i) * (c1 + c2) * hw);
            std::copy_n(bn.val.data() + static_cast<size_t>(i) * c2 * hw, c2 * hw,
                        n.val.data() + (static_cast<size_t>(i) * (c1 + c2) + c1) * hw);
        }
        return push(std::move(n));
    }

    // g [N,D] -> [N,D,h,w], value broadcast over the spatial grid
    int tile_spatial(int g, int h, int w) {
        const Node& gn = nodes_[g];
        check(gn.shape.size() == 2, ErrorCode::ShapeMismatch, "tile_spatial wants [N,D]");
        const int N = gn.shape[0], d = gn.shape[1];
        Node n;
        n.op = Op::TileSpatial;
        n.shape = {N, d, h, w};
        n.a = g;
        n.needs_grad = gn.needs_grad;
        n.val.resize(numel(n.shape));
        const int hw = h * w;
        for (int i = 0; i < N; ++i)
            for (int c = 0; c < d; ++c)
                std::fill_n(n.val.data() + (static_cast<size_t>(i) * d + c) * hw, hw,
                            gn.val[static_cast<size_t>(i) * d + c]);
        return push(std::move(n));
    }

    // contiguous relabel of dims; element order unchanged
    int reshape(int x, Shape shape) {
        const Node& xn = nodes_[x];
        check(numel(shape) == xn.val.size(), ErrorCode::ShapeMismatch, "reshape numel");
        Node n;
        n.op = Op::Reshape;
        n.shape = std::move(shape);
        n.a = x;
        n.needs_grad = xn.needs_grad;
        n.val = xn.val;
        return push(std::move(n));
    }

    // rows of x selected by ids (duplicates fine); grad scatter-adds
    int gather_rows(int x, std::vector<int> ids) {
        const Node& xn = nodes_[x];
        check(xn.shape.size() == 2, ErrorCode::ShapeMismatch, "gather_rows wants 2-D");
        const int rows = xn.shape[0], d = xn.shape[1];
        for (int id : ids)
            check(id >= 0 && id < rows, ErrorCode::IndexOutOfRange, "gather_rows id");
        Node n;
        n.op = Op::GatherRows;
        n.shape = {static_cast<int>(ids.size()), d};
        n.a = x;
        n.needs_grad = xn.needs_grad;
        n.val.resize(ids.size() * static_cast<size_t>(d));
        for (size_t r = 0; r < ids.size(); ++r)
            std::copy_n(xn.val.data() + static_cast<size_t>(ids[r]) * d, d,
                        n.val.data() + r * d);
        n.many = std::move(ids);
        return push(std::move(n));
    }

    // vertical stack of 2-D blocks with equal column counts
    int concat_rows(std::vector<int> parts) {
        check(!parts.empty(), ErrorCode::ShapeMismatch, "concat_rows of nothing");
        const int d = nodes_[parts[0]].shape[1];
        int m = 0;
        bool ng = false;
        for (int p : parts) {
            check(nodes_[p].shape.size() == 2 && nodes_[p].shape[1] == d,
                  ErrorCode::ShapeMismatch, "concat_rows column mismatch");
            m += nodes_[p].shape[0];
            ng = ng || nodes_[p].needs_grad;
        }
        Node n;
        n.op = Op::ConcatRows;
        n.shape = {m, d};
        n.needs_grad = ng;
        n.val.reserve(static_cast<size_t>(m) * d);
        for (int p : parts) n.val.insert(n.val.end(), nodes_[p].val.begin(), nodes_[p].val.end());
        n.many = std::move(parts);
        return push(std::move(n));
    }

    // per-row dot product: [n,d] x [n,d] -> [n,1]
    int rowdot(int a, int b) {
        const Node& an = nodes_[a];
        const Node& bn = nodes_[b];
        check(an.shape == bn.shape && an.shape.size() == 2, ErrorCode::ShapeMismatch, "rowdot");
        const int m = an.shape[0], d = an.shape[1];
        Node n;
        n.op = Op::RowDot;
        n.shape = {m, 1};
        n.a = a;
        n.b = b;
        n.needs_grad = an.needs_grad || bn.needs_grad;
        n.val.assign(m, Real(0));
        for (int r = 0; r < m; ++r) {
            Real acc = 0;
            for (int i = 0; i < d; ++i)
                acc += an.val[static_cast<size_t>(r) * d + i] * bn.val[static_cast<size_t>(r) * d + i];
            n.val[r] = acc;
        }
        return push(std::move(n));
    }

    // A [m,d] * B^T [d,n] -> [m,n]
    int matmul_nt(int a, int b) {
        const Node& an = nodes_[a];
        const Node& bn = nodes_[b];
        check(an.shape.size() == 2 && bn.shape.size() == 2 && an.shape[1] == bn.shape[1],
              ErrorCode::ShapeMismatch, "matmul_nt");
        const int m = an.shape[0], d = an.shape[1], n2 = bn.shape[0];
        Node n;
        n.op = Op::MatmulNT;
        n.shape = {m, n2};
        n.a = a;
        n.b = b;
        n.needs_grad = an.needs_grad || bn.needs_grad;
        n.val.assign(static_cast<size_t>(m) * n2, Real(0));
        for (int r = 0; r < m; ++r)
            for (int j = 0; j < n2; ++j) {
                Real acc = 0;
                for (int i = 0; i < d; ++i)
                    acc += an.val[static_cast<size_t>(r) * d + i] * bn.val[static_cast<size_t>(j) * d + i];
                n.val[static_cast<size_t>(r) * n2 + j] = acc;
            }
        return push(std::move(n));
    }

    // mean over rows of -log softmax(logits)[target]
    int softmax_ce(int logits, std::vector<int> targets) {
        const Node& ln = nodes_[logits];
        check(ln.shape.size() == 2, ErrorCode::ShapeMismatch, "softmax_ce wants 2-D logits");
        const int m = ln.shape[0], c = ln.shape[1];
        check(static_cast<int>(targets.size()) == m, ErrorCode::ShapeMismatch, "target count");
        for (int t : targets) check(t >= 0 && t < c, ErrorCode::IndexOutOfRange, "target id");
        Node n;
        n.op = Op::SoftmaxCE;
        n.shape = {1};
        n.a = logits;
        n.needs_grad = ln.needs_grad;
        n.aux.resize(static_cast<size_t>(m) * c); // softmax probabilities
        double loss = 0;
        for (int r = 0; r < m; ++r) {
            const Real* row = ln.val.data() + static_cast<size_t>(r) * c;
            Real mx = row[0];
            for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
            double z = 0;
            for (int j = 0; j < c; ++j) z += std::exp(static_cast<double>(row[j] - mx));
            const double logz = std::log(z);
            for (int j = 0; j < c; ++j)
                n.aux[static_cast<size_t>(r) * c + j] =
                    static_cast<Real>(std::exp(static_cast<double>(row[j] - mx) - logz));
            loss += logz - static_cast<double>(row[targets[r]] - mx);
        }
        n.val = {static_cast<Real>(loss / m)};
        n.many = std::move(targets);
        return push(std::move(n));
    }

    // mean of -[y log sig(s) + (1-y) log sig(-s)], log-sum-exp form
    int bce_logits(int scores, std::vector<Real> labels) {
        const Node& sn = nodes_[scores];
        check(sn.val.size() == labels.size() && !labels.empty(), ErrorCode::ShapeMismatch,
              "bce_logits label count");
        Node n;
        n.op = Op::BceLogits;
        n.shape = {1};
        n.a = scores;
        n.needs_grad = sn.needs_grad;
        double loss = 0;
        for (size_t i = 0; i < labels.size(); ++i) {
            const double s = static_cast<double>(sn.val[i]);
            const double y = static_cast<double>(labels[i]);
            loss += std::max(s, 0.0) - s * y + std::log1p(std::exp(-std::abs(s)));
        }
        n.val = {static_cast<Real>(loss / static_cast<double>(labels.size()))};
        n.aux = std::move(labels);
        return push(std::move(n));
    }

    // mean squared error against a tensor node (constants make stop-grads)
    int mse(int pred, int target) {
        const Node& pn = nodes_[pred];
        const Node& tn = nodes_[target];
        check(pn.shape == tn.shape, ErrorCode::ShapeMismatch, "mse shapes");
        Node n;
        n.op = Op::MseT;
        n.shape = {1};
        n.a = pred;
        n.b = target;
        n.needs_grad = pn.needs_grad || tn.needs_grad;
        double loss = 0;
        for (size_t i = 0; i < pn.val.size(); ++i) {
            const double d = static_cast<double>(pn.val[i]) - static_cast<double>(tn.val[i]);
            loss += d * d;
        }
        n.val = {static_cast<Real>(loss / static_cast<double>(pn.val.size()))};
        return push(std::move(n));
    }

    // weighted sum of scalar nodes
    int wsum(std::vector<int> parts, std::vector<Real> weights) {
        check(parts.size() == weights.size() && !parts.empty(), ErrorCode::ShapeMismatch, "wsum");
        Node n;
        n.op = Op::WSum;
        n.shape = {1};
        double acc = 0;
        for (size_t i = 0; i < parts.size(); ++i) {
            check(nodes_[parts[i]].val.size() == 1, ErrorCode::NotScalar, "wsum wants scalars");
            n.needs_grad = n.needs_grad || nodes_[parts[i]].needs_grad;
            acc += static_cast<double>(weights[i]) * static_cast<double>(nodes_[parts[i]].val[0]);
        }
        n.val = {static_cast<Real>(acc)};
        n.many = std::move(parts);
        n.aux = std::move(weights);
        return push(std::move(n));
    }

    // Reverse sweep from a scalar loss. Gradients of Param nodes are added
    // into their ParamTensor grad buffers.
    void backward(int loss) {
        Node& ln = nodes_[loss];
        check(ln.val.size() == 1, ErrorCode::NotScalar, "backward wants a scalar loss");
        if (!ln.needs_grad) return;
        for (Node& n : nodes_) n.grad.clear();
        ln.grad.assign(1, Real(1));
        for (int id = loss; id >= 0; --id) {
            Node& n = nodes_[id];
            if (!n.needs_grad || n.grad.empty()) continue;
            backprop(n);
        }
    }

private:
    std::vector<Node> nodes_;

    int push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    Node unary_base(Op op, int a) {
        Node n;
        n.op = op;
        n.shape = nodes_[a].shape;
        n.a = a;
        n.needs_grad = nodes_[a].needs_grad;
        n.val.resize(nodes_[a].val.size());
        return n;
    }

    int binary(Op op, int a, int b) {
        const Node& an = nodes_[a];
        const Node& bn = nodes_[b];
        check(an.shape == bn.shape, ErrorCode::ShapeMismatch,
              "elementwise shapes " + shape_str(an.shape) + " vs " + shape_str(bn.shape));
        Node n;
        n.op = op;
        n.shape = an.shape;
        n.a = a;
        n.b = b;
        n.needs_grad = an.needs_grad || bn.needs_grad;
        n.val.resize(an.val.size());
        for (size_t i = 0; i < n.val.size(); ++i) {
            switch (op) {
                case Op::Add: n.val[i] = an.val[i] + bn.val[i]; break;
                case Op::Sub: n.val[i] = an.val[i] - bn.val[i]; break;
                case Op::Mul: n.val[i] = an.val[i] * bn.val[i]; break;
                default: fail(ErrorCode::InvalidArgument, "not a binary op");
            }
        }
        return push(std::move(n));
    }

    std::vector<Real>& grad_buf(int id) {
        Node& n = nodes_[id];
        if (n.grad.empty()) n.grad.assign(n.val.size(), Real(0));
        return n.grad;
    }
    bool wants(int id) const { return id >= 0 && nodes_[id].needs_grad; }

    void backprop(Node& n) {
        const std::vector<Real>& g = n.grad;
        switch (n.op) {
            case Op::Constant: break;
            case Op::Param:
                for (size_t i = 0; i < g.size(); ++i) n.pt->grad[i] += g[i];
                break;
            case Op::Add: {
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                }
                if (wants(n.b)) {
                    auto& gb = grad_buf(n.b);
                    for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                }
                break;
            }
            case Op::Sub: {
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                }
                if (wants(n.b)) {
                    auto& gb = grad_buf(n.b);
                    for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                }
                break;
            }
            case Op::Mul: {
                const auto& av = nodes_[n.a].val;
                const auto& bv = nodes_[n.b].val;
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                }
                if (wants(n.b)) {
                    auto& gb = grad_buf(n.b);
                    for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                }
                break;
            }
            case Op::Scale: {
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.aux[0];
                }
                break;
            }
            case Op::OneMinus: {
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    for (size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
                }
                break;
            }
            case Op::Sigmoid: {
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    for (size_t i = 0; i < g.size(); ++i)
                        ga[i] += g[i] * n.val[i] * (Real(1) - n.val[i]);
                }
                break;
            }
            case Op::Tanh: {
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    for (size_t i = 0; i < g.size(); ++i)
                        ga[i] += g[i] * (Real(1) - n.val[i] * n.val[i]);
                }
                break;
            }
            case Op::Relu: {
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    for (size_t i = 0; i < g.size(); ++i)
                        if (nodes_[n.a].val[i] > Real(0)) ga[i] += g[i];
                }
                break;
            }
            case Op::Linear: {
                const Node& xn = nodes_[n.a];
                const Node& wn = nodes_[n.b];
                const int m = xn.shape[0], in = xn.shape[1], out = wn.shape[0];
                if (wants(n.a)) // dx += g * W
                    gemm_acc(g.data(), wn.val.data(), grad_buf(n.a).data(), m, out, in);
                if (wants(n.b)) { // dW[o,:] += sum_r g[r,o] * x[r,:]
                    auto& gw = grad_buf(n.b);
                    for (int r = 0; r < m; ++r)
                        for (int o = 0; o < out; ++o) {
                            const Real gv = g[static_cast<size_t>(r) * out + o];
                            if (gv == Real(0)) continue;
                            const Real* xr = xn.val.data() + static_cast<size_t>(r) * in;
                            Real* wo = gw.data() + static_cast<size_t>(o) * in;
                            for (int i = 0; i < in; ++i) wo[i] += gv * xr[i];
                        }
                }
                if (wants(n.c)) {
                    auto& gb = grad_buf(n.c);
                    for (int r = 0; r < m; ++r)
                        for (int o = 0; o < out; ++o) gb[o] += g[static_cast<size_t>(r) * out + o];
                }
                break;
            }
            case Op::Conv2d: backprop_conv(n); break;
            case Op::ConcatCols: {
                const int m = n.shape[0];
                const int da = nodes_[n.a].shape[1], db = nodes_[n.b].shape[1];
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    for (int r = 0; r < m; ++r)
                        for (int i = 0; i < da; ++i)
                            ga[static_cast<size_t>(r) * da + i] +=
                                g[static_cast<size_t>(r) * (da + db) + i];
                }
                if (wants(n.b)) {
                    auto& gb = grad_buf(n.b);
                    for (int r = 0; r < m; ++r)
                        for (int i = 0; i < db; ++i)
                            gb[static_cast<size_t>(r) * db + i] +=
                                g[static_cast<size_t>(r) * (da + db) + da + i];
                }
                break;
            }
            case Op::ConcatChan: {
                const int N = n.shape[0], c1 = nodes_[n.a].shape[1], c2 = nodes_[n.b].shape[1];
                const int hw = n.shape[2] * n.shape[3];
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    for (int i = 0; i < N; ++i)
                        for (int j = 0; j < c1 * hw; ++j)
                            ga[static_cast<size_t>(i) * c1 * hw + j] +=
                                g[static_cast<size_t>(i) * (c1 + c2) * hw + j];
                }
                if (wants(n.b)) {
                    auto& gb = grad_buf(n.b);
                    for (int i = 0; i < N; ++i)
                        for (int j = 0; j < c2 * hw; ++j)
                            gb[static_cast<size_t>(i) * c2 * hw + j] +=
                                g[(static_cast<size_t>(i) * (c1 + c2) + c1) * hw + j];
                }
                break;
            }
            case Op::TileSpatial: {
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    const int N = n.shape[0], d = n.shape[1], hw = n.shape[2] * n.shape[3];
                    for (int i = 0; i < N; ++i)
                        for (int c = 0; c < d; ++c) {
                            Real acc = 0;
                            const Real* gp = g.data() + (static_cast<size_t>(i) * d + c) * hw;
                            for (int p = 0; p < hw; ++p) acc += gp[p];
                            ga[static_cast<size_t>(i) * d + c] += acc;
                        }
                }
                break;
            }
            case Op::Reshape: {
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                }
                break;
            }
            case Op::GatherRows: {
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    const int d = n.shape[1];
                    for (size_t r = 0; r < n.many.size(); ++r) {
                        Real* dst = ga.data() + static_cast<size_t>(n.many[r]) * d;
                        const Real* src = g.data() + r * d;
                        for (int i = 0; i < d; ++i) dst[i] += src[i];
                    }
                }
                break;
            }
            case Op::ConcatRows: {
                size_t off = 0;
                for (int p : n.many) {
                    const size_t sz = nodes_[p].val.size();
                    if (wants(p)) {
                        auto& gp = grad_buf(p);
                        for (size_t i = 0; i < sz; ++i) gp[i] += g[off + i];
                    }
                    off += sz;
                }
                break;
            }
            case Op::RowDot: {
                const auto& av = nodes_[n.a].val;
                const auto& bv = nodes_[n.b].val;
                const int m = n.shape[0];
                const int d = nodes_[n.a].shape[1];
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    for (int r = 0; r < m; ++r)
                        for (int i = 0; i < d; ++i)
                            ga[static_cast<size_t>(r) * d + i] += g[r] * bv[static_cast<size_t>(r) * d + i];
                }
                if (wants(n.b)) {
                    auto& gb = grad_buf(n.b);
                    for (int r = 0; r < m; ++r)
                        for (int i = 0; i < d; ++i)
                            gb[static_cast<size_t>(r) * d + i] += g[r] * av[static_cast<size_t>(r) * d + i];
                }
                break;
            }
            case Op::MatmulNT: {
                const Node& an = nodes_[n.a];
                const Node& bn = nodes_[n.b];
                const int m = an.shape[0], d = an.shape[1], n2 = bn.shape[0];
                if (wants(n.a)) // dA += g * B
                    gemm_acc(g.data(), bn.val.data(), grad_buf(n.a).data(), m, n2, d);
                if (wants(n.b)) { // dB[j,:] += sum_r g[r,j] * A[r,:]
                    auto& gb = grad_buf(n.b);
                    for (int r = 0; r < m; ++r)
                        for (int j = 0; j < n2; ++j) {
                            const Real gv = g[static_cast<size_t>(r) * n2 + j];
                            if (gv == Real(0)) continue;
                            const Real* ar = an.val.data() + static_cast<size_t>(r) * d;
                            Real* bj = gb.data() + static_cast<size_t>(j) * d;
                            for (int i = 0; i < d; ++i) bj[i] += gv * ar[i];
                        }
                }
                break;
            }
            case Op::SoftmaxCE: {
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    const int m = nodes_[n.a].shape[0], c = nodes_[n.a].shape[1];
                    const Real scale = g[0] / static_cast<Real>(m);
                    for (int r = 0; r < m; ++r) {
                        const Real* p = n.aux.data() + static_cast<size_t>(r) * c;
                        Real* gr = ga.data() + static_cast<size_t>(r) * c;
                        for (int j = 0; j < c; ++j) gr[j] += scale * p[j];
                        gr[n.many[r]] -= scale;
                    }
                }
                break;
            }
            case Op::BceLogits: {
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    const auto& sv = nodes_[n.a].val;
                    const Real scale = g[0] / static_cast<Real>(n.aux.size());
                    for (size_t i = 0; i < n.aux.size(); ++i)
                        ga[i] += scale * (stable_sigmoid(sv[i]) - n.aux[i]);
                }
                break;
            }
            case Op::MseT: {
                const auto& pv = nodes_[n.a].val;
                const auto& tv = nodes_[n.b].val;
                const Real scale = g[0] * Real(2) / static_cast<Real>(pv.size());
                if (wants(n.a)) {
                    auto& ga = grad_buf(n.a);
                    for (size_t i = 0; i < pv.size(); ++i) ga[i] += scale * (pv[i] - tv[i]);
                }
                if (wants(n.b)) {
                    auto& gb = grad_buf(n.b);
                    for (size_t i = 0; i < pv.size(); ++i) gb[i] -= scale * (pv[i] - tv[i]);
                }
                break;
            }
            case Op::WSum: {
                for (size_t i = 0; i < n.many.size(); ++i)
                    if (wants(n.many[i])) grad_buf(n.many[i])[0] += g[0] * n.aux[i];
                break;
            }
        }
    }

    void backprop_conv(Node& n) {
        const Node& xn = nodes_[n.a];
        const Node& wn = nodes_[n.b];
        const std::vector<Real>& g = n.grad;
        const int N = xn.shape[0], ci = xn.shape[1], h = xn.shape[2], wd = xn.shape[3];
        const int co = wn.shape[0], k = n.i0, pad = (k - 1) / 2;
        const int hw = h * wd;
        if (k == 1) {
            if (wants(n.a)) {
                // dx[ci,hw] += w^T[ci,co] * g[co,hw] per instance
                std::vector<Real> wt(static_cast<size_t>(ci) * co);
                for (int oc = 0; oc < co; ++oc)
                    for (int ic = 0; ic < ci; ++ic)
                        wt[static_cast<size_t>(ic) * co + oc] = wn.val[static_cast<size_t>(oc) * ci + ic];
                auto& ga = grad_buf(n.a);
                for (int i = 0; i < N; ++i)
                    gemm_acc(wt.data(), g.data() + static_cast<size_t>(i) * co * hw,
                             ga.data() + static_cast<size_t>(i) * ci * hw, ci, co, hw);
            }
            if (wants(n.b)) {
                auto& gw = grad_buf(n.b);
                for (int i = 0; i < N; ++i)
                    for (int oc = 0; oc < co; ++oc)
                        for (int ic = 0; ic < ci; ++ic) {
                            Real acc = 0;
                            const Real* gp = g.data() + (static_cast<size_t>(i) * co + oc) * hw;
                            const Real* xp = xn.val.data() + (static_cast<size_t>(i) * ci + ic) * hw;
                            for (int p = 0; p < hw; ++p) acc += gp[p] * xp[p];
                            gw[static_cast<size_t>(oc) * ci + ic] += acc;
                        }
            }
        } else {
            if (wants(n.a)) {
                auto& ga = grad_buf(n.a);
                for (int i = 0; i < N; ++i)
                    for (int oc = 0; oc < co; ++oc)
                        for (int ic = 0; ic < ci; ++ic)
                            for (int oy = 0; oy < h; ++oy)
                                for (int ox = 0; ox < wd; ++ox) {
                                    const Real gv = g[((static_cast<size_t>(i) * co + oc) * h + oy) * wd + ox];
                                    if (gv == Real(0)) continue;
                                    for (int ky = 0; ky < k; ++ky)
                                        for (int kx = 0; kx < k; ++kx) {
                                            const int iy = oy + ky - pad, ix = ox + kx - pad;
                                            if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                                            ga[((static_cast<size_t>(i) * ci + ic) * h + iy) * wd + ix] +=
                                                gv * wn.val[((static_cast<size_t>(oc) * ci + ic) * k + ky) * k + kx];
                                        }
                                }
            }
            if (wants(n.b)) {
                auto& gw = grad_buf(n.b);
                for (int i = 0; i < N; ++i)
                    for (int oc = 0; oc < co; ++oc)
                        for (int ic = 0; ic < ci; ++ic)
                            for (int oy = 0; oy < h; ++oy)
                                for (int ox = 0; ox < wd; ++ox) {
                                    const Real gv = g[((static_cast<size_t>(i) * co + oc) * h + oy) * wd + ox];
                                    if (gv == Real(0)) continue;
                                    for (int ky = 0; ky < k; ++ky)
                                        for (int kx = 0; kx < k; ++kx) {
                                            const int iy = oy + ky - pad, ix = ox + kx - pad;
                                            if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                                            gw[((static_cast<size_t>(oc) * ci + ic) * k + ky) * k + kx] +=
                                                gv * xn.val[((static_cast<size_t>(i) * ci + ic) * h + iy) * wd + ix];
                                        }
                                }
            }
        }
        if (wants(n.c)) {
            auto& gb = grad_buf(n.c);
            for (int i = 0; i < N; ++i)
                for (int oc = 0; oc < co; ++oc) {
                    Real acc = 0;
                    const Real* gp = g.data() + (static_cast<size_t>(i) * co + oc) * hw;
                    for (int p = 0; p < hw; ++p) acc += gp[p];
                    gb[oc] += acc;
                }
        }
    }
};

} // namespace bplab::tensor
