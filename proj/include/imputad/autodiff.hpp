#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <cstddef>
#include <string>
#include <vector>

#include "imputad/error.hpp"
#include "imputad/tensor.hpp"

namespace imputad {

// Named trainable tensors. Gradients share the same layout.
struct Parameters {
    std::vector<std::string> names;
    std::vector<Tensor> tensors;

    std::size_t add(std::string name, Tensor t) {
        names.push_back(std::move(name));
        tensors.push_back(std::move(t));
        return tensors.size() - 1;
    }

    std::size_t scalar_count() const noexcept {
        std::size_t n = 0;
        for (const auto& t : tensors) n += t.size();
        return n;
    }

    Parameters zeros_like() const {
        Parameters p{names, {}};
        for (const auto& t : tensors) p.tensors.emplace_back(t.rows, t.cols);
        return p;
    }

    friend bool operator==(const Parameters&, const Parameters&) = default;
};

using Gradients = Parameters;

// Handle to a value recorded on a tape.
struct Var {
    std::size_t id = 0;
};

// Records tensor-level primitives as they execute and replays them in
// reverse to accumulate exact gradients. Parameter leaves hold a pointer to
// the bound Parameters; those must outlive the tape.
class Tape {
public:
    enum class Op {
        Constant, Parameter, Add, Sub, Mul, Scale, MulConst, Exp, Tanh, Silu, Abs, Square,
        Sum, Even, Odd, Interleave, Reverse, Conv1d, TimeLinear, Gather
    };

    Var constant(Tensor t) {
        Node n(Op::Constant);
        n.value = std::move(t);
        return push(std::move(n));
    }

    Var parameter(const Parameters& params, std::size_t index) {
        require(index < params.tensors.size(), "out_of_range", "parameter index out of range");
        Node n(Op::Parameter);
        n.source = &params.tensors[index];
        n.param_index = index;
        n.value = *n.source;
        return push(std::move(n));
    }

    // One leaf per parameter tensor, in order.
    std::vector<Var> bind(const Parameters& params) {
        std::vector<Var> vars;
        vars.reserve(params.tensors.size());
        for (std::size_t i = 0; i < params.tensors.size(); ++i) vars.push_back(parameter(params, i));
        return vars;
    }

    Var add(Var a, Var b) { return binary(Op::Add, a, b); }
    Var sub(Var a, Var b) { return binary(Op::Sub, a, b); }
    Var mul(Var a, Var b) { return binary(Op::Mul, a, b); }
    Var exp(Var a) { return unary(Op::Exp, a); }
    Var tanh(Var a) { return unary(Op::Tanh, a); }
    Var silu(Var a) { return unary(Op::Silu, a); }
    Var abs(Var a) { return unary(Op::Abs, a); }
    Var square(Var a) { return unary(Op::Square, a); }
    Var sum(Var a) { return unary(Op::Sum, a); }
    Var even(Var a) { return unary(Op::Even, a); }
    Var odd(Var a) { return unary(Op::Odd, a); }
    Var reverse(Var a) { return unary(Op::Reverse, a); }
    Var interleave(Var even, Var odd) { return binary(Op::Interleave, even, odd); }

    Var scale(Var a, double s) {
        Node n(Op::Scale);
        n.in = {a.id};
        n.scalar = s;
        return record(std::move(n));
    }

    Var mul_const(Var a, Tensor c) {
        Node n(Op::MulConst);
        n.in = {a.id};
        n.aux = std::move(c);
        return record(std::move(n));
    }

    // Same-length 1-D convolution with edge replication.
    // weight: out x (in * kernel), bias: out x 1.
    Var conv1d(Var x, Var weight, Var bias, std::size_t kernel) {
        Node n(Op::Conv1d);
        n.in = {x.id, weight.id, bias.id};
        n.kernel = kernel;
        return record(std::move(n));
    }

    // Dense map along the time axis shared across channels.
    // weight: L x L, bias: 1 x L.
    Var time_linear(Var x, Var weight, Var bias) {
        Node n(Op::TimeLinear);
        n.in = {x.id, weight.id, bias.id};
        return record(std::move(n));
    }

    // Row vector of x's flat entries at `indices`.
    Var gather(Var x, std::vector<std::size_t> indices) {
        Node n(Op::Gather);
        n.in = {x.id};
        n.indices = std::move(indices);
        return record(std::move(n));
    }

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Exact gradient of a 1x1 output with respect to every parameter tensor
    // of `params` that was bound on this tape. Unused tensors get zeros.
    Gradients backward(Var output, const Parameters& params) const {
        const Node& out = nodes_.at(output.id);
        require(out.value.rows == 1 && out.value.cols == 1, "non_scalar",
                "backward requires a scalar output");
        std::vector<Tensor> grads(output.id + 1);
        grads[output.id] = Tensor(1, 1, 1.0);
        Gradients result = params.zeros_like();

        for (std::size_t id = output.id + 1; id-- > 0;) {
            if (grads[id].size() == 0) continue;
            const Node& n = nodes_[id];
            const Tensor& g = grads[id];
            if (n.op == Op::Parameter) {
                if (n.param_index < params.tensors.size() &&
                    n.source == &params.tensors[n.param_index])
                    accumulate(result.tensors[n.param_index], g);
                continue;
            }
            if (n.op == Op::Constant) continue;
            propagate(n, g, grads);
        }
        return result;
    }

    // Recompute every node from its inputs; used to check that a recorded
    // pass is reproducible.
    void replay() {
        for (auto& n : nodes_) {
            if (n.op == Op::Constant) continue;
            if (n.op == Op::Parameter) {
                n.value = *n.source;
                continue;
            }
            n.value = compute(n);
        }
    }

private:
    struct Node {
        Op op;

        explicit Node(Op o) : op(o) {}
        std::vector<std::size_t> in;
        Tensor value;
        const Tensor* source = nullptr;
        std::size_t param_index = 0;
        double scalar = 0.0;
        std::size_t kernel = 0;
        Tensor aux;
        std::vector<std::size_t> indices;
    };

    std::deque<Node> nodes_;  // stable references across record()

    Var push(Node n) {
        nodes_.push_back(std::move(n));
        return Var{nodes_.size() - 1};
    }

    Var record(Node n) {
        for (auto id : n.in) require(id < nodes_.size(), "bad_var", "variable not on this tape");
        n.value = compute(n);
        return push(std::move(n));
    }

    Var unary(Op op, Var a) {
        Node n(op);
        n.in = {a.id};
        return record(std::move(n));
    }

    Var binary(Op op, Var a, Var b) {
        Node n(op);
        n.in = {a.id, b.id};
        return record(std::move(n));
    }

    const Tensor& arg(const Node& n, std::size_t i) const { return nodes_[n.in[i]].value; }

    static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

    static void accumulate(Tensor& dst, const Tensor& src) {
        if (dst.size() == 0) {
            dst = src;
            return;
        }
        for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
    }

    static Tensor& slot(std::vector<Tensor>& grads, std::size_t id, const Tensor& like) {
        if (grads[id].size() == 0) grads[id] = Tensor(like.rows, like.cols);
        return grads[id];
    }

    Tensor compute(const Node& n) const {
        switch (n.op) {
            case Op::Add:
            case Op::Sub:
            case Op::Mul: {
                const Tensor &a = arg(n, 0), &b = arg(n, 1);
                require(a.same_shape(b), "shape_mismatch", "elementwise operands differ in shape");
                Tensor y(a.rows, a.cols);
                for (std::size_t i = 0; i < y.size(); ++i)
                    y.data[i] = n.op == Op::Add   ? a.data[i] + b.data[i]
                                : n.op == Op::Sub ? a.data[i] - b.data[i]
                                                  : a.data[i] * b.data[i];
                return y;
            }
            case Op::MulConst: {
                const Tensor& a = arg(n, 0);
                require(a.same_shape(n.aux), "shape_mismatch", "constant factor differs in shape");
                Tensor y = a;
                for (std::size_t i = 0; i < y.size(); ++i) y.data[i] *= n.aux.data[i];
                return y;
            }
            case Op::Scale:
            case Op::Exp:
            case Op::Tanh:
            case Op::Silu:
            case Op::Abs:
            case Op::Square: {
                Tensor y = arg(n, 0);
                for (double& v : y.data) {
                    switch (n.op) {
                        case Op::Scale: v *= n.scalar; break;
                        case Op::Exp: v = std::exp(v); break;
                        case Op::Tanh: v = std::tanh(v); break;
                        case Op::Silu: v = v * sigmoid(v); break;
                        case Op::Abs: v = std::fabs(v); break;
                        default: v = v * v; break;
                    }
                }
                return y;
            }
            case Op::Sum: {
                double s = 0.0;
                for (double v : arg(n, 0).data) s += v;
                return Tensor(1, 1, s);
            }
            case Op::Even:
            case Op::Odd: {
                const Tensor& a = arg(n, 0);
                require(a.cols % 2 == 0, "length_not_divisible", "length not divisible by 2");
                const std::size_t half = a.cols / 2, off = n.op == Op::Odd ? 1 : 0;
                Tensor y(a.rows, half);
                for (std::size_t r = 0; r < a.rows; ++r)
                    for (std::size_t j = 0; j < half; ++j) y(r, j) = a(r, 2 * j + off);
                return y;
            }
            case Op::Interleave: {
                const Tensor &e = arg(n, 0), &o = arg(n, 1);
                require(e.same_shape(o), "shape_mismatch", "interleave halves differ in shape");
                Tensor y(e.rows, 2 * e.cols);
                for (std::size_t r = 0; r < e.rows; ++r)
                    for (std::size_t j = 0; j < e.cols; ++j) {
                        y(r, 2 * j) = e(r, j);
                        y(r, 2 * j + 1) = o(r, j);
                    }
                return y;
            }
            case Op::Reverse: {
                const Tensor& a = arg(n, 0);
                Tensor y(a.rows, a.cols);
                for (std::size_t r = 0; r < a.rows; ++r)
                    for (std::size_t t = 0; t < a.cols; ++t) y(r, t) = a(r, a.cols - 1 - t);
                return y;
            }
            case Op::Conv1d: return conv_forward(arg(n, 0), arg(n, 1), arg(n, 2), n.kernel);
            case Op::TimeLinear: {
                const Tensor &x = arg(n, 0), &w = arg(n, 1), &b = arg(n, 2);
                require(w.rows == x.cols && w.cols == x.cols && b.cols == x.cols, "shape_mismatch",
                        "time-linear weights do not match input length");
                Tensor y(x.rows, x.cols);
                for (std::size_t c = 0; c < x.rows; ++c)
                    for (std::size_t p = 0; p < x.cols; ++p) {
                        double s = b.data[p];
                        for (std::size_t q = 0; q < x.cols; ++q) s += w(p, q) * x(c, q);
                        y(c, p) = s;
                    }
                return y;
            }
            case Op::Gather: {
                const Tensor& a = arg(n, 0);
                Tensor y(1, n.indices.size());
                for (std::size_t j = 0; j < n.indices.size(); ++j) {
                    require(n.indices[j] < a.size(), "out_of_range", "gather index out of range");
                    y.data[j] = a.data[n.indices[j]];
                }
                return y;
            }
            case Op::Constant:
            case Op::Parameter: break;
        }
        return n.value;
    }

    static std::size_t clamp_index(std::ptrdiff_t t, std::size_t len) {
        if (t < 0) return 0;
        if (static_cast<std::size_t>(t) >= len) return len - 1;
        return static_cast<std::size_t>(t);
    }

    static Tensor conv_forward(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t k) {
        require(k % 2 == 1, "bad_kernel", "kernel size must be odd");
        require(w.cols == x.rows * k && b.rows == w.rows && b.cols == 1, "shape_mismatch",
                "convolution weights do not match input channels");
        const std::size_t len = x.cols, half = k / 2;
        Tensor y(w.rows, len);
        for (std::size_t o = 0; o < w.rows; ++o) {
            for (std::size_t t = 0; t < len; ++t) {
                double s = b.data[o];
                for (std::size_t i = 0; i < x.rows; ++i)
                    for (std::size_t j = 0; j < k; ++j)
                        s += w(o, i * k + j) *
                             x(i, clamp_index(static_cast<std::ptrdiff_t>(t + j) -
                                                  static_cast<std::ptrdiff_t>(half), len));
                y(o, t) = s;
            }
        }
        return y;
    }

    void propagate(const Node& n, const Tensor& g, std::vector<Tensor>& grads) const {
        switch (n.op) {
            case Op::Add:
            case Op::Sub:
            case Op::Mul: {
                const Tensor &a = arg(n, 0), &b = arg(n, 1);
                Tensor& ga = slot(grads, n.in[0], a);
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga.data[i] += n.op == Op::Mul ? g.data[i] * b.data[i] : g.data[i];
                Tensor& gb = slot(grads, n.in[1], b);
                for (std::size_t i = 0; i < g.size(); ++i)
                    gb.data[i] += n.op == Op::Mul ? g.data[i] * a.data[i]
                                  : n.op == Op::Sub ? -g.data[i]
                                                    : g.data[i];
                break;
            }
            case Op::MulConst: {
                Tensor& ga = slot(grads, n.in[0], arg(n, 0));
                for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * n.aux.data[i];
                break;
            }
            case Op::Scale:
            case Op::Exp:
            case Op::Tanh:
            case Op::Silu:
            case Op::Abs:
            case Op::Square: {
                const Tensor& x = arg(n, 0);
                Tensor& ga = slot(grads, n.in[0], x);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double xv = x.data[i], yv = n.value.data[i];
                    double d = 0.0;
                    switch (n.op) {
                        case Op::Scale: d = n.scalar; break;
                        case Op::Exp: d = yv; break;
                        case Op::Tanh: d = 1.0 - yv * yv; break;
                        case Op::Silu: {
                            const double s = sigmoid(xv);
                            d = s * (1.0 + xv * (1.0 - s));
                            break;
                        }
                        // Subgradient 0 at the kink.
                        case Op::Abs: d = xv > 0.0 ? 1.0 : (xv < 0.0 ? -1.0 : 0.0); break;
                        default: d = 2.0 * xv; break;
                    }
                    ga.data[i] += g.data[i] * d;
                }
                break;
            }
            case Op::Sum: {
                Tensor& ga = slot(grads, n.in[0], arg(n, 0));
                for (double& v : ga.data) v += g.data[0];
                break;
            }
            case Op::Even:
            case Op::Odd: {
                Tensor& ga = slot(grads, n.in[0], arg(n, 0));
                const std::size_t off = n.op == Op::Odd ? 1 : 0;
                for (std::size_t r = 0; r < g.rows; ++r)
                    for (std::size_t j = 0; j < g.cols; ++j) ga(r, 2 * j + off) += g(r, j);
                break;
            }
            case Op::Interleave: {
                Tensor& ge = slot(grads, n.in[0], arg(n, 0));
                Tensor& go = slot(grads, n.in[1], arg(n, 1));
                for (std::size_t r = 0; r < ge.rows; ++r)
                    for (std::size_t j = 0; j < ge.cols; ++j) {
                        ge(r, j) += g(r, 2 * j);
                        go(r, j) += g(r, 2 * j + 1);
                    }
                break;
            }
            case Op::Reverse: {
                Tensor& ga = slot(grads, n.in[0], arg(n, 0));
                for (std::size_t r = 0; r < g.rows; ++r)
                    for (std::size_t t = 0; t < g.cols; ++t) ga(r, g.cols - 1 - t) += g(r, t);
                break;
            }
            case Op::Conv1d: {
                const Tensor &x = arg(n, 0), &w = arg(n, 1);
                Tensor& gx = slot(grads, n.in[0], x);
                Tensor& gw = slot(grads, n.in[1], w);
                Tensor& gb = slot(grads, n.in[2], arg(n, 2));
                const std::size_t k = n.kernel, half = k / 2, len = x.cols;
                for (std::size_t o = 0; o < w.rows; ++o)
                    for (std::size_t t = 0; t < len; ++t) {
                        const double go = g(o, t);
                        if (go == 0.0) continue;
                        gb.data[o] += go;
                        for (std::size_t i = 0; i < x.rows; ++i)
                            for (std::size_t j = 0; j < k; ++j) {
                                const std::size_t src = clamp_index(
                                    static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(half), len);
                                gw(o, i * k + j) += go * x(i, src);
                                gx(i, src) += go * w(o, i * k + j);
                            }
                    }
                break;
            }
            case Op::TimeLinear: {
                const Tensor &x = arg(n, 0), &w = arg(n, 1);
                Tensor& gx = slot(grads, n.in[0], x);
                Tensor& gw = slot(grads, n.in[1], w);
                Tensor& gb = slot(grads, n.in[2], arg(n, 2));
                for (std::size_t c = 0; c < x.rows; ++c)
                    for (std::size_t p = 0; p < x.cols; ++p) {
                        const double gp = g(c, p);
                        if (gp == 0.0) continue;
                        gb.data[p] += gp;
                        for (std::size_t q = 0; q < x.cols; ++q) {
                            gw(p, q) += gp * x(c, q);
                            gx(c, q) += gp * w(p, q);
                        }
                    }
                break;
            }
            case Op::Gather: {
                Tensor& ga = slot(grads, n.in[0], arg(n, 0));
                for (std::size_t j = 0; j < n.indices.size(); ++j) ga.data[n.indices[j]] += g.data[j];
                break;
            }
            case Op::Constant:
            case Op::Parameter: break;
        }
    }
};

}  // namespace imputad
