#include "sodef/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sodef {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "{";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "}";
}

Tape* result_tape(const Tensor& a, const Tensor& b) {
    if (a.taped() && b.taped() && a.tape() != b.tape())
        throw std::logic_error("tensor op: operands recorded on different tapes");
    return a.taped() ? a.tape() : b.tape();
}

int node_id(const Tensor& t) { return t.taped() ? t.node() : -1; }

// OpenMP kicks in above this many multiply-adds; tape-level ops on desk-scale
// models stay serial.
constexpr std::size_t kMatmulParallelFlops = 1u << 15;

void matmul_kernel(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n, par::Mode mode) {
    const bool parallel = mode == par::Mode::Parallel && m * k * n >= kMatmulParallelFlops;
    par::for_each_index(m, parallel ? par::Mode::Parallel : par::Mode::Serial, [&](std::size_t i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
    });
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    Tensor t;
    t.data_.assign(shape_product(shape), 0.0);
    t.shape_ = std::move(shape);
    return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("Tensor::full: non-finite value");
    Tensor t;
    t.data_.assign(shape_product(shape), value);
    t.shape_ = std::move(shape);
    return t;
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data) {
    if (shape_product(shape) != data.size())
        throw std::invalid_argument("Tensor::from_data: shape " + shape_str(shape) +
                                    " does not match data length " + std::to_string(data.size()));
    for (double v : data)
        if (!std::isfinite(v)) throw std::invalid_argument("Tensor::from_data: non-finite entry");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

std::size_t Tensor::rows() const {
    if (ndim() != 2) throw std::logic_error("Tensor::rows: tensor is not 2-d");
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (ndim() != 2) throw std::logic_error("Tensor::cols: tensor is not 2-d");
    return shape_[1];
}

double Tensor::value() const {
    if (size() != 1) throw std::logic_error("Tensor::value: tensor is not scalar");
    return data_[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
    return data_[i * cols() + j];
}

double& Tensor::at(std::size_t i, std::size_t j) {
    return data_[i * cols() + j];
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::detach() const {
    Tensor t;
    t.shape_ = shape_;
    t.data_ = data_;
    return t;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tensor Tape::leaf(const Tensor& value) {
    Node node;
    node.op = OpKind::Leaf;
    node.shape = value.shape();
    int id = push_node(std::move(node));
    Tensor t = value.detach();
    bind(t, id);
    return t;
}

int Tape::push_node(Node node) {
    nodes_.push_back(std::move(node));
    has_grads_ = false;
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::bind(Tensor& t, int node_id) {
    t.tape_ = this;
    t.node_ = node_id;
}

std::vector<double>& Tape::grad_slot(int id) {
    auto& g = grads_[id];
    if (g.empty()) g.assign(shape_product(nodes_[id].shape), 0.0);
    return g;
}

void Tape::backward(const Tensor& root) {
    if (!root.taped() || root.tape() != this)
        throw std::invalid_argument("Tape::backward: root is not on this tape");
    if (root.size() != 1) throw std::invalid_argument("Tape::backward: root must be scalar");

    grads_.assign(nodes_.size(), {});
    grad_slot(root.node_)[0] = 1.0;

    for (int id = root.node_; id >= 0; --id) {
        const Node& nd = nodes_[id];
        if (grads_[id].empty()) continue;  // root does not depend on this node
        const std::vector<double>& g = grads_[id];

        // Adds g (reduced if `in` was a broadcast scalar) into input `in`.
        auto accum_elementwise = [&](int in, const std::vector<std::size_t>& in_shape,
                                     auto&& factor) {
            if (in < 0) return;
            auto& gin = grad_slot(in);
            if (shape_product(in_shape) == 1 && g.size() > 1) {
                double acc = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * factor(i);
                gin[0] += acc;
            } else {
                for (std::size_t i = 0; i < g.size(); ++i) gin[i] += g[i] * factor(i);
            }
        };
        // Operand values with scalar broadcast, as seen by the forward pass.
        auto operand = [&](const std::vector<double>& v, std::size_t i) {
            return v.size() == 1 ? v[0] : v[i];
        };

        switch (nd.op) {
            case OpKind::Leaf:
                break;
            case OpKind::Add:
                accum_elementwise(nd.a, nd.shape_a, [](std::size_t) { return 1.0; });
                accum_elementwise(nd.b, nd.shape_b, [](std::size_t) { return 1.0; });
                break;
            case OpKind::Sub:
                accum_elementwise(nd.a, nd.shape_a, [](std::size_t) { return 1.0; });
                accum_elementwise(nd.b, nd.shape_b, [](std::size_t) { return -1.0; });
                break;
            case OpKind::Mul:
                accum_elementwise(nd.a, nd.shape_a,
                                  [&](std::size_t i) { return operand(nd.saved_b, i); });
                accum_elementwise(nd.b, nd.shape_b,
                                  [&](std::size_t i) { return operand(nd.saved_a, i); });
                break;
            case OpKind::Neg:
                accum_elementwise(nd.a, nd.shape_a, [](std::size_t) { return -1.0; });
                break;
            case OpKind::Abs:
                accum_elementwise(nd.a, nd.shape_a, [&](std::size_t i) {
                    double v = nd.saved_a[i];
                    return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                });
                break;
            case OpKind::Exp:  // saved_a holds the output
                accum_elementwise(nd.a, nd.shape_a, [&](std::size_t i) { return nd.saved_a[i]; });
                break;
            case OpKind::Tanh:  // saved_a holds the output
                accum_elementwise(nd.a, nd.shape_a, [&](std::size_t i) {
                    return 1.0 - nd.saved_a[i] * nd.saved_a[i];
                });
                break;
            case OpKind::Relu:  // saved_a holds the output
                accum_elementwise(nd.a, nd.shape_a,
                                  [&](std::size_t i) { return nd.saved_a[i] > 0.0 ? 1.0 : 0.0; });
                break;
            case OpKind::Scale:
                accum_elementwise(nd.a, nd.shape_a, [&](std::size_t) { return nd.attr; });
                break;
            case OpKind::ClampMax:
                accum_elementwise(nd.a, nd.shape_a,
                                  [&](std::size_t i) { return nd.saved_a[i] < nd.attr ? 1.0 : 0.0; });
                break;
            case OpKind::MatMul: {
                const std::size_t m = nd.shape_a[0];
                const std::size_t k = nd.shape_a[1];
                const bool vec = nd.shape_b.size() == 1;
                const std::size_t n = vec ? 1 : nd.shape_b[1];
                if (nd.a >= 0) {
                    auto& ga = grad_slot(nd.a);
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < k; ++j) {
                            double acc = 0.0;
                            for (std::size_t c = 0; c < n; ++c)
                                acc += g[i * n + c] * nd.saved_b[j * n + c];
                            ga[i * k + j] += acc;
                        }
                }
                if (nd.b >= 0) {
                    auto& gb = grad_slot(nd.b);
                    for (std::size_t j = 0; j < k; ++j)
                        for (std::size_t c = 0; c < n; ++c) {
                            double acc = 0.0;
                            for (std::size_t i = 0; i < m; ++i)
                                acc += nd.saved_a[i * k + j] * g[i * n + c];
                            gb[j * n + c] += acc;
                        }
                }
                break;
            }
            case OpKind::Transpose: {
                if (nd.a < 0) break;
                auto& ga = grad_slot(nd.a);
                const std::size_t m = nd.shape_a[0];
                const std::size_t n = nd.shape_a[1];
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
                break;
            }
            case OpKind::Sum: {
                if (nd.a < 0) break;
                auto& ga = grad_slot(nd.a);
                for (double& v : ga) v += g[0];
                break;
            }
            case OpKind::Norm2: {
                if (nd.a < 0) break;
                auto& ga = grad_slot(nd.a);
                const double out = nd.attr;
                if (out > 0.0)
                    for (std::size_t i = 0; i < ga.size(); ++i)
                        ga[i] += g[0] * nd.saved_a[i] / out;
                break;
            }
            case OpKind::DiagPart: {
                if (nd.a < 0) break;
                auto& ga = grad_slot(nd.a);
                const std::size_t n = nd.shape[0];
                for (std::size_t i = 0; i < n; ++i) ga[i * n + i] += g[i];
                break;
            }
            case OpKind::DiagEmbed: {
                if (nd.a < 0) break;
                auto& ga = grad_slot(nd.a);
                const std::size_t n = nd.shape_a[0];
                for (std::size_t i = 0; i < n; ++i) ga[i] += g[i * n + i];
                break;
            }
            case OpKind::SoftmaxCrossEntropy: {
                if (nd.a < 0) break;
                auto& ga = grad_slot(nd.a);
                const std::size_t label = static_cast<std::size_t>(nd.attr);
                for (std::size_t i = 0; i < ga.size(); ++i)
                    ga[i] += g[0] * (nd.saved_a[i] - (i == label ? 1.0 : 0.0));
                break;
            }
        }
    }
    has_grads_ = true;
}

Tensor Tape::grad(const Tensor& t) const {
    if (!has_grads_) throw std::logic_error("Tape::grad: backward() has not run");
    if (!t.taped() || t.tape() != this)
        throw std::invalid_argument("Tape::grad: tensor is not on this tape");
    const auto& g = grads_[t.node_];
    Tensor out = Tensor::zeros(t.shape());
    // No finiteness validation here: a saturated-but-finite loss can still
    // have an overflowing gradient, and that belongs to the caller's
    // divergence handling, not to a constructor check.
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i];
    return out;
}

// ---------------------------------------------------------------------------
// Ops
// ---------------------------------------------------------------------------

namespace {

// Shared driver for binary elementwise ops with scalar broadcasting.
// `save_inputs` controls whether backward needs the operand values.
template <class F>
Tensor binary_op(OpKind op, const Tensor& a, const Tensor& b, bool save_inputs, F&& f) {
    const bool a_scalar = a.size() == 1;
    const bool b_scalar = b.size() == 1;
    if (!a_scalar && !b_scalar && a.shape() != b.shape())
        throw std::invalid_argument("tensor op: incompatible shapes " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    const Tensor& out_like = a_scalar && !b_scalar ? b : a;
    Tensor out = Tensor::zeros(out_like.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = f(a[a_scalar ? 0 : i], b[b_scalar ? 0 : i]);

    if (Tape* tape = result_tape(a, b)) {
        Tape::Node node;
        node.op = op;
        node.a = node_id(a);
        node.b = node_id(b);
        node.shape = out.shape();
        node.shape_a = a.shape();
        node.shape_b = b.shape();
        if (save_inputs) {
            node.saved_a = a.data();
            node.saved_b = b.data();
        }
        tape->bind(out, tape->push_node(std::move(node)));
    }
    return out;
}

// Op results skip the finiteness validation of the public constructors:
// overflow must propagate to the caller's divergence checks (the training
// loop, the integrator) instead of throwing mid-expression.
Tensor raw_scalar(double v) {
    Tensor out = Tensor::zeros({1});
    out[0] = v;
    return out;
}

// What the backward rule of a unary op needs saved on the node.
enum class Save { Nothing, Input, Output };

template <class F>
Tensor unary_op(OpKind op, const Tensor& a, F&& f, Save save, double attr = 0.0) {
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i]);
    if (a.taped()) {
        Tape::Node node;
        node.op = op;
        node.a = a.node();
        node.shape = out.shape();
        node.shape_a = a.shape();
        if (save == Save::Input) node.saved_a = a.data();
        if (save == Save::Output) node.saved_a = out.data();
        node.attr = attr;
        a.tape()->bind(out, a.tape()->push_node(std::move(node)));
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(OpKind::Add, a, b, false, [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(OpKind::Sub, a, b, false, [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(OpKind::Mul, a, b, true, [](double x, double y) { return x * y; });
}

Tensor neg(const Tensor& a) {
    return unary_op(OpKind::Neg, a, [](double x) { return -x; }, Save::Nothing);
}

Tensor abs(const Tensor& a) {
    return unary_op(OpKind::Abs, a, [](double x) { return std::fabs(x); }, Save::Input);
}

Tensor exp(const Tensor& a) {
    Tensor out = unary_op(OpKind::Exp, a, [](double x) { return std::exp(x); }, Save::Output);
    if (!out.all_finite()) throw std::runtime_error("exp: overflow to non-finite value");
    return out;
}

Tensor tanh(const Tensor& a) {
    return unary_op(OpKind::Tanh, a, [](double x) { return std::tanh(x); }, Save::Output);
}

Tensor relu(const Tensor& a) {
    return unary_op(OpKind::Relu, a, [](double x) { return x > 0.0 ? x : 0.0; }, Save::Output);
}

Tensor scale(const Tensor& a, double c) {
    return unary_op(OpKind::Scale, a, [c](double x) { return c * x; }, Save::Nothing, c);
}

Tensor clamp_max(const Tensor& a, double bound) {
    return unary_op(OpKind::ClampMax, a, [bound](double x) { return std::min(x, bound); },
                    Save::Input, bound);
}

Tensor matmul(const Tensor& a, const Tensor& b) { return matmul(a, b, par::Mode::Parallel); }

Tensor matmul(const Tensor& a, const Tensor& b, par::Mode mode) {
    if (a.ndim() != 2 || (b.ndim() != 2 && b.ndim() != 1))
        throw std::invalid_argument("matmul: expects {m,k}x{k,n} or {m,k}x{k}");
    const std::size_t m = a.shape()[0];
    const std::size_t k = a.shape()[1];
    const bool vec = b.ndim() == 1;
    const std::size_t bk = b.shape()[0];
    const std::size_t n = vec ? 1 : b.shape()[1];
    if (bk != k)
        throw std::invalid_argument("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    Tensor out = vec ? Tensor::zeros({m}) : Tensor::zeros({m, n});
    matmul_kernel(a.data().data(), b.data().data(), out.data().data(), m, k, n, mode);

    if (Tape* tape = result_tape(a, b)) {
        Tape::Node node;
        node.op = OpKind::MatMul;
        node.a = node_id(a);
        node.b = node_id(b);
        node.shape = out.shape();
        node.shape_a = a.shape();
        node.shape_b = b.shape();
        node.saved_a = a.data();
        node.saved_b = b.data();
        tape->bind(out, tape->push_node(std::move(node)));
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.ndim() != 2) throw std::invalid_argument("transpose: expects a 2-d tensor");
    const std::size_t m = a.shape()[0];
    const std::size_t n = a.shape()[1];
    Tensor out = Tensor::zeros({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
    if (a.taped()) {
        Tape::Node node;
        node.op = OpKind::Transpose;
        node.a = a.node();
        node.shape = out.shape();
        node.shape_a = a.shape();
        a.tape()->bind(out, a.tape()->push_node(std::move(node)));
    }
    return out;
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i];
    Tensor out = raw_scalar(acc);
    if (a.taped()) {
        Tape::Node node;
        node.op = OpKind::Sum;
        node.a = a.node();
        node.shape = out.shape();
        node.shape_a = a.shape();
        a.tape()->bind(out, a.tape()->push_node(std::move(node)));
    }
    return out;
}

Tensor norm2(const Tensor& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * a[i];
    const double out_v = std::sqrt(acc);
    Tensor out = raw_scalar(out_v);
    if (a.taped()) {
        Tape::Node node;
        node.op = OpKind::Norm2;
        node.a = a.node();
        node.shape = out.shape();
        node.shape_a = a.shape();
        node.saved_a = a.data();
        node.attr = out_v;
        a.tape()->bind(out, a.tape()->push_node(std::move(node)));
    }
    return out;
}

Tensor diag_part(const Tensor& a) {
    if (a.ndim() != 2 || a.shape()[0] != a.shape()[1])
        throw std::invalid_argument("diag_part: expects a square matrix");
    const std::size_t n = a.shape()[0];
    Tensor out = Tensor::zeros({n});
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i * n + i];
    if (a.taped()) {
        Tape::Node node;
        node.op = OpKind::DiagPart;
        node.a = a.node();
        node.shape = out.shape();
        node.shape_a = a.shape();
        a.tape()->bind(out, a.tape()->push_node(std::move(node)));
    }
    return out;
}

Tensor diag_embed(const Tensor& v) {
    if (v.ndim() != 1) throw std::invalid_argument("diag_embed: expects a vector");
    const std::size_t n = v.shape()[0];
    Tensor out = Tensor::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) out[i * n + i] = v[i];
    if (v.taped()) {
        Tape::Node node;
        node.op = OpKind::DiagEmbed;
        node.a = v.node();
        node.shape = out.shape();
        node.shape_a = v.shape();
        v.tape()->bind(out, v.tape()->push_node(std::move(node)));
    }
    return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::size_t label) {
    if (logits.ndim() != 1)
        throw std::invalid_argument("softmax_cross_entropy: logits must be a vector");
    const std::size_t L = logits.size();
    if (label >= L) throw std::invalid_argument("softmax_cross_entropy: label out of range");

    const double m = *std::max_element(logits.data().begin(), logits.data().end());
    double z = 0.0;
    for (std::size_t i = 0; i < L; ++i) z += std::exp(logits[i] - m);
    const double log_z = std::log(z);
    std::vector<double> probs(L);
    for (std::size_t i = 0; i < L; ++i) probs[i] = std::exp(logits[i] - m) / z;
    Tensor out = raw_scalar(log_z - (logits[label] - m));

    if (logits.taped()) {
        Tape::Node node;
        node.op = OpKind::SoftmaxCrossEntropy;
        node.a = logits.node();
        node.shape = out.shape();
        node.shape_a = logits.shape();
        node.saved_a = std::move(probs);
        node.attr = static_cast<double>(label);
        logits.tape()->bind(out, logits.tape()->push_node(std::move(node)));
    }
    return out;
}

namespace reference {

Tensor matmul_serial(const Tensor& a, const Tensor& b) {
    return matmul(a.detach(), b.detach(), par::Mode::Serial);
}

}  // namespace reference

}  // namespace sodef
