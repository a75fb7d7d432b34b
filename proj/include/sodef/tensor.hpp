#pragma once

#include <cstddef>
#include <vector>

#include "sodef/parallel.hpp"

namespace sodef {

class Tape;

/// Dense row-major tensor of doubles, optionally linked to a node on a
/// differentiation tape. Untaped tensors are plain immutable values and may
/// be shared across threads; taped tensors belong to exactly one Tape.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double value);
    /// Validates that every entry is finite; NaN/Inf is a contract violation.
    static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data);
    static Tensor scalar(double value);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::size_t ndim() const { return shape_.size(); }
    /// Rows/cols of a 2-d tensor.
    std::size_t rows() const;
    std::size_t cols() const;

    /// The single entry of a size-1 tensor.
    double value() const;

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double at(std::size_t i, std::size_t j) const;
    double& at(std::size_t i, std::size_t j);

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool all_finite() const;

    bool taped() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    int node() const { return node_; }
    /// Untaped copy of the values.
    Tensor detach() const;

private:
    friend class Tape;
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
    Tape* tape_ = nullptr;
    int node_ = -1;
};

enum class OpKind {
    Leaf,
    Add,
    Sub,
    Mul,
    Neg,
    Abs,
    Exp,
    Tanh,
    Relu,
    Scale,
    MatMul,
    Transpose,
    Sum,
    Norm2,
    DiagPart,
    DiagEmbed,
    ClampMax,
    SoftmaxCrossEntropy,
};

/// Reverse-mode differentiation tape. Nodes are appended in evaluation order,
/// so every node's inputs precede it; backward() walks the list once in
/// reverse. A tape is single-threaded — one tape per training step, one per
/// sample under batch-parallel evaluation.
class Tape {
public:
    /// Op record. `a`/`b` are input node ids (-1 when that operand is an
    /// untaped constant); saved_a/saved_b hold whatever the op's backward
    /// rule needs (inputs, outputs, or softmax probabilities).
    struct Node {
        OpKind op = OpKind::Leaf;
        int a = -1;
        int b = -1;
        std::vector<std::size_t> shape;
        std::vector<std::size_t> shape_a;
        std::vector<std::size_t> shape_b;
        std::vector<double> saved_a;
        std::vector<double> saved_b;
        double attr = 0.0;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Copies `value` onto the tape as a differentiable leaf.
    Tensor leaf(const Tensor& value);

    /// Accumulates gradients of a scalar root into every node reachable from
    /// it. Each node is visited exactly once, in reverse topological order.
    void backward(const Tensor& root);

    /// Gradient of the last backward() root with respect to `t` (zeros if the
    /// root does not depend on it).
    Tensor grad(const Tensor& t) const;

    std::size_t num_nodes() const { return nodes_.size(); }

    // Internal: op implementations record nodes through these.
    int push_node(Node node);
    void bind(Tensor& t, int node_id);

private:
    std::vector<double>& grad_slot(int id);

    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
    bool has_grads_ = false;
};

// Elementwise ops. Binary ops broadcast a size-1 operand against any shape;
// other shape mismatches are errors.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor abs(const Tensor& a);   // subgradient 0 at 0
Tensor exp(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);  // gradient 0 at 0
Tensor scale(const Tensor& a, double c);

/// Matrix product {m,k}x{k,n} -> {m,n}, or matrix-vector {m,k}x{k} -> {m}.
/// Row-parallel OpenMP kernel above a size threshold; mode can force either
/// path (results are identical either way).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b, par::Mode mode);

Tensor transpose(const Tensor& a);
Tensor sum(const Tensor& a);
/// Euclidean norm as a scalar tensor; gradient at the zero vector is 0.
Tensor norm2(const Tensor& a);
Tensor diag_part(const Tensor& a);   // {n,n} -> {n}
Tensor diag_embed(const Tensor& v);  // {n} -> {n,n}
Tensor clamp_max(const Tensor& a, double bound);
/// -log softmax(logits)[label], computed with max-subtraction.
Tensor softmax_cross_entropy(const Tensor& logits, std::size_t label);

namespace reference {
/// Plain triple-loop product kept as the baseline the OpenMP kernel is
/// compared against in tests and the benchmark. Untaped.
Tensor matmul_serial(const Tensor& a, const Tensor& b);
}  // namespace reference

}  // namespace sodef
