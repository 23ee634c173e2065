#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "ggpp/tensor.hpp"

namespace ggpp {

// Reverse-mode autodiff over a linear tape of primitive ops. One tape per
// forward pass; no graph reuse. backward() may be called repeatedly and
// always produces the same adjoints.
class Tape {
public:
    struct Var {
        std::size_t id = static_cast<std::size_t>(-1);
    };

    Var leaf(Tensor value);

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
    std::size_t size() const { return nodes_.size(); }

    Var matmul(Var a, Var b);
    Var matmul_nt(Var a, Var b); // a * b^T
    Var add(Var a, Var b);
    Var scale(Var x, double alpha);
    Var affine(Var x, double mul, double shift); // elementwise mul*x + shift
    Var softmax_rows(Var x);
    Var layer_norm_rows(Var x, Var gain, Var bias, double eps);
    Var gelu(Var x);
    Var mean_rows(Var x);
    Var mse(Var a, Var b);       // scalar node
    Var cosine(Var a, Var b);    // scalar node
    Var sigmoid(Var x);          // elementwise
    // Adds rows [0, x.rows) of `table` to x; adjoint flows into both.
    Var add_first_rows(Var x, Var table);
    // Stacks equal-length 1-D vars into a [count x n] matrix.
    Var concat_rows(const std::vector<Var>& rows);
    // Scales every row to unit L2 norm.
    Var normalize_rows(Var x);
    // Mean of -log softmax(logits)[i][targets[i]] over rows; scalar node.
    Var cross_entropy(Var logits, const std::vector<std::size_t>& targets);

    // Seeds the scalar loss node with adjoint 1 and sweeps the tape in
    // reverse. Throws ContractError if the loss is not a scalar.
    void backward(Var loss);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&)> back; // null for leaves
    };

    Var push(Tensor value, std::function<void(Tape&)> back);
    Tensor& g(Var v) { return nodes_[v.id].grad; }
    const Tensor& val(Var v) const { return nodes_[v.id].value; }

    std::vector<Node> nodes_;
};

} // namespace ggpp
