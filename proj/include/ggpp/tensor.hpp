#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "ggpp/errors.hpp"

namespace ggpp {

// Dense row-major tensor of 64-bit reals. Rank 1 or 2 is all the model
// math needs. Immutable by convention once an op has produced it.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor vec(std::initializer_list<double> values);
    static Tensor mat(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t size() const { return data.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t i) { return data[i]; }
    double at(std::size_t i) const { return data[i]; }
    double& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

    double* row(std::size_t i) { return data.data() + i * cols(); }
    const double* row(std::size_t i) const { return data.data() + i * cols(); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

// --- numeric ops (forward only; see tape.hpp for the differentiable path) ---

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b); // a * b^T
Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
// Row-wise layer norm over a [m x n] tensor with shared gain/bias of length n.
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
Tensor gelu(const Tensor& x);
Tensor mean_rows(const Tensor& x);
double mse(const Tensor& a, const Tensor& b);
double cosine(const Tensor& a, const Tensor& b);
double sigmoid(double x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);
double l2_distance(const Tensor& a, const Tensor& b);

// GELU tanh approximation constants (fixed project-wide).
inline constexpr double kGeluC0 = 0.7978845608;
inline constexpr double kGeluC1 = 0.044715;

double gelu_scalar(double x);
double gelu_grad_scalar(double x);

} // namespace ggpp
