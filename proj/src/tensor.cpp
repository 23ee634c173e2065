#include "ggpp/tensor.hpp"

#include <cmath>

#include "ggpp/kernels.hpp"

namespace ggpp {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
    std::size_t p = 1;
    for (auto d : shape) p *= d;
    return p;
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (product(shape) != data.size())
        throw DimensionError("tensor shape does not match data length");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    std::size_t n = product(shape);
    return Tensor{std::move(shape), std::vector<double>(n, 0.0)};
}

Tensor Tensor::vec(std::initializer_list<double> values) {
    return Tensor{{values.size()}, std::vector<double>(values)};
}

Tensor Tensor::mat(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t m = rows.size();
    std::size_t n = m ? rows.begin()->size() : 0;
    std::vector<double> d;
    d.reserve(m * n);
    for (const auto& r : rows) {
        if (r.size() != n) throw DimensionError("ragged initializer");
        d.insert(d.end(), r.begin(), r.end());
    }
    return Tensor{{m, n}, std::move(d)};
}

std::size_t Tensor::rows() const {
    if (shape.size() != 2) throw DimensionError("rows() on non-matrix tensor");
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (shape.size() == 2) return shape[1];
    if (shape.size() == 1) return shape[0];
    throw DimensionError("cols() on tensor of rank > 2");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
        throw DimensionError("matmul: inner dimensions disagree");
    Tensor c = Tensor::zeros({a.shape[0], b.shape[1]});
    kernels::matmul_acc(a.data.data(), b.data.data(), c.data.data(),
                        a.shape[0], a.shape[1], b.shape[1]);
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[1])
        throw DimensionError("matmul_nt: inner dimensions disagree");
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[0];
    Tensor c = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            c.at(i, j) = kernels::dot(a.row(i), b.row(j), k);
    return c;
}

Tensor softmax_rows(const Tensor& x) {
    if (x.shape.size() != 2) throw DimensionError("softmax_rows: matrix expected");
    const std::size_t m = x.shape[0], n = x.shape[1];
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* xr = x.row(i);
        double* yr = out.row(i);
        const double mx = kernels::max(xr, n);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            z += yr[j];
        }
        kernels::scale(1.0 / z, yr, n);
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (x.shape.size() != 1) throw DimensionError("layer_norm: vector expected");
    if (!x.same_shape(gain) || !x.same_shape(bias))
        throw DimensionError("layer_norm: gain/bias shape mismatch");
    if (eps <= 0.0) throw ContractError("layer_norm: eps must be positive");
    const std::size_t n = x.size();
    if (n == 0) throw DimensionError("layer_norm: empty input");
    const double mean = kernels::sum(x.data.data(), n) / static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x.data[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    Tensor out = Tensor::zeros({n});
    for (std::size_t i = 0; i < n; ++i)
        out.data[i] = (x.data[i] - mean) * inv * gain.data[i] + bias.data[i];
    return out;
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (x.shape.size() != 2) throw DimensionError("layer_norm_rows: matrix expected");
    const std::size_t m = x.shape[0], n = x.shape[1];
    if (gain.size() != n || bias.size() != n)
        throw DimensionError("layer_norm_rows: gain/bias length mismatch");
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        Tensor row{{n}, std::vector<double>(x.row(i), x.row(i) + n)};
        Tensor nr = layer_norm(row, gain, bias, eps);
        std::copy(nr.data.begin(), nr.data.end(), out.row(i));
    }
    return out;
}

double gelu_scalar(double x) {
    const double u = kGeluC0 * (x + kGeluC1 * x * x * x);
    return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad_scalar(double x) {
    const double u = kGeluC0 * (x + kGeluC1 * x * x * x);
    const double t = std::tanh(u);
    const double du = kGeluC0 * (1.0 + 3.0 * kGeluC1 * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

Tensor gelu(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.data) v = gelu_scalar(v);
    return out;
}

Tensor mean_rows(const Tensor& x) {
    if (x.shape.size() != 2 || x.shape[0] == 0)
        throw DimensionError("mean_rows: non-empty matrix expected");
    const std::size_t m = x.shape[0], n = x.shape[1];
    Tensor out = Tensor::zeros({n});
    for (std::size_t i = 0; i < m; ++i)
        kernels::axpy(1.0, x.row(i), out.data.data(), n);
    kernels::scale(1.0 / static_cast<double>(m), out.data.data(), n);
    return out;
}

double mse(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimensionError("mse: shape mismatch");
    const std::size_t n = a.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(n);
}

double cosine(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimensionError("cosine: shape mismatch");
    const double na = norm2(a);
    const double nb = norm2(b);
    if (na == 0.0 || nb == 0.0)
        throw DegenerateVectorError("cosine: zero-norm input");
    return kernels::dot(a.data.data(), b.data.data(), a.size()) / (na * nb);
}

double sigmoid(double x) {
    // Split form keeps exp() argument non-positive, so no overflow.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimensionError("add: shape mismatch");
    Tensor out = Tensor::zeros(a.shape);
    kernels::add(a.data.data(), b.data.data(), out.data.data(), a.size());
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimensionError("sub: shape mismatch");
    Tensor out = Tensor::zeros(a.shape);
    kernels::sub(a.data.data(), b.data.data(), out.data.data(), a.size());
    return out;
}

double norm2(const Tensor& a) {
    return std::sqrt(kernels::dot(a.data.data(), a.data.data(), a.size()));
}

double l2_distance(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw DimensionError("l2_distance: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

} // namespace ggpp
