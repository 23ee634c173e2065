#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops behind every tensor operation. Each kernel has a
// scalar reference implementation and, on x86 with AVX2+FMA, a vectorized
// variant selected at runtime. The two are equivalence-tested against each
// other; everything above this layer is backend-agnostic.

namespace ggpp::kernels {

enum class Backend { Scalar, Avx2 };

// Backend chosen at startup from CPU capabilities; override for testing.
Backend active_backend();
void set_backend(Backend b);
bool backend_available(Backend b);
std::string backend_name(Backend b);

// All kernels operate on contiguous double arrays.
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n); // y += alpha*x
void scale(double alpha, double* x, std::size_t n);                 // x *= alpha
void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
double sum(const double* a, std::size_t n);
double max(const double* a, std::size_t n); // n >= 1

// Row-major C[m x n] = A[m x k] * B[k x n]; C must be zeroed by the caller.
void matmul_acc(const double* a, const double* b, double* c,
                std::size_t m, std::size_t k, std::size_t n);

} // namespace ggpp::kernels
