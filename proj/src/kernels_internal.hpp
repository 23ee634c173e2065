#pragma once

#include <cstddef>

// Internal: per-backend kernel entry points used by the dispatcher and by
// the equivalence tests.

namespace ggpp::kernels::scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
double sum(const double* a, std::size_t n);
double max(const double* a, std::size_t n);
void matmul_acc(const double* a, const double* b, double* c,
                std::size_t m, std::size_t k, std::size_t n);
} // namespace ggpp::kernels::scalar

#if defined(__x86_64__) || defined(_M_X64)
#define GGPP_HAVE_AVX2_BUILD 1
namespace ggpp::kernels::avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
double sum(const double* a, std::size_t n);
double max(const double* a, std::size_t n);
void matmul_acc(const double* a, const double* b, double* c,
                std::size_t m, std::size_t k, std::size_t n);
} // namespace ggpp::kernels::avx2
#else
#define GGPP_HAVE_AVX2_BUILD 0
#endif
