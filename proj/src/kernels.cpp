#include "ggpp/kernels.hpp"

#include "ggpp/errors.hpp"
#include "kernels_internal.hpp"

namespace ggpp::kernels {

namespace {

Backend detect() {
#if GGPP_HAVE_AVX2_BUILD
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return Backend::Avx2;
#endif
    return Backend::Scalar;
}

Backend g_backend = detect();

} // namespace

Backend active_backend() { return g_backend; }

bool backend_available(Backend b) {
    if (b == Backend::Scalar) return true;
#if GGPP_HAVE_AVX2_BUILD
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

void set_backend(Backend b) {
    if (!backend_available(b))
        throw ConfigError("kernel backend not available on this host: " + backend_name(b));
    g_backend = b;
}

std::string backend_name(Backend b) {
    return b == Backend::Avx2 ? "avx2" : "scalar";
}

#if GGPP_HAVE_AVX2_BUILD
#define GGPP_DISPATCH(fn, ...) \
    return g_backend == Backend::Avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__)
#else
#define GGPP_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

double dot(const double* a, const double* b, std::size_t n) { GGPP_DISPATCH(dot, a, b, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { GGPP_DISPATCH(axpy, alpha, x, y, n); }
void scale(double alpha, double* x, std::size_t n) { GGPP_DISPATCH(scale, alpha, x, n); }
void add(const double* a, const double* b, double* out, std::size_t n) { GGPP_DISPATCH(add, a, b, out, n); }
void sub(const double* a, const double* b, double* out, std::size_t n) { GGPP_DISPATCH(sub, a, b, out, n); }
void mul(const double* a, const double* b, double* out, std::size_t n) { GGPP_DISPATCH(mul, a, b, out, n); }
double sum(const double* a, std::size_t n) { GGPP_DISPATCH(sum, a, n); }
double max(const double* a, std::size_t n) { GGPP_DISPATCH(max, a, n); }
void matmul_acc(const double* a, const double* b, double* c,
                std::size_t m, std::size_t k, std::size_t n) {
    GGPP_DISPATCH(matmul_acc, a, b, c, m, k, n);
}

#undef GGPP_DISPATCH

} // namespace ggpp::kernels
