#include "fuse/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "fuse/core.hpp"

namespace fuse::kernels {

namespace {

std::atomic<int> g_backend{-1};  // -1 unresolved, else static_cast<int>(Backend)

Backend resolve() {
    const char* env = std::getenv("FUSE_KERNELS");
    if (env && std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (env && std::strcmp(env, "avx2") == 0) {
        if (!cpu_has_avx2()) throw ConfigError("FUSE_KERNELS=avx2 but CPU lacks AVX2");
        return Backend::avx2;
    }
    if (env && *env && std::strcmp(env, "auto") != 0)
        throw ConfigError(std::string("unknown FUSE_KERNELS value: ") + env);
    return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Backend active_backend() {
    int b = g_backend.load(std::memory_order_relaxed);
    if (b < 0) {
        b = static_cast<int>(resolve());
        g_backend.store(b, std::memory_order_relaxed);
    }
    return static_cast<Backend>(b);
}

void set_backend(Backend b) {
    if (b == Backend::avx2 && !cpu_has_avx2()) throw ConfigError("CPU lacks AVX2");
    g_backend.store(static_cast<int>(b), std::memory_order_relaxed);
}

void reset_backend() { g_backend.store(-1, std::memory_order_relaxed); }

const char* backend_name() {
    return active_backend() == Backend::avx2 ? "avx2" : "scalar";
}

#if defined(__x86_64__) || defined(_M_X64)
#define FUSE_DISPATCH(fn, ...)                            \
    do {                                                  \
        if (active_backend() == Backend::avx2)            \
            detail::fn##_avx2(__VA_ARGS__);               \
        else                                              \
            detail::fn##_scalar(__VA_ARGS__);             \
    } while (0)
#else
#define FUSE_DISPATCH(fn, ...) detail::fn##_scalar(__VA_ARGS__)
#endif

void column_means(const double* data, std::size_t n, std::size_t m, double* mu) {
    FUSE_DISPATCH(column_means, data, n, m, mu);
}

void central_moments(const double* data, std::size_t n, std::size_t m, const double* mu,
                     double* sigma_upper, double* tensor_packed) {
    FUSE_DISPATCH(central_moments, data, n, m, mu, sigma_upper, tensor_packed);
}

void binarize_columns(const double* in, std::size_t n, std::size_t m, const double* tau,
                      double* out) {
    FUSE_DISPATCH(binarize_columns, in, n, m, tau, out);
}

void weighted_gram(const double* x, const double* w, std::size_t n, std::size_t m,
                   double* gram_upper, double* sums) {
    FUSE_DISPATCH(weighted_gram, x, w, n, m, gram_upper, sums);
}

#undef FUSE_DISPATCH

}  // namespace fuse::kernels
