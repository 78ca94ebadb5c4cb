#include "fuse/kernels.hpp"

#include <vector>

// Reference kernels. Element-at-a-time, one accumulator update per (entry,
// row) pair streamed over rows; the AVX2 variants replay exactly the same
// update sequence four lanes at a time.

namespace fuse::kernels::detail {

void column_means_scalar(const double* data, std::size_t n, std::size_t m, double* mu) {
    for (std::size_t j = 0; j < m; ++j) mu[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = data + i * m;
        for (std::size_t j = 0; j < m; ++j) mu[j] += row[j];
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < m; ++j) mu[j] *= inv;
}

void central_moments_scalar(const double* data, std::size_t n, std::size_t m, const double* mu,
                            double* sigma_upper, double* tensor_packed) {
    std::vector<double> d(m);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = data + i * m;
        for (std::size_t j = 0; j < m; ++j) d[j] = row[j] - mu[j];

        double* trun = tensor_packed;
        for (std::size_t j = 0; j < m; ++j) {
            const double dj = d[j];
            double* srow = sigma_upper + j * m;
            for (std::size_t k = j; k < m; ++k) srow[k] += dj * d[k];
            for (std::size_t k = j; k < m; ++k) {
                const double c = dj * d[k];
                const std::size_t len = m - k;
                for (std::size_t t = 0; t < len; ++t) trun[t] += c * d[k + t];
                trun += len;
            }
        }
    }
}

void binarize_columns_scalar(const double* in, std::size_t n, std::size_t m, const double* tau,
                             double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = in + i * m;
        double* orow = out + i * m;
        for (std::size_t j = 0; j < m; ++j) orow[j] = row[j] < tau[j] ? -1.0 : 1.0;
    }
}

void weighted_gram_scalar(const double* x, const double* w, std::size_t n, std::size_t m,
                          double* gram_upper, double* sums) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x + i * m;
        const double wi = w[i];
        for (std::size_t j = 0; j < m; ++j) sums[j] += wi * row[j];
        for (std::size_t j = 0; j < m; ++j) {
            const double c = wi * row[j];
            double* grow = gram_upper + j * m;
            for (std::size_t k = j; k < m; ++k) grow[k] += c * row[k];
        }
    }
}

}  // namespace fuse::kernels::detail
