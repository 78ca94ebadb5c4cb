#include "fuse/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <vector>

// AVX2 variants. Four lanes of the scalar per-entry updates; mul+add kept
// unfused to match the scalar reference exactly.

namespace fuse::kernels::detail {

void column_means_avx2(const double* data, std::size_t n, std::size_t m, double* mu) {
    for (std::size_t j = 0; j < m; ++j) mu[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = data + i * m;
        std::size_t j = 0;
        for (; j + 4 <= m; j += 4) {
            __m256d acc = _mm256_loadu_pd(mu + j);
            acc = _mm256_add_pd(acc, _mm256_loadu_pd(row + j));
            _mm256_storeu_pd(mu + j, acc);
        }
        for (; j < m; ++j) mu[j] += row[j];
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < m; ++j) mu[j] *= inv;
}

void central_moments_avx2(const double* data, std::size_t n, std::size_t m, const double* mu,
                          double* sigma_upper, double* tensor_packed) {
    std::vector<double> d(m);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = data + i * m;
        std::size_t j = 0;
        for (; j + 4 <= m; j += 4)
            _mm256_storeu_pd(d.data() + j,
                             _mm256_sub_pd(_mm256_loadu_pd(row + j), _mm256_loadu_pd(mu + j)));
        for (; j < m; ++j) d[j] = row[j] - mu[j];

        double* trun = tensor_packed;
        for (j = 0; j < m; ++j) {
            const double dj = d[j];
            const __m256d djv = _mm256_set1_pd(dj);
            double* srow = sigma_upper + j * m;
            std::size_t k = j;
            for (; k + 4 <= m; k += 4) {
                __m256d acc = _mm256_loadu_pd(srow + k);
                acc = _mm256_add_pd(acc, _mm256_mul_pd(djv, _mm256_loadu_pd(d.data() + k)));
                _mm256_storeu_pd(srow + k, acc);
            }
            for (; k < m; ++k) srow[k] += dj * d[k];

            for (k = j; k < m; ++k) {
                const double c = dj * d[k];
                const __m256d cv = _mm256_set1_pd(c);
                const std::size_t len = m - k;
                const double* dl = d.data() + k;
                std::size_t t = 0;
                for (; t + 4 <= len; t += 4) {
                    __m256d acc = _mm256_loadu_pd(trun + t);
                    acc = _mm256_add_pd(acc, _mm256_mul_pd(cv, _mm256_loadu_pd(dl + t)));
                    _mm256_storeu_pd(trun + t, acc);
                }
                for (; t < len; ++t) trun[t] += c * dl[t];
                trun += len;
            }
        }
    }
}

void binarize_columns_avx2(const double* in, std::size_t n, std::size_t m, const double* tau,
                           double* out) {
    const __m256d pos = _mm256_set1_pd(1.0);
    const __m256d neg = _mm256_set1_pd(-1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = in + i * m;
        double* orow = out + i * m;
        std::size_t j = 0;
        for (; j + 4 <= m; j += 4) {
            __m256d v = _mm256_loadu_pd(row + j);
            __m256d t = _mm256_loadu_pd(tau + j);
            __m256d lt = _mm256_cmp_pd(v, t, _CMP_LT_OQ);
            _mm256_storeu_pd(orow + j, _mm256_blendv_pd(pos, neg, lt));
        }
        for (; j < m; ++j) orow[j] = row[j] < tau[j] ? -1.0 : 1.0;
    }
}

void weighted_gram_avx2(const double* x, const double* w, std::size_t n, std::size_t m,
                        double* gram_upper, double* sums) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x + i * m;
        const double wi = w[i];
        const __m256d wiv = _mm256_set1_pd(wi);
        std::size_t j = 0;
        for (; j + 4 <= m; j += 4) {
            __m256d acc = _mm256_loadu_pd(sums + j);
            acc = _mm256_add_pd(acc, _mm256_mul_pd(wiv, _mm256_loadu_pd(row + j)));
            _mm256_storeu_pd(sums + j, acc);
        }
        for (; j < m; ++j) sums[j] += wi * row[j];

        for (j = 0; j < m; ++j) {
            const double c = wi * row[j];
            const __m256d cv = _mm256_set1_pd(c);
            double* grow = gram_upper + j * m;
            std::size_t k = j;
            for (; k + 4 <= m; k += 4) {
                __m256d acc = _mm256_loadu_pd(grow + k);
                acc = _mm256_add_pd(acc, _mm256_mul_pd(cv, _mm256_loadu_pd(row + k)));
                _mm256_storeu_pd(grow + k, acc);
            }
            for (; k < m; ++k) grow[k] += c * row[k];
        }
    }
}

}  // namespace fuse::kernels::detail

#endif  // x86_64
