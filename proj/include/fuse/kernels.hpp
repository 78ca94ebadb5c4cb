#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops behind the moment and ensemble math. Each kernel
// has a scalar reference implementation and an AVX2 variant selected at
// runtime. Both variants update per-entry accumulators in the same row order
// with plain mul+add (no FMA contraction), so their results are bit-identical;
// the equivalence tests assert exact equality.
//
// Backend selection: FUSE_KERNELS=scalar|avx2|auto (default auto), or
// set_backend() from code. AVX2 is only used when the CPU reports support.

namespace fuse::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
void set_backend(Backend b);
void reset_backend();  // re-read environment / CPU detection
const char* backend_name();
bool cpu_has_avx2();

// mu[j] = (1/n) * sum_i data[i*m + j]
void column_means(const double* data, std::size_t n, std::size_t m, double* mu);

// Centered second and third moment accumulation with population (1/n)
// normalization applied by the caller:
//   sigma[j*m + k]     += sum_i d_ij * d_ik          for j <= k
//   tensor[run(j,k)+.] += sum_i d_ij * d_ik * d_il   for j <= k <= l
// where d_ij = data[i*m+j] - mu[j]. `sigma` is a dense m*m buffer of which
// only the upper triangle is written; `tensor` uses the SymTensor3 packed
// layout. Both buffers must be zeroed by the caller.
void central_moments(const double* data, std::size_t n, std::size_t m, const double* mu,
                     double* sigma_upper, double* tensor_packed);

// out[i*m+j] = +1 if in > tau[j], -1 if in < tau[j], +1 on ties.
void binarize_columns(const double* in, std::size_t n, std::size_t m, const double* tau,
                      double* out);

// Weighted Gram accumulation (upper triangle) plus weighted column sums:
//   gram[j*m + k] += sum_i w_i * x_ij * x_ik   for j <= k
//   sums[j]       += sum_i w_i * x_ij
// Buffers must be zeroed by the caller.
void weighted_gram(const double* x, const double* w, std::size_t n, std::size_t m,
                   double* gram_upper, double* sums);

namespace detail {
void column_means_scalar(const double*, std::size_t, std::size_t, double*);
void central_moments_scalar(const double*, std::size_t, std::size_t, const double*, double*,
                            double*);
void binarize_columns_scalar(const double*, std::size_t, std::size_t, const double*, double*);
void weighted_gram_scalar(const double*, const double*, std::size_t, std::size_t, double*,
                          double*);
#if defined(__x86_64__) || defined(_M_X64)
void column_means_avx2(const double*, std::size_t, std::size_t, double*);
void central_moments_avx2(const double*, std::size_t, std::size_t, const double*, double*,
                          double*);
void binarize_columns_avx2(const double*, std::size_t, std::size_t, const double*, double*);
void weighted_gram_avx2(const double*, const double*, std::size_t, std::size_t, double*, double*);
#endif
}  // namespace detail

}  // namespace fuse::kernels
