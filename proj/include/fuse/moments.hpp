#pragma once

#include <cstdint>
#include <vector>

#include "fuse/core.hpp"

namespace fuse::moments {

// Clipping floor for probabilities and class imbalance; keeps downstream
// log-odds finite.
inline constexpr double kClipEps = 1e-3;

// Empirical mean vector, central covariance matrix and central third-moment
// tensor, population (1/N) normalization.
struct MomentSet {
    std::vector<double> mu;
    Matrix sigma;        // m x m, symmetric
    SymTensor3 tensor3;  // packed symmetric
    std::size_t n_samples = 0;

    std::size_t dim() const { return mu.size(); }
};

struct TensorScale {
    double lambda3 = 0.0;
    bool degenerate = false;  // least-squares denominator vanished
};

// Result of the full moment inversion on one (transformed) score matrix.
struct RankOneFit {
    std::vector<double> u;  // sign-resolved
    double lambda3 = 0.0;
    double b_hat = 0.0;
    bool degenerate_scale = false;
    double residual = 0.0;  // off-diagonal squared error of the rank-one fit
    int iterations = 0;
};

struct VerifierQuality {
    std::vector<double> psi;
    std::vector<double> eta;
    std::vector<double> pi;  // (psi + eta) / 2
    double b_hat = 0.0;
    std::uint32_t clip_count = 0;  // entries that hit the [eps, 1-eps] clamp
};

MomentSet empirical_moments(const Matrix& scores);

// Recover u (up to sign) from the off-diagonal of a symmetric matrix by
// alternating diagonal completion with a power-iteration leading eigenpair.
// Exact on noiseless rank-one input. Throws DegenerateError when every
// off-diagonal entry is zero, ConvergenceError when the outer loop stalls.
std::vector<double> fit_rank_one_sym(const Matrix& sigma, double tol = 1e-8, int max_iter = 200,
                                     double* residual_out = nullptr, int* iters_out = nullptr);

// Orient u so it has strictly more positive than negative entries; ties go
// to the orientation with nonnegative sum.
std::vector<double> resolve_sign(std::vector<double> u);

// Least-squares scale of tensor ~ lambda3 * u (x) u (x) u over distinct-index
// entries.
TensorScale estimate_tensor_scale(const SymTensor3& tensor3, const std::vector<double>& u);

// b = -t / sqrt(4 + t^2), clipped into [-1+eps, 1-eps].
double invert_class_imbalance(double lambda3);

// Sensitivities / specificities from (mu, u, b); entries clipped to
// [eps, 1-eps].
VerifierQuality estimate_quality(const std::vector<double>& mu, const std::vector<double>& u,
                                 double b_hat);

// empirical_moments + rank-one fit + sign + tensor scale + imbalance in one
// pass; the common path for both the pipeline and diagnostics.
RankOneFit fit_moments(const MomentSet& ms);

}  // namespace fuse::moments
