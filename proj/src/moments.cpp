#include "fuse/moments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fuse/kernels.hpp"

namespace fuse::moments {

MomentSet empirical_moments(const Matrix& scores) {
    const std::size_t n = scores.rows(), m = scores.cols();
    if (n < 2) throw DataError("empirical_moments needs at least 2 samples");
    MomentSet ms;
    ms.n_samples = n;
    ms.mu.assign(m, 0.0);
    ms.sigma = Matrix(m, m, 0.0);
    ms.tensor3 = SymTensor3(m);

    kernels::column_means(scores.data(), n, m, ms.mu.data());
    kernels::central_moments(scores.data(), n, m, ms.mu.data(), ms.sigma.data(),
                             ms.tensor3.data());

    const double inv = 1.0 / static_cast<double>(n);
    for (double& t : std::span(ms.tensor3.data(), ms.tensor3.size())) t *= inv;
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = j; k < m; ++k) {
            ms.sigma(j, k) *= inv;
            ms.sigma(k, j) = ms.sigma(j, k);
        }
    return ms;
}

namespace {

// Largest-algebraic-eigenvalue pair of a symmetric matrix by power iteration
// on the Gershgorin-shifted matrix (a + cI is PSD, so the iteration cannot
// lock onto a dominant negative eigenvalue). Deterministic start and
// orientation. Returns the Rayleigh quotient of the unshifted matrix.
double leading_eigenpair(const Matrix& a, std::vector<double>& x) {
    const std::size_t m = a.rows();
    double shift = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        double row = 0.0;
        for (std::size_t k = 0; k < m; ++k) row += std::abs(a(j, k));
        shift = std::max(shift, row);
    }
    x.assign(m, 1.0 / std::sqrt(static_cast<double>(m)));
    std::vector<double> y(m);
    for (int it = 0; it < 2000; ++it) {
        for (std::size_t j = 0; j < m; ++j) {
            double s = shift * x[j];
            for (std::size_t k = 0; k < m; ++k) s += a(j, k) * x[k];
            y[j] = s;
        }
        double norm = std::sqrt(std::inner_product(y.begin(), y.end(), y.begin(), 0.0));
        if (norm == 0.0) return 0.0;
        double diff = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            y[j] /= norm;
            diff = std::max(diff, std::abs(y[j] - x[j]));
        }
        x.swap(y);
        if (diff < 1e-15 && it > 2) break;
    }
    // Rayleigh quotient and a deterministic orientation.
    double lambda = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) s += a(j, k) * x[k];
        lambda += x[j] * s;
    }
    std::size_t piv = 0;
    for (std::size_t j = 1; j < m; ++j)
        if (std::abs(x[j]) > std::abs(x[piv])) piv = j;
    if (x[piv] < 0.0)
        for (double& v : x) v = -v;
    return lambda;
}

}  // namespace

std::vector<double> fit_rank_one_sym(const Matrix& sigma, double tol, int max_iter,
                                     double* residual_out, int* iters_out) {
    const std::size_t m = sigma.rows();
    if (m < 3) throw DataError("rank-one fit needs at least 3 verifiers");

    double max_off = 0.0;
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < m; ++k)
            if (j != k) max_off = std::max(max_off, std::abs(sigma(j, k)));
    if (max_off == 0.0) throw DegenerateError("all off-diagonal covariances are zero");

    // Diagonal completion: start from row maxima of |off-diagonal|, then
    // alternate (leading eigenpair, diagonal <- u_j^2) until u stabilizes.
    Matrix work = sigma;
    for (std::size_t j = 0; j < m; ++j) {
        double rmax = 0.0;
        for (std::size_t k = 0; k < m; ++k)
            if (k != j) rmax = std::max(rmax, std::abs(sigma(j, k)));
        work(j, j) = rmax;
    }

    std::vector<double> u(m, 0.0), x;
    int it = 0;
    bool converged = false;
    for (; it < max_iter; ++it) {
        const double lambda = leading_eigenpair(work, x);
        if (lambda <= 0.0)
            throw ConvergenceError("rank-one fit: leading eigenvalue not positive", lambda);
        const double scale = std::sqrt(lambda);
        double delta = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double uj = scale * x[j];
            delta = std::max(delta, std::abs(uj - u[j]));
            u[j] = uj;
            work(j, j) = uj * uj;
        }
        if (delta < tol) converged = true;
        // Once inside the tolerance, spend remaining budget tightening to the
        // fixed point; the linear contraction leaves error ~ delta otherwise.
        if (delta < 1e-13) break;
    }
    if (!converged) throw ConvergenceError("rank-one fit did not converge", tol);

    if (residual_out) {
        double res = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = 0; k < m; ++k)
                if (j != k) {
                    const double e = sigma(j, k) - u[j] * u[k];
                    res += e * e;
                }
        *residual_out = res;
    }
    if (iters_out) *iters_out = it + 1;
    return u;
}

std::vector<double> resolve_sign(std::vector<double> u) {
    std::size_t pos = 0, neg = 0;
    double sum = 0.0, mag = 0.0;
    for (double v : u) {
        if (v > 0.0) ++pos;
        if (v < 0.0) ++neg;
        sum += v;
        mag = std::max(mag, std::abs(v));
    }
    if (mag == 0.0) throw DegenerateError("cannot orient the zero vector");
    const bool flip = neg > pos || (neg == pos && sum < 0.0);
    if (flip)
        for (double& v : u) v = -v;
    return u;
}

TensorScale estimate_tensor_scale(const SymTensor3& tensor3, const std::vector<double>& u) {
    const std::size_t m = u.size();
    if (m < 3) throw DataError("tensor scale needs at least 3 verifiers");
    double num = 0.0, den = 0.0, max_t = 0.0;
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = j + 1; k < m; ++k)
            for (std::size_t l = k + 1; l < m; ++l) {
                const double p = u[j] * u[k] * u[l];
                const double t = tensor3.at_sorted(j, k, l);
                max_t = std::max(max_t, std::abs(t));
                num += t * p;
                den += p * p;
            }
    if (den < 1e-12 || max_t == 0.0) return {0.0, true};
    return {num / den, false};
}

double invert_class_imbalance(double lambda3) {
    const double t = lambda3;
    double b = -t / std::sqrt(4.0 + t * t);
    return std::clamp(b, -1.0 + kClipEps, 1.0 - kClipEps);
}

VerifierQuality estimate_quality(const std::vector<double>& mu, const std::vector<double>& u,
                                 double b_hat) {
    const std::size_t m = mu.size();
    VerifierQuality q;
    q.b_hat = b_hat;
    q.psi.resize(m);
    q.eta.resize(m);
    q.pi.resize(m);
    const double b = std::clamp(b_hat, -1.0 + kClipEps, 1.0 - kClipEps);
    // The eta radical is the reciprocal of the psi one; this is what the
    // conditional-mean identities give, and it is the form the synthetic
    // oracle validates.
    const double r_psi = std::sqrt((1.0 - b) / (1.0 + b));
    const double r_eta = std::sqrt((1.0 + b) / (1.0 - b));
    auto clip = [&q](double v) {
        const double c = std::clamp(v, kClipEps, 1.0 - kClipEps);
        if (c != v) ++q.clip_count;
        return c;
    };
    for (std::size_t j = 0; j < m; ++j) {
        q.psi[j] = clip(0.5 * (1.0 + mu[j] + u[j] * r_psi));
        q.eta[j] = clip(0.5 * (1.0 - mu[j] + u[j] * r_eta));
        q.pi[j] = 0.5 * (q.psi[j] + q.eta[j]);
    }
    return q;
}

RankOneFit fit_moments(const MomentSet& ms) {
    RankOneFit fit;
    fit.u = resolve_sign(
        fit_rank_one_sym(ms.sigma, 1e-8, 200, &fit.residual, &fit.iterations));
    const TensorScale ts = estimate_tensor_scale(ms.tensor3, fit.u);
    fit.lambda3 = ts.lambda3;
    fit.degenerate_scale = ts.degenerate;
    fit.b_hat = invert_class_imbalance(fit.lambda3);
    return fit;
}

}  // namespace fuse::moments
