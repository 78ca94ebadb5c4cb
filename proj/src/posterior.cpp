#include "fuse/posterior.hpp"

namespace fuse::posterior {

namespace {

// Unnormalized posterior kernel: (1+by) * prod_l [1 - y*v + v*((1+y)psi - (1-y)eta)].
double kernel(int y, const std::array<double, 3>& v, const std::array<double, 3>& psi,
              const std::array<double, 3>& eta, double b) {
    const double yd = static_cast<double>(y);
    double k = 1.0 + b * yd;
    for (int l = 0; l < 3; ++l)
        k *= 1.0 - yd * v[l] + v[l] * ((1.0 + yd) * psi[l] - (1.0 - yd) * eta[l]);
    return k;
}

}  // namespace

double triplet_posterior(const std::array<double, 3>& verdicts, const std::array<double, 3>& psi,
                         const std::array<double, 3>& eta, double b) {
    const double kp = kernel(+1, verdicts, psi, eta, b);
    const double km = kernel(-1, verdicts, psi, eta, b);
    return kp / (kp + km);
}

PseudoLabels aggregate_posteriors(const Matrix& binarized, const moments::VerifierQuality& quality,
                                  std::span<const std::uint8_t> active) {
    std::vector<std::size_t> act;
    for (std::size_t j = 0; j < active.size(); ++j)
        if (active[j]) act.push_back(j);
    if (act.size() < 3) throw DataError("posterior aggregation needs at least 3 active verifiers");

    const std::size_t n = binarized.rows(), a = act.size();
    PseudoLabels pl;
    pl.p_hat.assign(n, 0.0);
    pl.margin.assign(n, 0.0);
    pl.n_triplets = a * (a - 1) * (a - 2) / 6;

    for (std::size_t i = 0; i < n; ++i) {
        const double* row = binarized.row(i);
        double sum = 0.0;
        for (std::size_t t1 = 0; t1 < a; ++t1)
            for (std::size_t t2 = t1 + 1; t2 < a; ++t2)
                for (std::size_t t3 = t2 + 1; t3 < a; ++t3) {
                    const std::size_t j1 = act[t1], j2 = act[t2], j3 = act[t3];
                    sum += triplet_posterior(
                        {row[j1], row[j2], row[j3]},
                        {quality.psi[j1], quality.psi[j2], quality.psi[j3]},
                        {quality.eta[j1], quality.eta[j2], quality.eta[j3]}, quality.b_hat);
                }
        pl.p_hat[i] = sum / static_cast<double>(pl.n_triplets);
        pl.margin[i] = 2.0 * pl.p_hat[i] - 1.0;
    }
    return pl;
}

}  // namespace fuse::posterior
