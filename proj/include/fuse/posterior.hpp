#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fuse/core.hpp"
#include "fuse/moments.hpp"

namespace fuse::posterior {

// Per-response posterior correctness estimates averaged over verifier
// triplets.
struct PseudoLabels {
    std::vector<double> p_hat;   // in [0,1]
    std::vector<double> margin;  // 2*p_hat - 1, exactly
    std::size_t n_triplets = 0;
};

// P(y=+1 | three +-1 verdicts) for conditionally independent channels with
// sensitivities psi, specificities eta and class imbalance b. Evaluates the
// unnormalized kernel at y=+1 and y=-1 and normalizes.
double triplet_posterior(const std::array<double, 3>& verdicts, const std::array<double, 3>& psi,
                         const std::array<double, 3>& eta, double b);

// Mean of triplet_posterior over all C(|active|,3) triplets of active
// verifiers, per row. Requires at least 3 active verifiers.
PseudoLabels aggregate_posteriors(const Matrix& binarized, const moments::VerifierQuality& quality,
                                  std::span<const std::uint8_t> active);

}  // namespace fuse::posterior
