#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fuse/core.hpp"
#include "fuse/dataset.hpp"
#include "fuse/moments.hpp"

namespace fuse::synth {

struct Dependence {
    std::vector<std::vector<std::size_t>> groups;  // disjoint column sets
    double rho = 0.0;                              // per-row shared-redraw probability
};

struct SynthSpec {
    enum class Kind { binary, real };

    std::size_t m = 0;
    std::size_t n = 0;          // responses per query
    std::size_t n_queries = 1;
    double b = 0.0;             // class imbalance
    std::vector<double> psi;
    std::vector<double> eta;
    Kind value_kind = Kind::binary;
    std::vector<double> tau_true;  // real kind only, entries in (-1,1)
    std::optional<Dependence> dependence;
    std::uint64_t seed = 0;

    void validate() const;
};

// Conditionally independent +-1 verdicts: y=+1 with probability (1+b)/2,
// verdict_j agrees with y at rate psi_j (y=+1) or eta_j (y=-1). Labels
// attached. Deterministic in (seed, query, row, column).
dataset::Batch gen_tci_binary(const SynthSpec& spec);

// Latent verdicts as above, then uniform slab scores: (tau_j, 1] when the
// latent verdict is +1 and [-1, tau_j) when -1, so thresholding at tau_true
// reproduces the latents bit-exactly.
dataset::Batch gen_real_valued(const SynthSpec& spec);

// Spec-driven generation including dependence injection on the latent
// verdicts; what the synth subcommand runs.
dataset::Batch generate(const SynthSpec& spec);

// Per row and group: with probability rho replace every group member's
// verdict by one shared redraw from the first member's channel. Labels and
// the per-column channel parameters are needed to draw from the right
// conditional.
Matrix inject_dependence(const Matrix& verdicts, std::span<const int> labels,
                         std::span<const double> psi, std::span<const double> eta,
                         const Dependence& dep, std::uint64_t seed);

// Exact Bayes posterior P(y=+1 | verdict row) under the spec's generative
// model; the reference the posterior module is checked against. Rejects
// specs with dependence.
double oracle_posterior(std::span<const double> verdict_row, const SynthSpec& spec);

// Population moments implied by the spec (no dependence): every entry of mu,
// sigma and the third-order tensor in closed form.
moments::MomentSet analytic_moments(const SynthSpec& spec);

// u_j = sqrt(1-b^2) * (2*pi_j - 1) with the spec's (extended, for real kind)
// balanced accuracies; the ground truth for rank-one recovery tests.
std::vector<double> analytic_u(const SynthSpec& spec);

SynthSpec parse_spec_json(const std::string& text);
dataset::Manifest make_manifest(const SynthSpec& spec, const std::string& dataset_id);

}  // namespace fuse::synth
