#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fuse/config.hpp"
#include "fuse/core.hpp"
#include "fuse/dataset.hpp"
#include "fuse/ensemble.hpp"
#include "fuse/moments.hpp"

namespace fuse::baselines {

using ensemble::SelectionResult;

// Queries whose ground-truth labels are revealed to semi-supervised
// baselines.
struct LabeledSplit {
    std::set<std::string> train_query_ids;
    double fraction = 0.05;
};

// Deterministic split: Fisher-Yates over sorted query ids, first
// ceil(fraction * L) queries (at least one).
LabeledSplit make_split(const dataset::Batch& batch, double fraction, std::uint64_t seed);

// Most common answer-key equivalence class; ties across classes select the
// union. Requires answer keys.
SelectionResult majority_vote(const dataset::ScoreBlock& block);

// Highest mean normalized score.
SelectionResult naive_ensemble(const dataset::ScoreBlock& block);

// First response by response_id order (the pass1_literal selection rule).
SelectionResult first_response(const dataset::ScoreBlock& block);

// Full-tie selection; under tie-broken accuracy this scores exactly the
// random selection rule (Pass@1).
SelectionResult random_rule(const dataset::ScoreBlock& block);

// P(at least one correct among k draws without replacement) given c correct
// out of n: 1 - C(n-c,k)/C(n,k).
double pass_at_k(std::size_t correct, std::size_t total, std::size_t k);

std::vector<SelectionResult> naive_bayes(const dataset::Batch& batch, const LabeledSplit& split);

std::vector<SelectionResult> supervised_logistic(const dataset::Batch& batch,
                                                 const LabeledSplit& split, double reg);

struct EmTrace {
    std::vector<double> log_likelihood;
    bool diagonal_fallback = false;  // gmm only: covariance went singular
    // dawid_skene only: fitted confusion parameters after sign anchoring.
    std::vector<double> psi;
    std::vector<double> eta;
    double prior = 0.5;
};

std::vector<SelectionResult> dawid_skene(const dataset::Batch& batch, EmTrace* trace = nullptr);

std::vector<SelectionResult> gmm_em(const dataset::Batch& batch, EmTrace* trace = nullptr);

// Per-row MLE ensemble scores from binarized verdicts under joint conditional
// independence. Coefficients come from the two-hypothesis log-likelihood
// ratio; `printed_form` switches to the published coefficient form.
std::vector<double> jci_mle_scores(const Matrix& binarized, const moments::VerifierQuality& quality,
                                   std::span<const std::uint8_t> active, bool printed_form = false);

// Threshold search + moment estimation as in the main pipeline, then MLE
// selection instead of pseudo-label ensembling.
std::vector<SelectionResult> jci_pipeline(const dataset::Batch& batch, const RunConfig& cfg);

// Median-binarized majority-vote-equivalent: uniform verifier quality plugged
// into the MLE rule.
std::vector<SelectionResult> jci_uninformative(const dataset::Batch& batch);

// Oracle: single verifier with the highest ground-truth balanced accuracy
// (median-binarized, over the whole batch); selects by its normalized score.
std::vector<SelectionResult> oracle_best_verifier(const dataset::Batch& batch);

// Median binarization used by the unsupervised EM baselines and naive Bayes:
// +1 for scores at or above the per-column block median.
Matrix median_binarize(const Matrix& scores);

// Stable method ids for the CLI --methods flag.
const std::vector<std::string>& method_ids();
bool is_method(const std::string& id);

// Dispatch a registered method over the batch. Methods whose prerequisites
// are missing throw UnavailableError.
std::vector<SelectionResult> run_method(const std::string& id, const dataset::Batch& batch,
                                        const RunConfig& cfg);

}  // namespace fuse::baselines
