#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fuse/config.hpp"
#include "fuse/core.hpp"
#include "fuse/dataset.hpp"
#include "fuse/diagnostics.hpp"
#include "fuse/moments.hpp"
#include "fuse/posterior.hpp"
#include "fuse/tci.hpp"

namespace fuse::ensemble {

// Logistic ensemble over normalized score columns. Inactive columns carry
// weight exactly zero so the model shape always matches the manifest.
struct EnsembleModel {
    std::vector<double> weights;
    double intercept = 0.0;
    std::vector<std::uint8_t> active;
    bool converged = true;
};

struct SelectionResult {
    std::string query_id;
    std::vector<std::size_t> selected;  // argmax tie set, row indices
    std::vector<double> scores;         // per-row selection scores
    std::optional<std::string> fallback;
};

// Keep verifiers with estimated balanced accuracy above 1/2; when fewer than
// three qualify, keep the top three by pi (ties by column order). Only
// columns in `active` participate.
std::vector<std::uint8_t> drop_verifiers(const moments::VerifierQuality& quality,
                                         std::span<const std::uint8_t> active);

// sum_i (2*p_hat_i - 1) * prediction_i for +-1 hard predictions.
double estimated_accuracy(std::span<const int> predictions, const posterior::PseudoLabels& pseudo);

// Hard +-1 outputs of the model on each row (ties at the decision boundary
// go to +1).
std::vector<int> hard_predictions(const EnsembleModel& model, const Matrix& scores);

// Weighted ridge-logistic surrogate for the estimated-accuracy objective:
// labels sign(2p-1), sample weights |2p-1|, damped Newton to gradient norm
// <= 1e-8. Throws DegenerateError when every margin is zero.
EnsembleModel fit_weighted_logistic(const Matrix& scores, const posterior::PseudoLabels& pseudo,
                                    double reg, std::span<const std::uint8_t> active);

// Penalized surrogate objective value (the quantity the Newton loop
// maximizes); exposed for the optimizer-oracle tests.
double weighted_logistic_objective(const EnsembleModel& model, const Matrix& scores,
                                   const posterior::PseudoLabels& pseudo, double reg);

// Row-wise model probabilities and the argmax tie set. The tie set is formed
// on the linear scores so that sigmoid saturation cannot merge distinct rows.
SelectionResult select(const EnsembleModel& model, const dataset::ScoreBlock& block);

// Algorithm pipeline for one score matrix; see run_fuse for the per-query /
// batched wiring.
struct PipelineResult {
    EnsembleModel model;
    posterior::PseudoLabels pseudo;
    moments::VerifierQuality quality;  // full manifest width
    tci::SearchResult search;
    std::vector<std::uint8_t> kept;
};

PipelineResult run_pipeline(const Matrix& norm_scores, std::span<const std::uint8_t> prior_active,
                            const RunConfig& cfg, BlockDiagnostics* diag = nullptr);

// End-to-end selection for every block. Query mode runs the pipeline per
// block; batched mode estimates once on the concatenation and selects per
// block. Pipeline failures fall back to the naive ensemble (tagged), never
// error.
std::vector<SelectionResult> run_fuse(const dataset::Batch& batch, const RunConfig& cfg,
                                      std::vector<BlockDiagnostics>* diagnostics = nullptr);

}  // namespace fuse::ensemble
