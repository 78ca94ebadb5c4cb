#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fuse/core.hpp"
#include "fuse/moments.hpp"

namespace fuse::tci {

// Per-verifier binarization thresholds (normalized-score units) plus the
// active-verifier mask. Inactive columns are excluded from every moment
// computation and emitted as +1 by apply_transform.
struct TransformSpec {
    std::vector<double> tau;
    std::vector<std::uint8_t> active;
};

struct TciReport {
    double statistic = 0.0;
    std::vector<double> per_j3_variance;
    std::size_t clip_count = 0;  // denominators clipped in magnitude
};

struct SearchOptions {
    double clip_delta = 1e-3;
    int max_sweeps = 10;
    bool index_alt = false;  // alternative pair indexing: all pairs excluding j3
};

// Sum over j3 of the variance of { T[j1,j2,j3] / clip(Sigma[j1,j2]) } over
// pairs j1 < j2 < j3 (population variance; singleton collections contribute
// zero). Denominators are clipped in magnitude, sign preserved. Requires
// m >= 3.
TciReport tci_statistic(const moments::MomentSet& ms, double clip_delta, bool index_alt = false);

// Candidate thresholds for one column: the 19 empirical quantiles at
// 5%,...,95%, deduplicated and shifted to midpoints between adjacent distinct
// values. Empty for constant columns (verifier deactivated for the block).
std::vector<double> threshold_candidates(std::span<const double> column);

struct SearchResult {
    TransformSpec spec;
    TciReport report;           // at the returned thresholds
    bool fallback_median = false;  // fewer than 4 active verifiers
    std::vector<double> sweep_trace;  // statistic after init and each sweep
};

// Round-robin coordinate descent over per-column candidate grids starting
// from the median candidates; stops when a sweep changes nothing or after
// max_sweeps. `prior_active` masks columns that are already excluded (e.g.
// constant under global normalization); pass empty to consider all.
SearchResult optimize_thresholds(const Matrix& scores,
                                 std::span<const std::uint8_t> prior_active = {},
                                 const SearchOptions& opt = {});

// Elementwise sign(v - tau): +1 on ties; inactive columns come out all +1.
Matrix apply_transform(const Matrix& scores, const TransformSpec& spec);

// Copy of the active columns only, in manifest order.
Matrix compact_active(const Matrix& scores, std::span<const std::uint8_t> active);

}  // namespace fuse::tci
