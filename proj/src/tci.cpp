#include "fuse/tci.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fuse/kernels.hpp"

namespace fuse::tci {

namespace {

double clip_denom(double s, double delta, std::size_t& clip_count) {
    if (std::abs(s) < delta) {
        ++clip_count;
        return s < 0.0 ? -delta : delta;  // sign-preserving; sign(0) treated as +
    }
    return s;
}

double population_variance(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return var / static_cast<double>(xs.size());
}

// Nearest-rank empirical quantile of a sorted column.
double sorted_quantile(const std::vector<double>& sorted, double p) {
    const auto idx = static_cast<std::size_t>(
        std::llround(p * static_cast<double>(sorted.size() - 1)));
    return sorted[std::min(idx, sorted.size() - 1)];
}

}  // namespace

TciReport tci_statistic(const moments::MomentSet& ms, double clip_delta, bool index_alt) {
    const std::size_t m = ms.dim();
    if (m < 3) throw DataError("TCI statistic needs at least 3 verifiers");
    TciReport rep;
    std::vector<double> ratios;
    if (!index_alt) {
        for (std::size_t j3 = 2; j3 < m; ++j3) {
            ratios.clear();
            for (std::size_t j1 = 0; j1 < j3; ++j1)
                for (std::size_t j2 = j1 + 1; j2 < j3; ++j2)
                    ratios.push_back(ms.tensor3(j1, j2, j3) /
                                     clip_denom(ms.sigma(j1, j2), clip_delta, rep.clip_count));
            rep.per_j3_variance.push_back(population_variance(ratios));
        }
    } else {
        for (std::size_t j3 = 0; j3 < m; ++j3) {
            ratios.clear();
            for (std::size_t j1 = 0; j1 < m; ++j1) {
                if (j1 == j3) continue;
                for (std::size_t j2 = j1 + 1; j2 < m; ++j2) {
                    if (j2 == j3) continue;
                    ratios.push_back(ms.tensor3(j1, j2, j3) /
                                     clip_denom(ms.sigma(j1, j2), clip_delta, rep.clip_count));
                }
            }
            rep.per_j3_variance.push_back(population_variance(ratios));
        }
    }
    rep.statistic = 0.0;
    for (double v : rep.per_j3_variance) rep.statistic += v;
    return rep;
}

namespace {

// Quantile value shifted into the open gap between distinct data values.
double midpoint_shift(const std::vector<double>& distinct, double v) {
    auto it = std::lower_bound(distinct.begin(), distinct.end(), v);
    // v is always a data value, so *it == v.
    if (it + 1 != distinct.end()) return 0.5 * (*it + *(it + 1));
    return 0.5 * (*(it - 1) + *it);  // top value: shift down instead
}

}  // namespace

std::vector<double> threshold_candidates(std::span<const double> column) {
    std::vector<double> sorted(column.begin(), column.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> distinct = sorted;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) return {};

    std::vector<double> cands;
    for (int k = 1; k <= 19; ++k)
        cands.push_back(midpoint_shift(distinct, sorted_quantile(sorted, 0.05 * k)));
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    return cands;
}

Matrix compact_active(const Matrix& scores, std::span<const std::uint8_t> active) {
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < active.size(); ++j)
        if (active[j]) cols.push_back(j);
    Matrix out(scores.rows(), cols.size());
    for (std::size_t i = 0; i < scores.rows(); ++i)
        for (std::size_t c = 0; c < cols.size(); ++c) out(i, c) = scores(i, cols[c]);
    return out;
}

Matrix apply_transform(const Matrix& scores, const TransformSpec& spec) {
    const std::size_t n = scores.rows(), m = scores.cols();
    std::vector<double> tau_eff(m);
    for (std::size_t j = 0; j < m; ++j)
        tau_eff[j] = spec.active[j] ? spec.tau[j] : -std::numeric_limits<double>::infinity();
    Matrix out(n, m);
    kernels::binarize_columns(scores.data(), n, m, tau_eff.data(), out.data());
    return out;
}

SearchResult optimize_thresholds(const Matrix& scores, std::span<const std::uint8_t> prior_active,
                                 const SearchOptions& opt) {
    const std::size_t n = scores.rows(), m = scores.cols();
    SearchResult res;
    res.spec.tau.assign(m, 0.0);
    res.spec.active.assign(m, 1);

    std::vector<std::vector<double>> cands(m);
    std::vector<double> median_start(m, 0.0);
    std::vector<double> col(n);
    std::vector<std::string> dropped;
    for (std::size_t j = 0; j < m; ++j) {
        if (!prior_active.empty() && !prior_active[j]) {
            res.spec.active[j] = 0;
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) col[i] = scores(i, j);
        cands[j] = threshold_candidates(col);
        if (cands[j].empty()) {
            res.spec.active[j] = 0;
            dropped.push_back("column " + std::to_string(j));
        } else {
            // Median start: the candidate derived from the 50% quantile, so
            // the current threshold is always inside the candidate grid.
            std::vector<double> sorted = col;
            std::sort(sorted.begin(), sorted.end());
            std::vector<double> distinct = sorted;
            distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
            median_start[j] = midpoint_shift(distinct, sorted_quantile(sorted, 0.5));
            res.spec.tau[j] = median_start[j];
        }
    }

    std::vector<std::size_t> act;
    for (std::size_t j = 0; j < m; ++j)
        if (res.spec.active[j]) act.push_back(j);
    if (act.size() < 3) {
        std::string msg = "fewer than 3 active verifiers for threshold search";
        if (!dropped.empty()) {
            msg += "; deactivated:";
            for (const auto& d : dropped) msg += " " + d;
        }
        throw DataError(msg);
    }

    const std::size_t a = act.size();
    auto evaluate = [&](const Matrix& binarized_active) {
        return tci_statistic(moments::empirical_moments(binarized_active), opt.clip_delta,
                             opt.index_alt);
    };

    // Working matrix holds the active columns binarized at the current taus.
    Matrix vb(n, a);
    auto rebin_column = [&](std::size_t c, double tau) {
        const std::size_t j = act[c];
        for (std::size_t i = 0; i < n; ++i) vb(i, c) = scores(i, j) < tau ? -1.0 : 1.0;
    };
    for (std::size_t c = 0; c < a; ++c) rebin_column(c, res.spec.tau[act[c]]);

    if (a < 4) {
        // With three verifiers every pair collection is a singleton, so the
        // statistic is identically zero and the search is vacuous; keep the
        // medians and flag the fallback.
        res.fallback_median = true;
        res.report = evaluate(vb);
        res.sweep_trace.push_back(res.report.statistic);
        return res;
    }

    double current = evaluate(vb).statistic;
    res.sweep_trace.push_back(current);
    for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
        bool changed = false;
        for (std::size_t c = 0; c < a; ++c) {
            const std::size_t j = act[c];
            const auto& cj = cands[j];
            const double median_tau = median_start[j];
            double best_stat = std::numeric_limits<double>::infinity();
            double best_dist = 0.0;
            std::size_t best_idx = 0;
            for (std::size_t ci = 0; ci < cj.size(); ++ci) {
                rebin_column(c, cj[ci]);
                const double s = evaluate(vb).statistic;
                const double dist = std::abs(cj[ci] - median_tau);
                if (s < best_stat || (s == best_stat && dist < best_dist)) {
                    best_stat = s;
                    best_dist = dist;
                    best_idx = ci;
                }
            }
            if (cj[best_idx] != res.spec.tau[j]) {
                res.spec.tau[j] = cj[best_idx];
                changed = true;
            }
            rebin_column(c, res.spec.tau[j]);
            current = best_stat;
        }
        res.sweep_trace.push_back(current);
        if (!changed) break;
    }

    res.report = evaluate(vb);
    return res;
}

}  // namespace fuse::tci
