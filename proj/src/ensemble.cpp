#include "fuse/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fuse/baselines.hpp"
#include "fuse/kernels.hpp"
#include "parallel.hpp"

namespace fuse::ensemble {

namespace {

// Cholesky solve of an SPD system; a is overwritten with its factor.
void cholesky_solve(Matrix& a, std::vector<double>& b) {
    const std::size_t d = a.rows();
    for (std::size_t j = 0; j < d; ++j) {
        double diag = a(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= a(j, k) * a(j, k);
        if (diag <= 0.0) throw DegenerateError("Newton system not positive definite");
        a(j, j) = std::sqrt(diag);
        for (std::size_t i = j + 1; i < d; ++i) {
            double v = a(i, j);
            for (std::size_t k = 0; k < j; ++k) v -= a(i, k) * a(j, k);
            a(i, j) = v / a(j, j);
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        double v = b[i];
        for (std::size_t k = 0; k < i; ++k) v -= a(i, k) * b[k];
        b[i] = v / a(i, i);
    }
    for (std::size_t ii = d; ii-- > 0;) {
        double v = b[ii];
        for (std::size_t k = ii + 1; k < d; ++k) v -= a(k, ii) * b[k];
        b[ii] = v / a(ii, ii);
    }
}

double log_sigmoid(double z) {
    // log(1/(1+e^-z)) without overflow.
    return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

struct Surrogate {
    Matrix x;                   // n x (a+1), last column is the intercept
    std::vector<double> w;      // |2p-1|
    std::vector<double> y01;    // (sign(2p-1)+1)/2
    double reg = 0.0;
    std::size_t a = 0;

    // Negated penalized log-likelihood (the quantity Newton minimizes).
    double loss(const std::vector<double>& beta) const {
        const std::size_t n = x.rows(), d = a + 1;
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (w[i] == 0.0) continue;
            double z = 0.0;
            const double* row = x.row(i);
            for (std::size_t j = 0; j < d; ++j) z += row[j] * beta[j];
            const double s = y01[i] > 0.5 ? z : -z;
            f -= w[i] * log_sigmoid(s);
        }
        for (std::size_t j = 0; j < a; ++j) f += reg * beta[j] * beta[j];
        return f;
    }

    void gradient(const std::vector<double>& beta, std::vector<double>& g) const {
        const std::size_t n = x.rows(), d = a + 1;
        g.assign(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (w[i] == 0.0) continue;
            double z = 0.0;
            const double* row = x.row(i);
            for (std::size_t j = 0; j < d; ++j) z += row[j] * beta[j];
            const double c = w[i] * (sigmoid(z) - y01[i]);
            for (std::size_t j = 0; j < d; ++j) g[j] += c * row[j];
        }
        for (std::size_t j = 0; j < a; ++j) g[j] += 2.0 * reg * beta[j];
    }
};

}  // namespace

std::vector<std::uint8_t> drop_verifiers(const moments::VerifierQuality& quality,
                                         std::span<const std::uint8_t> active) {
    const std::size_t m = quality.pi.size();
    std::vector<std::uint8_t> keep(m, 0);
    std::vector<std::size_t> act;
    for (std::size_t j = 0; j < m; ++j) {
        if (!active.empty() && !active[j]) continue;
        act.push_back(j);
        if (quality.pi[j] > 0.5) keep[j] = 1;
    }
    const auto kept = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), 1));
    if (kept < 3) {
        // Floor rule: top-3 active by pi, ties resolved by column order.
        std::vector<std::size_t> order = act;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a_, std::size_t b_) {
            return quality.pi[a_] > quality.pi[b_];
        });
        std::fill(keep.begin(), keep.end(), 0);
        for (std::size_t r = 0; r < std::min<std::size_t>(3, order.size()); ++r)
            keep[order[r]] = 1;
    }
    return keep;
}

double estimated_accuracy(std::span<const int> predictions,
                          const posterior::PseudoLabels& pseudo) {
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        acc += pseudo.margin[i] * static_cast<double>(predictions[i]);
    return acc;
}

std::vector<int> hard_predictions(const EnsembleModel& model, const Matrix& scores) {
    std::vector<int> preds(scores.rows());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        double z = model.intercept;
        for (std::size_t j = 0; j < scores.cols(); ++j) z += model.weights[j] * scores(i, j);
        preds[i] = z >= 0.0 ? 1 : -1;
    }
    return preds;
}

EnsembleModel fit_weighted_logistic(const Matrix& scores, const posterior::PseudoLabels& pseudo,
                                    double reg, std::span<const std::uint8_t> active) {
    const std::size_t n = scores.rows(), m = scores.cols();
    std::vector<std::size_t> act;
    for (std::size_t j = 0; j < m; ++j)
        if (active.empty() || active[j]) act.push_back(j);
    const std::size_t a = act.size();

    bool any_margin = false;
    for (double mg : pseudo.margin)
        if (mg != 0.0) any_margin = true;
    if (!any_margin) throw DegenerateError("all pseudo-label margins are zero");

    Surrogate s;
    s.a = a;
    s.reg = reg;
    s.x = Matrix(n, a + 1);
    s.w.resize(n);
    s.y01.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < a; ++c) s.x(i, c) = scores(i, act[c]);
        s.x(i, a) = 1.0;
        s.w[i] = std::abs(pseudo.margin[i]);
        s.y01[i] = pseudo.margin[i] >= 0.0 ? 1.0 : 0.0;
    }

    const std::size_t d = a + 1;
    std::vector<double> beta(d, 0.0), grad(d), step(d), trial(d);
    std::vector<double> hw(n);
    bool converged = false;

    double f = s.loss(beta);
    for (int it = 0; it < 100; ++it) {
        s.gradient(beta, grad);
        double gnorm = 0.0;
        for (double g : grad) gnorm = std::max(gnorm, std::abs(g));
        if (gnorm <= 1e-8) {
            converged = true;
            break;
        }

        // Newton direction from the weighted Gram of the augmented design.
        for (std::size_t i = 0; i < n; ++i) {
            double z = 0.0;
            const double* row = s.x.row(i);
            for (std::size_t j = 0; j < d; ++j) z += row[j] * beta[j];
            const double p = sigmoid(z);
            hw[i] = s.w[i] * p * (1.0 - p);
        }
        Matrix h(d, d, 0.0);
        std::vector<double> unused(d, 0.0);
        kernels::weighted_gram(s.x.data(), hw.data(), n, d, h.data(), unused.data());
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t k = j + 1; k < d; ++k) h(k, j) = h(j, k);
        for (std::size_t j = 0; j < a; ++j) h(j, j) += 2.0 * reg;
        for (std::size_t j = 0; j < d; ++j) h(j, j) += 1e-12;  // jitter for flat rows

        step = grad;
        cholesky_solve(h, step);

        double slope = 0.0;
        for (std::size_t j = 0; j < d; ++j) slope -= grad[j] * step[j];
        double t = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            for (std::size_t j = 0; j < d; ++j) trial[j] = beta[j] - t * step[j];
            const double ft = s.loss(trial);
            if (ft <= f + 1e-4 * t * slope) {
                beta = trial;
                f = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) break;  // stalled; return the best iterate with a warning flag
    }

    EnsembleModel model;
    model.weights.assign(m, 0.0);
    for (std::size_t c = 0; c < a; ++c) model.weights[act[c]] = beta[c];
    model.intercept = beta[a];
    model.active.assign(m, 0);
    for (std::size_t c = 0; c < a; ++c) model.active[act[c]] = 1;
    model.converged = converged;
    return model;
}

double weighted_logistic_objective(const EnsembleModel& model, const Matrix& scores,
                                   const posterior::PseudoLabels& pseudo, double reg) {
    const std::size_t n = scores.rows(), m = scores.cols();
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = std::abs(pseudo.margin[i]);
        if (w == 0.0) continue;
        double z = model.intercept;
        for (std::size_t j = 0; j < m; ++j) z += model.weights[j] * scores(i, j);
        obj += w * log_sigmoid(pseudo.margin[i] >= 0.0 ? z : -z);
    }
    for (std::size_t j = 0; j < m; ++j) obj -= reg * model.weights[j] * model.weights[j];
    return obj;
}

SelectionResult select(const EnsembleModel& model, const dataset::ScoreBlock& block) {
    const Matrix& x = block.norm_scores;
    SelectionResult res;
    res.query_id = block.query_id;
    const std::size_t n = x.rows();
    std::vector<double> linear(n);
    res.scores.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double z = model.intercept;
        for (std::size_t j = 0; j < x.cols(); ++j) z += model.weights[j] * x(i, j);
        linear[i] = z;
        res.scores[i] = sigmoid(z);
    }
    const double best = *std::max_element(linear.begin(), linear.end());
    for (std::size_t i = 0; i < n; ++i)
        if (linear[i] == best) res.selected.push_back(i);
    return res;
}

PipelineResult run_pipeline(const Matrix& norm_scores, std::span<const std::uint8_t> prior_active,
                            const RunConfig& cfg, BlockDiagnostics* diag) {
    PipelineResult out;
    tci::SearchOptions sopt;
    sopt.clip_delta = cfg.clip_delta;
    sopt.max_sweeps = cfg.max_sweeps;
    sopt.index_alt = cfg.flags.tci_index_alt;

    out.search = tci::optimize_thresholds(norm_scores, prior_active, sopt);
    const Matrix binarized = tci::apply_transform(norm_scores, out.search.spec);
    const Matrix vb = tci::compact_active(binarized, out.search.spec.active);

    const moments::MomentSet ms = moments::empirical_moments(vb);
    const moments::RankOneFit fit = moments::fit_moments(ms);
    const moments::VerifierQuality qa = moments::estimate_quality(ms.mu, fit.u, fit.b_hat);

    // Expand the compacted estimates back to manifest width; inactive columns
    // sit at the uninformative point.
    const std::size_t m = norm_scores.cols();
    out.quality.b_hat = qa.b_hat;
    out.quality.clip_count = qa.clip_count;
    out.quality.psi.assign(m, 0.5);
    out.quality.eta.assign(m, 0.5);
    out.quality.pi.assign(m, 0.5);
    std::size_t c = 0;
    for (std::size_t j = 0; j < m; ++j) {
        if (!out.search.spec.active[j]) continue;
        out.quality.psi[j] = qa.psi[c];
        out.quality.eta[j] = qa.eta[c];
        out.quality.pi[j] = qa.pi[c];
        ++c;
    }

    // Assumption check: if no verifier looks better than random, the
    // identification premise is gone and the caller should fall back.
    bool any_good = false;
    for (std::size_t j = 0; j < m; ++j)
        if (out.search.spec.active[j] && out.quality.pi[j] > 0.5) any_good = true;
    if (!any_good) throw DegenerateError("no verifier with estimated balanced accuracy above 1/2");

    out.kept = drop_verifiers(out.quality, out.search.spec.active);
    out.pseudo = posterior::aggregate_posteriors(binarized, out.quality, out.kept);
    out.model = fit_weighted_logistic(norm_scores, out.pseudo, cfg.reg, out.kept);

    if (diag) {
        diag->mu = ms.mu;
        diag->u = fit.u;
        diag->lambda3 = fit.lambda3;
        diag->b_hat = fit.b_hat;
        diag->psi = out.quality.psi;
        diag->eta = out.quality.eta;
        diag->pi = out.quality.pi;
        diag->quality_clip_count = qa.clip_count;
        diag->tci_clip_count = out.search.report.clip_count;
        diag->statistic = out.search.report.statistic;
        diag->sweep_trace = out.search.sweep_trace;
        diag->threshold_fallback = out.search.fallback_median;
        diag->tau = out.search.spec.tau;
        diag->active = out.search.spec.active;
        diag->kept = out.kept;
        diag->p_hat_histogram.assign(10, 0);
        for (double p : out.pseudo.p_hat) {
            auto bin = static_cast<std::size_t>(p * 10.0);
            diag->p_hat_histogram[std::min<std::size_t>(bin, 9)]++;
        }
    }
    return out;
}

namespace {

SelectionResult fallback_selection(const dataset::ScoreBlock& block, const RunConfig& cfg) {
    if (cfg.fallback_policy == "uniform") {
        SelectionResult res;
        res.query_id = block.query_id;
        res.scores.assign(block.n_responses(), 0.0);
        res.selected.resize(block.n_responses());
        std::iota(res.selected.begin(), res.selected.end(), 0);
        res.fallback = "uniform";
        return res;
    }
    SelectionResult res = baselines::naive_ensemble(block);
    res.fallback = "naive-ensemble";
    return res;
}

}  // namespace

std::vector<SelectionResult> run_fuse(const dataset::Batch& batch, const RunConfig& cfg,
                                      std::vector<BlockDiagnostics>* diagnostics) {
    const std::size_t nb = batch.blocks.size();
    std::vector<SelectionResult> results(nb);
    if (diagnostics) diagnostics->assign(nb, {});

    if (cfg.mode == RunConfig::Mode::batched) {
        // One estimation pass on the concatenated matrix, then per-block
        // selection with the shared model.
        bool ok = true;
        EnsembleModel model;
        BlockDiagnostics shared_diag;
        try {
            PipelineResult pr = run_pipeline(batch.concat_view, {}, cfg,
                                             diagnostics ? &shared_diag : nullptr);
            model = pr.model;
        } catch (const Error&) {
            ok = false;
        }
        for (std::size_t b = 0; b < nb; ++b) {
            if (ok) {
                results[b] = select(model, batch.blocks[b]);
            } else {
                results[b] = fallback_selection(batch.blocks[b], cfg);
            }
            if (diagnostics) {
                (*diagnostics)[b] = shared_diag;
                (*diagnostics)[b].query_id = batch.blocks[b].query_id;
                if (!ok) (*diagnostics)[b].fallback = cfg.fallback_policy;
            }
        }
        return results;
    }

    detail::parallel_for(nb, cfg.workers, [&](std::size_t b) {
        const auto& block = batch.blocks[b];
        BlockDiagnostics* diag = diagnostics ? &(*diagnostics)[b] : nullptr;
        if (diag) diag->query_id = block.query_id;
        try {
            PipelineResult pr = run_pipeline(block.norm_scores, block.active, cfg, diag);
            results[b] = select(pr.model, block);
        } catch (const Error&) {
            results[b] = fallback_selection(block, cfg);
            if (diag) diag->fallback = *results[b].fallback;
        }
    });
    return results;
}

}  // namespace fuse::ensemble
