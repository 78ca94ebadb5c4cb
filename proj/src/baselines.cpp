#include "fuse/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "fuse/posterior.hpp"
#include "fuse/tci.hpp"
#include "parallel.hpp"

namespace fuse::baselines {

namespace {

SelectionResult argmax_tie_set(const dataset::ScoreBlock& block, std::vector<double> scores) {
    SelectionResult res;
    res.query_id = block.query_id;
    const double best = *std::max_element(scores.begin(), scores.end());
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (scores[i] == best) res.selected.push_back(i);
    res.scores = std::move(scores);
    return res;
}

double sorted_median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto idx =
        static_cast<std::size_t>(std::llround(0.5 * static_cast<double>(v.size() - 1)));
    return v[idx];
}

std::vector<double> naive_row_means(const dataset::ScoreBlock& block) {
    const std::size_t n = block.n_responses(), m = block.norm_scores.cols();
    std::vector<double> means(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += block.norm_scores(i, j);
        means[i] = s / static_cast<double>(m);
    }
    return means;
}

double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

}  // namespace

LabeledSplit make_split(const dataset::Batch& batch, double fraction, std::uint64_t seed) {
    std::vector<std::string> ids;
    ids.reserve(batch.blocks.size());
    for (const auto& b : batch.blocks) ids.push_back(b.query_id);
    std::sort(ids.begin(), ids.end());
    constexpr std::uint64_t kSplitTag = 0x73706c6974ULL;
    for (std::size_t i = ids.size(); i-- > 1;) {
        const std::size_t j = rng::hash3(seed, kSplitTag, i) % (i + 1);
        std::swap(ids[i], ids[j]);
    }
    LabeledSplit split;
    split.fraction = fraction;
    const auto want = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ids.size()))));
    for (std::size_t i = 0; i < std::min(want, ids.size()); ++i)
        split.train_query_ids.insert(ids[i]);
    return split;
}

SelectionResult majority_vote(const dataset::ScoreBlock& block) {
    if (!block.has_answer_keys())
        throw UnavailableError("majority vote needs answer keys (query " + block.query_id + ")");
    std::map<std::string, std::size_t> counts;
    for (const auto& k : block.answer_keys) ++counts[k];
    std::size_t best = 0;
    for (const auto& [k, c] : counts) best = std::max(best, c);
    SelectionResult res;
    res.query_id = block.query_id;
    res.scores.resize(block.n_responses());
    for (std::size_t i = 0; i < block.n_responses(); ++i) {
        const std::size_t c = counts[block.answer_keys[i]];
        res.scores[i] = static_cast<double>(c);
        if (c == best) res.selected.push_back(i);
    }
    return res;
}

SelectionResult naive_ensemble(const dataset::ScoreBlock& block) {
    return argmax_tie_set(block, naive_row_means(block));
}

SelectionResult first_response(const dataset::ScoreBlock& block) {
    SelectionResult res;
    res.query_id = block.query_id;
    res.selected = {0};
    res.scores.assign(block.n_responses(), 0.0);
    res.scores[0] = 1.0;
    return res;
}

SelectionResult random_rule(const dataset::ScoreBlock& block) {
    SelectionResult res;
    res.query_id = block.query_id;
    res.selected.resize(block.n_responses());
    std::iota(res.selected.begin(), res.selected.end(), 0);
    res.scores.assign(block.n_responses(), 0.0);
    return res;
}

double pass_at_k(std::size_t correct, std::size_t total, std::size_t k) {
    if (k < 1 || k > total) throw DataError("pass@k needs 1 <= k <= N");
    if (correct > total) throw DataError("pass@k needs c <= N");
    if (total - correct < k) return 1.0;  // every k-subset hits a correct response
    double miss = 1.0;
    for (std::size_t i = 0; i < k; ++i)
        miss *= static_cast<double>(total - correct - i) / static_cast<double>(total - i);
    return 1.0 - miss;
}

Matrix median_binarize(const Matrix& scores) {
    const std::size_t n = scores.rows(), m = scores.cols();
    Matrix out(n, m);
    std::vector<double> col(n);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = scores(i, j);
        std::vector<double> distinct = col;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.size() < 2) {
            for (std::size_t i = 0; i < n; ++i) out(i, j) = 1.0;  // constant: uninformative
            continue;
        }
        // Threshold in the open gap below the median value, so the top half
        // maps to +1 and discrete columns survive intact.
        const double med = sorted_median(col);
        const auto it = std::lower_bound(distinct.begin(), distinct.end(), med);
        const double tau = it == distinct.begin() ? 0.5 * (*it + *(it + 1))
                                                  : 0.5 * (*(it - 1) + *it);
        for (std::size_t i = 0; i < n; ++i) out(i, j) = scores(i, j) < tau ? -1.0 : 1.0;
    }
    return out;
}

std::vector<SelectionResult> naive_bayes(const dataset::Batch& batch, const LabeledSplit& split) {
    const std::size_t m = batch.manifest.n_verifiers();
    std::vector<Matrix> verdicts(batch.blocks.size());
    for (std::size_t b = 0; b < batch.blocks.size(); ++b)
        verdicts[b] = median_binarize(batch.blocks[b].norm_scores);

    // Conditional verdict counts with add-one smoothing over train queries.
    double n_pos = 0.0, n_neg = 0.0;
    std::vector<double> pos_plus(m, 0.0), neg_plus(m, 0.0);
    bool any_train = false;
    for (std::size_t b = 0; b < batch.blocks.size(); ++b) {
        const auto& blk = batch.blocks[b];
        if (!split.train_query_ids.contains(blk.query_id)) continue;
        if (!blk.has_labels())
            throw UnavailableError("train query " + blk.query_id + " has no labels");
        any_train = true;
        for (std::size_t i = 0; i < blk.n_responses(); ++i) {
            const bool pos = blk.labels[i] > 0;
            (pos ? n_pos : n_neg) += 1.0;
            for (std::size_t j = 0; j < m; ++j)
                if (verdicts[b](i, j) > 0.0) (pos ? pos_plus[j] : neg_plus[j]) += 1.0;
        }
    }
    if (!any_train) throw UnavailableError("naive Bayes has no labeled train queries");

    std::vector<double> lp_plus(m), lp_minus(m);  // log P(v=+1|y) ratios per class
    for (std::size_t j = 0; j < m; ++j) {
        const double p1 = (pos_plus[j] + 1.0) / (n_pos + 2.0);
        const double p0 = (neg_plus[j] + 1.0) / (n_neg + 2.0);
        lp_plus[j] = std::log(p1) - std::log(p0);
        lp_minus[j] = std::log(1.0 - p1) - std::log(1.0 - p0);
    }
    const double prior = std::log(n_pos + 1.0) - std::log(n_neg + 1.0);

    std::vector<SelectionResult> out(batch.blocks.size());
    for (std::size_t b = 0; b < batch.blocks.size(); ++b) {
        const auto& blk = batch.blocks[b];
        std::vector<double> score(blk.n_responses(), prior);
        for (std::size_t i = 0; i < blk.n_responses(); ++i)
            for (std::size_t j = 0; j < m; ++j)
                score[i] += verdicts[b](i, j) > 0.0 ? lp_plus[j] : lp_minus[j];
        out[b] = argmax_tie_set(blk, std::move(score));
    }
    return out;
}

std::vector<SelectionResult> supervised_logistic(const dataset::Batch& batch,
                                                 const LabeledSplit& split, double reg) {
    const std::size_t m = batch.manifest.n_verifiers();
    std::vector<const dataset::ScoreBlock*> train;
    std::size_t n_train = 0;
    for (const auto& blk : batch.blocks) {
        if (!split.train_query_ids.contains(blk.query_id)) continue;
        if (!blk.has_labels())
            throw UnavailableError("train query " + blk.query_id + " has no labels");
        train.push_back(&blk);
        n_train += blk.n_responses();
    }
    if (train.empty()) throw UnavailableError("logistic regression has no labeled train queries");

    Matrix x(n_train, m);
    posterior::PseudoLabels hard;  // margins +-1, unit weights: plain ridge logistic
    hard.p_hat.reserve(n_train);
    std::size_t r = 0;
    bool has_pos = false, has_neg = false;
    for (const auto* blk : train)
        for (std::size_t i = 0; i < blk->n_responses(); ++i, ++r) {
            std::copy_n(blk->norm_scores.row(i), m, x.row(r));
            const bool pos = blk->labels[i] > 0;
            (pos ? has_pos : has_neg) = true;
            hard.p_hat.push_back(pos ? 1.0 : 0.0);
            hard.margin.push_back(pos ? 1.0 : -1.0);
        }
    if (!has_pos || !has_neg)
        throw DegenerateError("logistic regression needs both classes in the train labels");

    const ensemble::EnsembleModel model = ensemble::fit_weighted_logistic(x, hard, reg, {});
    std::vector<SelectionResult> out(batch.blocks.size());
    for (std::size_t b = 0; b < batch.blocks.size(); ++b)
        out[b] = ensemble::select(model, batch.blocks[b]);
    return out;
}

std::vector<SelectionResult> dawid_skene(const dataset::Batch& batch, EmTrace* trace) {
    const std::size_t m = batch.manifest.n_verifiers();
    const std::size_t nb = batch.blocks.size();
    std::vector<Matrix> verdicts(nb);
    std::size_t total = 0;
    for (std::size_t b = 0; b < nb; ++b) {
        verdicts[b] = median_binarize(batch.blocks[b].norm_scores);
        total += batch.blocks[b].n_responses();
    }

    // Pool rows; initialize posteriors from the per-row share of positive
    // verdicts (the naive-ensemble majority over binarized columns).
    Matrix v(total, m);
    std::size_t r = 0;
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t i = 0; i < batch.blocks[b].n_responses(); ++i, ++r)
            std::copy_n(verdicts[b].row(i), m, v.row(r));

    std::vector<double> q(total);
    for (std::size_t i = 0; i < total; ++i) {
        double plus = 0.0;
        for (std::size_t j = 0; j < m; ++j) plus += v(i, j) > 0.0 ? 1.0 : 0.0;
        q[i] = plus / static_cast<double>(m);
    }

    const double floor = 1e-9, ceil = 1.0 - 1e-9;
    std::vector<double> psi(m), eta(m);
    double prior = 0.5;
    std::vector<double> q_next(total);
    for (int it = 0; it < 200; ++it) {
        // M step.
        double qs = 0.0;
        for (double qi : q) qs += qi;
        prior = std::clamp(qs / static_cast<double>(total), floor, ceil);
        for (std::size_t j = 0; j < m; ++j) {
            double agree_pos = 0.0, agree_neg = 0.0;
            for (std::size_t i = 0; i < total; ++i) {
                if (v(i, j) > 0.0)
                    agree_pos += q[i];
                else
                    agree_neg += 1.0 - q[i];
            }
            psi[j] = std::clamp(agree_pos / std::max(qs, 1e-300), floor, ceil);
            eta[j] = std::clamp(agree_neg / std::max(static_cast<double>(total) - qs, 1e-300),
                                floor, ceil);
        }
        // E step + observed-data log-likelihood.
        const double lp = std::log(prior), ln = std::log1p(-prior);
        double ll = 0.0;
        double delta = 0.0;
        for (std::size_t i = 0; i < total; ++i) {
            double a = lp, c = ln;
            for (std::size_t j = 0; j < m; ++j) {
                if (v(i, j) > 0.0) {
                    a += std::log(psi[j]);
                    c += std::log1p(-eta[j]);
                } else {
                    a += std::log1p(-psi[j]);
                    c += std::log(eta[j]);
                }
            }
            const double mx = std::max(a, c);
            ll += mx + std::log(std::exp(a - mx) + std::exp(c - mx));
            q_next[i] = sigmoid(a - c);
            delta = std::max(delta, std::abs(q_next[i] - q[i]));
        }
        q.swap(q_next);
        if (trace) trace->log_likelihood.push_back(ll);
        if (delta < 1e-8) break;
    }

    // Anchor the positive cluster to the naive-ensemble majority.
    double align = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        double rowmean = 0.0;
        for (std::size_t j = 0; j < m; ++j) rowmean += v(i, j);
        align += (2.0 * q[i] - 1.0) * rowmean;
    }
    if (align < 0.0) {
        for (double& qi : q) qi = 1.0 - qi;
        for (std::size_t j = 0; j < m; ++j) {
            const double p = psi[j];
            psi[j] = 1.0 - eta[j];
            eta[j] = 1.0 - p;
        }
        prior = 1.0 - prior;
    }
    if (trace) {
        trace->psi = psi;
        trace->eta = eta;
        trace->prior = prior;
    }

    std::vector<SelectionResult> out(nb);
    r = 0;
    for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t n = batch.blocks[b].n_responses();
        std::vector<double> score(q.begin() + r, q.begin() + r + n);
        out[b] = argmax_tie_set(batch.blocks[b], std::move(score));
        r += n;
    }
    return out;
}

namespace {

struct GaussComponent {
    std::vector<double> mean;
    Matrix cov;      // Cholesky factor after prepare()
    double logdet = 0.0;
    bool ok = false;
};

// In-place Cholesky; returns false when not positive definite.
bool cholesky(Matrix& a, double& logdet) {
    const std::size_t d = a.rows();
    logdet = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double diag = a(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= a(j, k) * a(j, k);
        if (diag <= 0.0) return false;
        a(j, j) = std::sqrt(diag);
        logdet += 2.0 * std::log(a(j, j));
        for (std::size_t i = j + 1; i < d; ++i) {
            double x = a(i, j);
            for (std::size_t k = 0; k < j; ++k) x -= a(i, k) * a(j, k);
            a(i, j) = x / a(j, j);
        }
    }
    return true;
}

double gauss_logpdf(const GaussComponent& g, const double* x, std::size_t d,
                    std::vector<double>& work) {
    for (std::size_t j = 0; j < d; ++j) work[j] = x[j] - g.mean[j];
    // Solve L z = (x - mu), quadratic form = |z|^2.
    double quad = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double z = work[i];
        for (std::size_t k = 0; k < i; ++k) z -= g.cov(i, k) * work[k];
        z /= g.cov(i, i);
        work[i] = z;
        quad += z * z;
    }
    constexpr double log2pi = 1.8378770664093453;
    return -0.5 * (static_cast<double>(d) * log2pi + g.logdet + quad);
}

}  // namespace

std::vector<SelectionResult> gmm_em(const dataset::Batch& batch, EmTrace* trace) {
    const std::size_t m = batch.manifest.n_verifiers();
    const std::size_t nb = batch.blocks.size();
    std::size_t total = 0;
    for (const auto& b : batch.blocks) total += b.n_responses();

    Matrix x(total, m);
    std::vector<double> naive(total);
    std::size_t r = 0;
    for (const auto& blk : batch.blocks) {
        const auto means = naive_row_means(blk);
        for (std::size_t i = 0; i < blk.n_responses(); ++i, ++r) {
            std::copy_n(blk.norm_scores.row(i), m, x.row(r));
            naive[r] = means[i];
        }
    }

    const double ridge = 1e-4;
    // Hard split at the median naive score; degenerate (all-equal) data keeps
    // both components identical and the responsibilities at 1/2.
    const double med = sorted_median(naive);
    std::vector<double> resp(total, 0.5);  // responsibility of component 1 ("high")
    {
        bool any_low = false, any_high = false;
        for (double s : naive) (s >= med ? any_high : any_low) = true;
        if (any_low && any_high)
            for (std::size_t i = 0; i < total; ++i) resp[i] = naive[i] >= med ? 1.0 : 0.0;
    }

    GaussComponent comp[2];
    double weight[2] = {0.5, 0.5};
    bool diagonal_only = false;

    auto m_step = [&] {
        for (int k = 0; k < 2; ++k) {
            double nk = 0.0;
            comp[k].mean.assign(m, 0.0);
            for (std::size_t i = 0; i < total; ++i) {
                const double rk = k == 1 ? resp[i] : 1.0 - resp[i];
                nk += rk;
                for (std::size_t j = 0; j < m; ++j) comp[k].mean[j] += rk * x(i, j);
            }
            nk = std::max(nk, 1e-12);
            weight[k] = nk / static_cast<double>(total);
            for (double& mu : comp[k].mean) mu /= nk;

            Matrix cov(m, m, 0.0);
            for (std::size_t i = 0; i < total; ++i) {
                const double rk = k == 1 ? resp[i] : 1.0 - resp[i];
                if (rk == 0.0) continue;
                for (std::size_t j = 0; j < m; ++j) {
                    const double dj = x(i, j) - comp[k].mean[j];
                    for (std::size_t l = j; l < m; ++l)
                        cov(j, l) += rk * dj * (x(i, l) - comp[k].mean[l]);
                }
            }
            for (std::size_t j = 0; j < m; ++j)
                for (std::size_t l = j; l < m; ++l) {
                    cov(j, l) /= nk;
                    cov(l, j) = cov(j, l);
                }
            for (std::size_t j = 0; j < m; ++j) cov(j, j) += ridge;
            if (diagonal_only)
                for (std::size_t j = 0; j < m; ++j)
                    for (std::size_t l = 0; l < m; ++l)
                        if (j != l) cov(j, l) = 0.0;

            Matrix fact = cov;
            if (!cholesky(fact, comp[k].logdet)) {
                // Singular even with the ridge: retreat to a diagonal model.
                diagonal_only = true;
                if (trace) trace->diagonal_fallback = true;
                for (std::size_t j = 0; j < m; ++j)
                    for (std::size_t l = 0; l < m; ++l)
                        if (j != l) cov(j, l) = 0.0;
                fact = cov;
                cholesky(fact, comp[k].logdet);
            }
            comp[k].cov = fact;
            comp[k].ok = true;
        }
    };

    std::vector<double> work(m), resp_next(total);
    for (int it = 0; it < 200; ++it) {
        m_step();
        double ll = 0.0, delta = 0.0;
        for (std::size_t i = 0; i < total; ++i) {
            const double l0 = std::log(std::max(weight[0], 1e-300)) +
                              gauss_logpdf(comp[0], x.row(i), m, work);
            const double l1 = std::log(std::max(weight[1], 1e-300)) +
                              gauss_logpdf(comp[1], x.row(i), m, work);
            const double mx = std::max(l0, l1);
            ll += mx + std::log(std::exp(l0 - mx) + std::exp(l1 - mx));
            resp_next[i] = sigmoid(l1 - l0);
            delta = std::max(delta, std::abs(resp_next[i] - resp[i]));
        }
        resp.swap(resp_next);
        if (trace) trace->log_likelihood.push_back(ll);
        if (delta < 1e-8) break;
    }

    // Label the component with the higher mean naive score as "correct".
    double s1 = 0.0, n1 = 0.0, s0 = 0.0, n0 = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        s1 += resp[i] * naive[i];
        n1 += resp[i];
        s0 += (1.0 - resp[i]) * naive[i];
        n0 += 1.0 - resp[i];
    }
    const bool comp1_correct = s1 / std::max(n1, 1e-12) >= s0 / std::max(n0, 1e-12);
    if (!comp1_correct)
        for (double& ri : resp) ri = 1.0 - ri;

    std::vector<SelectionResult> out(nb);
    r = 0;
    for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t n = batch.blocks[b].n_responses();
        std::vector<double> score(resp.begin() + r, resp.begin() + r + n);
        out[b] = argmax_tie_set(batch.blocks[b], std::move(score));
        r += n;
    }
    return out;
}

std::vector<double> jci_mle_scores(const Matrix& binarized, const moments::VerifierQuality& quality,
                                   std::span<const std::uint8_t> active, bool printed_form) {
    const std::size_t n = binarized.rows(), m = binarized.cols();
    std::vector<double> w(m, 0.0), a(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        if (!active.empty() && !active[j]) continue;
        const double psi = quality.psi[j], eta = quality.eta[j];
        if (printed_form) {
            // Compatibility form: the same logarithm in both terms.
            w[j] = std::log(psi * (1.0 - psi) / (eta * (1.0 - eta)));
            a[j] = w[j];
        } else {
            w[j] = 0.5 * std::log(psi * eta / ((1.0 - psi) * (1.0 - eta)));
            a[j] = 0.5 * std::log(psi * (1.0 - psi) / (eta * (1.0 - eta)));
        }
    }
    double intercept = 0.0;
    for (std::size_t j = 0; j < m; ++j) intercept += a[j];
    if (!printed_form) {
        const double b = quality.b_hat;
        intercept += std::log((1.0 + b) / (1.0 - b));
    }
    std::vector<double> scores(n, intercept);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) scores[i] += binarized(i, j) * w[j];
    return scores;
}

namespace {

SelectionResult jci_block(const dataset::ScoreBlock& block, const RunConfig& cfg) {
    tci::SearchOptions sopt;
    sopt.clip_delta = cfg.clip_delta;
    sopt.max_sweeps = cfg.max_sweeps;
    sopt.index_alt = cfg.flags.tci_index_alt;
    const tci::SearchResult search = tci::optimize_thresholds(block.norm_scores, block.active, sopt);
    const Matrix binarized = tci::apply_transform(block.norm_scores, search.spec);
    const Matrix vb = tci::compact_active(binarized, search.spec.active);
    const moments::MomentSet ms = moments::empirical_moments(vb);
    const moments::RankOneFit fit = moments::fit_moments(ms);
    const moments::VerifierQuality qa = moments::estimate_quality(ms.mu, fit.u, fit.b_hat);

    moments::VerifierQuality full;
    full.b_hat = qa.b_hat;
    full.psi.assign(block.norm_scores.cols(), 0.5);
    full.eta.assign(block.norm_scores.cols(), 0.5);
    full.pi.assign(block.norm_scores.cols(), 0.5);
    std::size_t c = 0;
    for (std::size_t j = 0; j < block.norm_scores.cols(); ++j) {
        if (!search.spec.active[j]) continue;
        full.psi[j] = qa.psi[c];
        full.eta[j] = qa.eta[c];
        full.pi[j] = qa.pi[c];
        ++c;
    }
    std::vector<double> scores =
        jci_mle_scores(binarized, full, search.spec.active, cfg.flags.eq9_compat);
    return argmax_tie_set(block, std::move(scores));
}

}  // namespace

std::vector<SelectionResult> jci_pipeline(const dataset::Batch& batch, const RunConfig& cfg) {
    std::vector<SelectionResult> out(batch.blocks.size());
    detail::parallel_for(batch.blocks.size(), cfg.workers, [&](std::size_t b) {
        try {
            out[b] = jci_block(batch.blocks[b], cfg);
        } catch (const Error&) {
            out[b] = naive_ensemble(batch.blocks[b]);
            out[b].fallback = "naive-ensemble";
        }
    });
    return out;
}

std::vector<SelectionResult> jci_uninformative(const dataset::Batch& batch) {
    const std::size_t m = batch.manifest.n_verifiers();
    moments::VerifierQuality uniform;
    uniform.b_hat = 0.0;
    uniform.psi.assign(m, 0.7);
    uniform.eta.assign(m, 0.7);
    uniform.pi.assign(m, 0.7);
    std::vector<SelectionResult> out(batch.blocks.size());
    for (std::size_t b = 0; b < batch.blocks.size(); ++b) {
        const auto& blk = batch.blocks[b];
        const Matrix verdicts = median_binarize(blk.norm_scores);
        out[b] = argmax_tie_set(blk, jci_mle_scores(verdicts, uniform, {}, false));
    }
    return out;
}

std::vector<SelectionResult> oracle_best_verifier(const dataset::Batch& batch) {
    const std::size_t m = batch.manifest.n_verifiers();
    for (const auto& b : batch.blocks)
        if (!b.has_labels())
            throw UnavailableError("oracle best verifier needs labels (query " + b.query_id + ")");

    std::vector<double> tp(m, 0.0), tn(m, 0.0);
    double n_pos = 0.0, n_neg = 0.0;
    for (const auto& blk : batch.blocks) {
        const Matrix verdicts = median_binarize(blk.norm_scores);
        for (std::size_t i = 0; i < blk.n_responses(); ++i) {
            const bool pos = blk.labels[i] > 0;
            (pos ? n_pos : n_neg) += 1.0;
            for (std::size_t j = 0; j < m; ++j) {
                if (pos && verdicts(i, j) > 0.0) tp[j] += 1.0;
                if (!pos && verdicts(i, j) < 0.0) tn[j] += 1.0;
            }
        }
    }
    std::size_t best = 0;
    double best_pi = -1.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double sens = n_pos > 0.0 ? tp[j] / n_pos : 0.5;
        const double spec = n_neg > 0.0 ? tn[j] / n_neg : 0.5;
        const double pi = 0.5 * (sens + spec);
        if (pi > best_pi) {
            best_pi = pi;
            best = j;
        }
    }

    std::vector<SelectionResult> out(batch.blocks.size());
    for (std::size_t b = 0; b < batch.blocks.size(); ++b) {
        const auto& blk = batch.blocks[b];
        std::vector<double> col(blk.n_responses());
        for (std::size_t i = 0; i < col.size(); ++i) col[i] = blk.norm_scores(i, best);
        out[b] = argmax_tie_set(blk, std::move(col));
    }
    return out;
}

const std::vector<std::string>& method_ids() {
    static const std::vector<std::string> ids = {
        "fuse",        "naive-ensemble", "majority-vote",     "pass1",
        "naive-bayes", "logistic",       "dawid-skene",       "gmm",
        "jci",         "jci-uninformative", "oracle-best-verifier"};
    return ids;
}

bool is_method(const std::string& id) {
    const auto& ids = method_ids();
    return std::find(ids.begin(), ids.end(), id) != ids.end();
}

std::vector<SelectionResult> run_method(const std::string& id, const dataset::Batch& batch,
                                        const RunConfig& cfg) {
    const std::size_t nb = batch.blocks.size();
    std::vector<SelectionResult> out(nb);

    if (id == "fuse") return ensemble::run_fuse(batch, cfg);
    if (id == "naive-ensemble") {
        detail::parallel_for(nb, cfg.workers,
                             [&](std::size_t b) { out[b] = naive_ensemble(batch.blocks[b]); });
        return out;
    }
    if (id == "majority-vote") {
        for (std::size_t b = 0; b < nb; ++b) out[b] = majority_vote(batch.blocks[b]);
        return out;
    }
    if (id == "pass1") {
        for (std::size_t b = 0; b < nb; ++b)
            out[b] = cfg.flags.pass1_literal ? first_response(batch.blocks[b])
                                             : random_rule(batch.blocks[b]);
        return out;
    }
    if (id == "naive-bayes")
        return naive_bayes(batch, make_split(batch, cfg.label_fraction, cfg.seed));
    if (id == "logistic")
        return supervised_logistic(batch, make_split(batch, cfg.label_fraction, cfg.seed), cfg.reg);
    if (id == "dawid-skene") return dawid_skene(batch);
    if (id == "gmm") return gmm_em(batch);
    if (id == "jci") return jci_pipeline(batch, cfg);
    if (id == "jci-uninformative") return jci_uninformative(batch);
    if (id == "oracle-best-verifier") return oracle_best_verifier(batch);
    throw ConfigError("unknown method id: " + id);
}

}  // namespace fuse::baselines
