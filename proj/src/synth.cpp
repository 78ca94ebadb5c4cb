#include "fuse/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace fuse::synth {

using nlohmann::json;

namespace {

// Draw-purpose tags feeding the counter-based generator.
constexpr std::uint64_t kLabelTag = 1;
constexpr std::uint64_t kVerdictTag = 2;
constexpr std::uint64_t kSlabTag = 3;
constexpr std::uint64_t kDepCoinTag = 4;
constexpr std::uint64_t kDepDrawTag = 5;

int draw_label(const SynthSpec& spec, std::size_t q, std::size_t i) {
    const double u = rng::u01(rng::hash4(spec.seed, kLabelTag, q, i));
    return u < 0.5 * (1.0 + spec.b) ? 1 : -1;
}

int draw_verdict(std::uint64_t seed, std::uint64_t tag, std::size_t q, std::size_t i,
                 std::size_t j, int y, double psi, double eta) {
    const double u = rng::u01(rng::hash5(seed, tag, q, i, j));
    if (y > 0) return u < psi ? 1 : -1;
    return u < eta ? -1 : 1;
}

std::string pad_id(const char* prefix, std::size_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%05zu", prefix, v);
    return buf;
}

}  // namespace

void SynthSpec::validate() const {
    if (m < 3) throw ConfigError("synth spec needs m >= 3");
    if (n < 2) throw ConfigError("synth spec needs n >= 2");
    if (n_queries < 1) throw ConfigError("synth spec needs n_queries >= 1");
    if (!(std::abs(b) < 1.0)) throw ConfigError("synth spec needs |b| < 1");
    if (psi.size() != m || eta.size() != m)
        throw ConfigError("synth spec psi/eta must have length m");
    for (double p : psi)
        if (!(p > 0.0 && p < 1.0)) throw ConfigError("psi entries must lie in (0,1)");
    for (double e : eta)
        if (!(e > 0.0 && e < 1.0)) throw ConfigError("eta entries must lie in (0,1)");
    if (value_kind == Kind::real) {
        if (tau_true.size() != m) throw ConfigError("real-valued spec needs tau_true of length m");
        for (double t : tau_true)
            if (!(t > -1.0 && t < 1.0)) throw ConfigError("tau_true entries must lie in (-1,1)");
    }
    if (dependence) {
        if (!(dependence->rho >= 0.0 && dependence->rho <= 1.0))
            throw ConfigError("dependence rho must lie in [0,1]");
        std::vector<bool> used(m, false);
        for (const auto& g : dependence->groups) {
            if (g.empty()) throw ConfigError("dependence group is empty");
            for (std::size_t j : g) {
                if (j >= m) throw ConfigError("dependence group index out of range");
                if (used[j]) throw ConfigError("dependence groups must be disjoint");
                used[j] = true;
            }
        }
    }
}

dataset::Manifest make_manifest(const SynthSpec& spec, const std::string& dataset_id) {
    dataset::Manifest man;
    man.dataset_id = dataset_id;
    man.verifiers.resize(spec.m);
    for (std::size_t j = 0; j < spec.m; ++j) {
        man.verifiers[j].id = pad_id("v", j);
        man.verifiers[j].kind = spec.value_kind == SynthSpec::Kind::binary
                                    ? dataset::VerifierKind::binary
                                    : dataset::VerifierKind::real;
        man.verifiers[j].range_lo = -1.0;
        man.verifiers[j].range_hi = 1.0;
    }
    return man;
}

// The channel parameters of each group's lead member; dependence changes
// joints, never marginals.
Matrix inject_dependence(const Matrix& verdicts, std::span<const int> labels,
                         std::span<const double> psi, std::span<const double> eta,
                         const Dependence& dep, std::uint64_t seed) {
    std::vector<bool> used(verdicts.cols(), false);
    for (const auto& g : dep.groups)
        for (std::size_t j : g) {
            if (j >= verdicts.cols() || used[j])
                throw DataError("dependence groups must be a disjoint subset of the columns");
            used[j] = true;
        }
    if (labels.size() != verdicts.rows()) throw DataError("labels length mismatch");

    Matrix out = verdicts;
    for (std::size_t i = 0; i < verdicts.rows(); ++i) {
        for (std::size_t g = 0; g < dep.groups.size(); ++g) {
            const double coin = rng::u01(rng::hash4(seed, kDepCoinTag, i, g));
            if (coin >= dep.rho) continue;
            const std::size_t lead = dep.groups[g][0];
            const int shared = draw_verdict(seed, kDepDrawTag, 0, i, g, labels[i], psi[lead],
                                            eta[lead]);
            for (std::size_t j : dep.groups[g]) out(i, j) = static_cast<double>(shared);
        }
    }
    return out;
}

namespace {

dataset::Batch assemble(const SynthSpec& spec, bool real_kind) {
    dataset::Batch batch;
    batch.manifest = make_manifest(spec, "synth");
    batch.blocks.resize(spec.n_queries);
    const Dependence* dep = spec.dependence ? &*spec.dependence : nullptr;

    for (std::size_t q = 0; q < spec.n_queries; ++q) {
        dataset::ScoreBlock& blk = batch.blocks[q];
        blk.query_id = pad_id("q", q);
        blk.response_ids.resize(spec.n);
        blk.labels.resize(spec.n);
        Matrix latent(spec.n, spec.m);
        for (std::size_t i = 0; i < spec.n; ++i) {
            blk.response_ids[i] = pad_id("r", i);
            const int y = draw_label(spec, q, i);
            blk.labels[i] = y;
            for (std::size_t j = 0; j < spec.m; ++j)
                latent(i, j) = draw_verdict(spec.seed, kVerdictTag, q, i, j, y, spec.psi[j],
                                            spec.eta[j]);
        }
        if (dep && dep->rho > 0.0) {
            const std::uint64_t dseed = rng::hash3(spec.seed, kDepCoinTag, q);
            latent = inject_dependence(latent, blk.labels, spec.psi, spec.eta, *dep, dseed);
        }

        if (!real_kind) {
            blk.raw_scores = std::move(latent);
        } else {
            blk.raw_scores = Matrix(spec.n, spec.m);
            for (std::size_t i = 0; i < spec.n; ++i)
                for (std::size_t j = 0; j < spec.m; ++j) {
                    const double tau = spec.tau_true[j];
                    const double u = rng::u01(rng::hash5(spec.seed, kSlabTag, q, i, j));
                    double s;
                    if (latent(i, j) > 0.0) {
                        s = tau + u * (1.0 - tau);  // in [tau, 1); ties binarize to +1
                    } else {
                        s = -1.0 + u * (tau + 1.0);  // in [-1, tau)
                        if (s >= tau) s = std::nextafter(tau, -1.0);
                    }
                    blk.raw_scores(i, j) = s;
                }
        }
        blk.norm_scores = dataset::normalize_block(blk.raw_scores, &blk.active);
    }
    dataset::concat_batch(batch);
    return batch;
}

}  // namespace

dataset::Batch gen_tci_binary(const SynthSpec& spec) {
    spec.validate();
    if (spec.value_kind != SynthSpec::Kind::binary)
        throw ConfigError("gen_tci_binary needs value_kind=binary");
    if (spec.dependence) throw ConfigError("gen_tci_binary generates independent verdicts only");
    return assemble(spec, false);
}

dataset::Batch gen_real_valued(const SynthSpec& spec) {
    spec.validate();
    if (spec.value_kind != SynthSpec::Kind::real)
        throw ConfigError("gen_real_valued needs value_kind=real");
    if (spec.dependence) throw ConfigError("gen_real_valued generates independent scores only");
    return assemble(spec, true);
}

dataset::Batch generate(const SynthSpec& spec) {
    spec.validate();
    return assemble(spec, spec.value_kind == SynthSpec::Kind::real);
}

double oracle_posterior(std::span<const double> verdict_row, const SynthSpec& spec) {
    if (spec.dependence)
        throw DataError("oracle posterior requires an independence factorization");
    if (verdict_row.size() != spec.m) throw DataError("verdict row width mismatch");
    double like_pos = 0.5 * (1.0 + spec.b);
    double like_neg = 0.5 * (1.0 - spec.b);
    for (std::size_t j = 0; j < spec.m; ++j) {
        const bool plus = verdict_row[j] > 0.0;
        like_pos *= plus ? spec.psi[j] : 1.0 - spec.psi[j];
        like_neg *= plus ? 1.0 - spec.eta[j] : spec.eta[j];
    }
    return like_pos / (like_pos + like_neg);
}

namespace {

// Conditional raw moments E[v^p | y] for one column, p = 1..3.
struct CondMoments {
    double m1, m2, m3;
};

CondMoments cond_moments(const SynthSpec& spec, std::size_t j, int y) {
    const double q = y > 0 ? spec.psi[j] : 1.0 - spec.eta[j];  // P(latent=+1 | y)
    if (spec.value_kind == SynthSpec::Kind::binary) {
        const double m1 = 2.0 * q - 1.0;
        return {m1, 1.0, m1};
    }
    const double tau = spec.tau_true[j];
    auto slab = [](double a, double b, int p) {
        return (std::pow(b, p + 1) - std::pow(a, p + 1)) / ((p + 1) * (b - a));
    };
    CondMoments cm;
    cm.m1 = q * slab(tau, 1.0, 1) + (1.0 - q) * slab(-1.0, tau, 1);
    cm.m2 = q * slab(tau, 1.0, 2) + (1.0 - q) * slab(-1.0, tau, 2);
    cm.m3 = q * slab(tau, 1.0, 3) + (1.0 - q) * slab(-1.0, tau, 3);
    return cm;
}

}  // namespace

std::vector<double> analytic_u(const SynthSpec& spec) {
    std::vector<double> u(spec.m);
    const double s = std::sqrt(1.0 - spec.b * spec.b);
    for (std::size_t j = 0; j < spec.m; ++j) {
        double psi = spec.psi[j], eta = spec.eta[j];
        if (spec.value_kind == SynthSpec::Kind::real) {
            // Extended sensitivity/specificity of the slab scores.
            const double tau = spec.tau_true[j];
            psi = 0.25 * (1.0 + tau) + 0.5 * psi;
            eta = 0.25 * (1.0 - tau) + 0.5 * eta;
        }
        u[j] = s * (psi + eta - 1.0);
    }
    return u;
}

moments::MomentSet analytic_moments(const SynthSpec& spec) {
    if (spec.dependence) throw DataError("analytic moments require independence");
    const std::size_t m = spec.m;
    const double p_pos = 0.5 * (1.0 + spec.b), p_neg = 0.5 * (1.0 - spec.b);

    std::vector<CondMoments> pos(m), neg(m);
    for (std::size_t j = 0; j < m; ++j) {
        pos[j] = cond_moments(spec, j, +1);
        neg[j] = cond_moments(spec, j, -1);
    }

    moments::MomentSet ms;
    ms.n_samples = spec.n * spec.n_queries;
    ms.mu.resize(m);
    for (std::size_t j = 0; j < m; ++j) ms.mu[j] = p_pos * pos[j].m1 + p_neg * neg[j].m1;

    // Centered conditional factors by index multiplicity.
    auto c1 = [&](std::size_t j, bool plus) {
        const CondMoments& cm = plus ? pos[j] : neg[j];
        return cm.m1 - ms.mu[j];
    };
    auto c2 = [&](std::size_t j, bool plus) {
        const CondMoments& cm = plus ? pos[j] : neg[j];
        return cm.m2 - 2.0 * ms.mu[j] * cm.m1 + ms.mu[j] * ms.mu[j];
    };
    auto c3 = [&](std::size_t j, bool plus) {
        const CondMoments& cm = plus ? pos[j] : neg[j];
        const double mu = ms.mu[j];
        return cm.m3 - 3.0 * mu * cm.m2 + 3.0 * mu * mu * cm.m1 - mu * mu * mu;
    };

    ms.sigma = Matrix(m, m);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = j; k < m; ++k) {
            const double v = j == k
                                 ? p_pos * c2(j, true) + p_neg * c2(j, false)
                                 : p_pos * c1(j, true) * c1(k, true) +
                                       p_neg * c1(j, false) * c1(k, false);
            ms.sigma(j, k) = v;
            ms.sigma(k, j) = v;
        }

    ms.tensor3 = SymTensor3(m);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = j; k < m; ++k)
            for (std::size_t l = k; l < m; ++l) {
                double tp, tn;
                if (j == k && k == l) {
                    tp = c3(j, true);
                    tn = c3(j, false);
                } else if (j == k) {
                    tp = c2(j, true) * c1(l, true);
                    tn = c2(j, false) * c1(l, false);
                } else if (k == l) {
                    tp = c1(j, true) * c2(k, true);
                    tn = c1(j, false) * c2(k, false);
                } else {
                    tp = c1(j, true) * c1(k, true) * c1(l, true);
                    tn = c1(j, false) * c1(k, false) * c1(l, false);
                }
                ms.tensor3.at_sorted(j, k, l) = p_pos * tp + p_neg * tn;
            }
    return ms;
}

SynthSpec parse_spec_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad synth spec: ") + e.what());
    }
    SynthSpec spec;
    try {
        spec.m = doc.at("m").get<std::size_t>();
        spec.n = doc.at("n").get<std::size_t>();
        spec.n_queries = doc.value("n_queries", std::size_t{1});
        spec.b = doc.value("b", 0.0);
        spec.psi = doc.at("psi").get<std::vector<double>>();
        spec.eta = doc.at("eta").get<std::vector<double>>();
        const std::string kind = doc.value("value_kind", "binary");
        if (kind == "binary")
            spec.value_kind = SynthSpec::Kind::binary;
        else if (kind == "real")
            spec.value_kind = SynthSpec::Kind::real;
        else
            throw ConfigError("value_kind must be binary or real");
        if (doc.contains("tau_true")) spec.tau_true = doc["tau_true"].get<std::vector<double>>();
        if (doc.contains("dependence") && !doc["dependence"].is_null()) {
            Dependence dep;
            dep.rho = doc["dependence"].value("rho", 0.0);
            for (const auto& g : doc["dependence"].value("groups", json::array()))
                dep.groups.push_back(g.get<std::vector<std::size_t>>());
            spec.dependence = std::move(dep);
        }
        spec.seed = doc.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad synth spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

}  // namespace fuse::synth
