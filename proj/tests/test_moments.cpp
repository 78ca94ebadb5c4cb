#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fuse/moments.hpp"
#include "fuse/synth.hpp"
#include "oracles.hpp"

using namespace fuse;
using namespace fuse::moments;

namespace {

Matrix sigma_from_u(const std::vector<double>& u) {
    const std::size_t m = u.size();
    Matrix s(m, m);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < m; ++k) s(j, k) = u[j] * u[k];
    return s;
}

synth::SynthSpec spec_with(std::size_t m, std::size_t n, double b, std::uint64_t seed,
                           std::vector<double> psi, std::vector<double> eta) {
    synth::SynthSpec s;
    s.m = m;
    s.n = n;
    s.b = b;
    s.seed = seed;
    s.psi = std::move(psi);
    s.eta = std::move(eta);
    return s;
}

}  // namespace

TEST_CASE("empirical moments on tiny hand cases") {
    Matrix x(2, 2);
    x(0, 0) = 1.0;
    x(0, 1) = 1.0;
    x(1, 0) = -1.0;
    x(1, 1) = -1.0;
    const MomentSet ms = empirical_moments(x);
    CHECK(ms.mu[0] == 0.0);
    CHECK(ms.mu[1] == 0.0);
    CHECK(ms.sigma(0, 1) == doctest::Approx(1.0));

    // Symmetric +-1 column: third central moment vanishes.
    Matrix y(4, 1);
    y(0, 0) = 1.0;
    y(1, 0) = -1.0;
    y(2, 0) = 1.0;
    y(3, 0) = -1.0;
    CHECK(empirical_moments(y).tensor3.at_sorted(0, 0, 0) == doctest::Approx(0.0));

    Matrix one(1, 2);
    CHECK_THROWS_AS(empirical_moments(one), DataError);
}

TEST_CASE("empirical sigma approaches the analytic rank-one structure") {
    auto s = spec_with(4, 5000, 0.3, 5, {0.85, 0.7, 0.75, 0.9}, {0.8, 0.65, 0.85, 0.7});
    const auto batch = synth::gen_tci_binary(s);
    const MomentSet ms = empirical_moments(batch.blocks[0].raw_scores);
    const auto u = synth::analytic_u(s);
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t k = 0; k < 4; ++k)
            if (j != k) CHECK(std::abs(ms.sigma(j, k) - u[j] * u[k]) < 4.0 / std::sqrt(5000.0));
}

TEST_CASE("rank-one fit matches the m=3 closed form") {
    Matrix sigma(3, 3, 0.0);
    sigma(0, 1) = sigma(1, 0) = 0.30;
    sigma(0, 2) = sigma(2, 0) = 0.24;
    sigma(1, 2) = sigma(2, 1) = 0.20;
    const auto u = resolve_sign(fit_rank_one_sym(sigma));
    CHECK(std::abs(u[0]) == doctest::Approx(0.6).epsilon(1e-7));
    CHECK(std::abs(u[1]) == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(std::abs(u[2]) == doctest::Approx(0.4).epsilon(1e-7));
}

TEST_CASE("rank-one fit is exact on noiseless input") {
    const std::vector<double> truth = {0.6, 0.5, 0.4, 0.3};
    const auto u = resolve_sign(fit_rank_one_sym(sigma_from_u(truth)));
    for (std::size_t j = 0; j < truth.size(); ++j)
        CHECK(u[j] == doctest::Approx(truth[j]).epsilon(1e-8));

    // Mixed signs survive up to global orientation.
    const std::vector<double> mixed = {0.6, -0.2, 0.5, 0.4};
    const auto um = resolve_sign(fit_rank_one_sym(sigma_from_u(mixed)));
    for (std::size_t j = 0; j < mixed.size(); ++j)
        CHECK(um[j] == doctest::Approx(mixed[j]).epsilon(1e-8));

    Matrix zero(4, 4, 0.0);
    CHECK_THROWS_AS(fit_rank_one_sym(zero), DegenerateError);
}

TEST_CASE("resolve_sign majority rule, identity and tie") {
    CHECK(resolve_sign({-0.6, -0.5, 0.1}) == std::vector<double>{0.6, 0.5, -0.1});
    CHECK(resolve_sign({0.6, 0.5, -0.1}) == std::vector<double>{0.6, 0.5, -0.1});
    CHECK(resolve_sign({0.5, -0.5}) == std::vector<double>{0.5, -0.5});
    CHECK_THROWS_AS(resolve_sign({0.0, 0.0}), DegenerateError);
}

TEST_CASE("tensor scale: exact, zero and synthetic") {
    const std::vector<double> u = {0.6, 0.5, 0.4, 0.3};
    const double lambda3 = -1.5;
    SymTensor3 t(4);
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t k = j; k < 4; ++k)
            for (std::size_t l = k; l < 4; ++l)
                t.at_sorted(j, k, l) = lambda3 * u[j] * u[k] * u[l];
    const TensorScale ts = estimate_tensor_scale(t, u);
    CHECK_FALSE(ts.degenerate);
    CHECK(ts.lambda3 == doctest::Approx(-1.5).epsilon(1e-12));

    SymTensor3 zeros(4);
    const TensorScale tz = estimate_tensor_scale(zeros, u);
    CHECK(tz.lambda3 == 0.0);
    CHECK(tz.degenerate);
    CHECK(invert_class_imbalance(tz.lambda3) == doctest::Approx(0.0));

    // b = 0.6 gives lambda3 = -2b/sqrt(1-b^2) = -1.5; a large draw lands close.
    auto s = spec_with(5, 5000, 0.6, 9, {0.85, 0.7, 0.75, 0.9, 0.8},
                       {0.8, 0.65, 0.85, 0.7, 0.75});
    const auto batch = synth::gen_tci_binary(s);
    const MomentSet ms = empirical_moments(batch.blocks[0].raw_scores);
    const RankOneFit fit = fit_moments(ms);
    CHECK(std::abs(fit.lambda3 - (-1.5)) < 0.1);
}

TEST_CASE("imbalance inversion roundtrip") {
    CHECK(invert_class_imbalance(0.0) == doctest::Approx(0.0));
    CHECK(invert_class_imbalance(-1.5) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(invert_class_imbalance(1.5) == doctest::Approx(-0.6).epsilon(1e-12));
    for (double b : {-0.9, -0.5, 0.0, 0.5, 0.9}) {
        const double t = -2.0 * b / std::sqrt(1.0 - b * b);
        CHECK(invert_class_imbalance(t) == doctest::Approx(b).epsilon(1e-10));
    }
}

TEST_CASE("quality from (mu, u, b): worked example and random verifier") {
    const VerifierQuality q = estimate_quality({0.1}, {0.6}, 0.0);
    CHECK(q.psi[0] == doctest::Approx(0.85));
    CHECK(q.eta[0] == doctest::Approx(0.75));
    CHECK(q.pi[0] == doctest::Approx(0.8));

    const VerifierQuality r = estimate_quality({0.0}, {0.0}, 0.0);
    CHECK(r.psi[0] == doctest::Approx(0.5));
    CHECK(r.eta[0] == doctest::Approx(0.5));
}

TEST_CASE("population identity: analytic moments invert to the true parameters") {
    // Exercises the full chain sigma -> u -> lambda3 -> b -> (psi, eta) on
    // population tensors, for both verdict kinds.
    for (int kind = 0; kind < 2; ++kind) {
        for (double b : {-0.4, 0.0, 0.2, 0.6}) {
            auto s = spec_with(5, 10, b, 1, {0.9, 0.8, 0.7, 0.6, 0.85},
                               {0.8, 0.75, 0.9, 0.55, 0.7});
            if (kind == 1) {
                s.value_kind = synth::SynthSpec::Kind::real;
                s.tau_true = {-0.2, 0.0, 0.1, 0.3, -0.4};
            }
            const MomentSet pop = synth::analytic_moments(s);
            const auto u_true = synth::analytic_u(s);
            const auto u = resolve_sign(fit_rank_one_sym(pop.sigma));
            for (std::size_t j = 0; j < s.m; ++j)
                CHECK(u[j] == doctest::Approx(u_true[j]).epsilon(1e-8));

            const TensorScale ts = estimate_tensor_scale(pop.tensor3, u);
            if (b == 0.0) {
                CHECK(ts.degenerate);
                continue;
            }
            const double b_hat = invert_class_imbalance(ts.lambda3);
            CHECK(b_hat == doctest::Approx(b).epsilon(1e-8));

            const VerifierQuality q = estimate_quality(pop.mu, u, b_hat);
            for (std::size_t j = 0; j < s.m; ++j) {
                double psi_eff = s.psi[j], eta_eff = s.eta[j];
                if (kind == 1) {
                    psi_eff = 0.25 * (1.0 + s.tau_true[j]) + 0.5 * s.psi[j];
                    eta_eff = 0.25 * (1.0 - s.tau_true[j]) + 0.5 * s.eta[j];
                }
                CHECK(q.psi[j] == doctest::Approx(psi_eff).epsilon(1e-7));
                CHECK(q.eta[j] == doctest::Approx(eta_eff).epsilon(1e-7));
            }
        }
    }
}

TEST_CASE("sampled recovery at N=20000 stays within 0.05") {
    auto s = spec_with(5, 20000, 0.2, 77, {0.9, 0.8, 0.7, 0.6, 0.85},
                       {0.8, 0.75, 0.9, 0.55, 0.7});
    const auto batch = synth::gen_tci_binary(s);
    const MomentSet ms = empirical_moments(batch.blocks[0].raw_scores);
    const RankOneFit fit = fit_moments(ms);
    const VerifierQuality q = estimate_quality(ms.mu, fit.u, fit.b_hat);
    for (std::size_t j = 0; j < s.m; ++j) {
        CHECK(std::abs(q.psi[j] - s.psi[j]) < 0.05);
        CHECK(std::abs(q.eta[j] - s.eta[j]) < 0.05);
    }
    CHECK(std::abs(fit.b_hat - s.b) < 0.05);
}

TEST_CASE("permuting columns permutes the estimates identically") {
    auto s = spec_with(4, 4000, 0.2, 31, {0.9, 0.7, 0.8, 0.6}, {0.85, 0.75, 0.65, 0.9});
    const auto batch = synth::gen_tci_binary(s);
    const Matrix& v = batch.blocks[0].raw_scores;
    const std::vector<std::size_t> perm = {2, 0, 3, 1};
    Matrix vp(v.rows(), v.cols());
    for (std::size_t i = 0; i < v.rows(); ++i)
        for (std::size_t j = 0; j < v.cols(); ++j) vp(i, j) = v(i, perm[j]);

    const MomentSet ms = empirical_moments(v);
    const MomentSet msp = empirical_moments(vp);
    const RankOneFit fit = fit_moments(ms);
    const RankOneFit fitp = fit_moments(msp);
    const VerifierQuality q = estimate_quality(ms.mu, fit.u, fit.b_hat);
    const VerifierQuality qp = estimate_quality(msp.mu, fitp.u, fitp.b_hat);
    for (std::size_t j = 0; j < perm.size(); ++j) {
        CHECK(qp.psi[j] == doctest::Approx(q.psi[perm[j]]).epsilon(1e-9));
        CHECK(qp.eta[j] == doctest::Approx(q.eta[perm[j]]).epsilon(1e-9));
    }
}

TEST_CASE("estimation error shrinks at the root-N rate") {
    std::vector<double> errs;
    for (std::size_t n : {500u, 2000u, 8000u}) {
        double err = 0.0;
        const int reps = 16;
        for (int r = 0; r < reps; ++r) {
            auto s = spec_with(5, n, 0.25, 300 + static_cast<std::uint64_t>(r),
                               {0.9, 0.8, 0.7, 0.65, 0.85}, {0.8, 0.75, 0.9, 0.6, 0.7});
            const auto batch = synth::gen_tci_binary(s);
            const MomentSet ms = empirical_moments(batch.blocks[0].raw_scores);
            const RankOneFit fit = fit_moments(ms);
            const VerifierQuality q = estimate_quality(ms.mu, fit.u, fit.b_hat);
            double e = std::abs(fit.b_hat - s.b);
            for (std::size_t j = 0; j < s.m; ++j) {
                e = std::max(e, std::abs(q.psi[j] - s.psi[j]));
                e = std::max(e, std::abs(q.eta[j] - s.eta[j]));
            }
            err += e;
        }
        errs.push_back(err / reps);
    }
    const double slope = std::log(errs[2] / errs[0]) / std::log(8000.0 / 500.0);
    CHECK(slope < -0.35);
    CHECK(slope > -0.65);
}
