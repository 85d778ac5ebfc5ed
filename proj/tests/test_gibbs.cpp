#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "wasep/gibbs.hpp"
#include "wasep/stats.hpp"

using namespace wasep;

namespace {

// brute force over all 2^{2N} step sequences
std::size_t brute_count(ModelKind m, int n) {
    std::size_t c = 0;
    const int L = 2 * n;
    if (m == ModelKind::Pair) {
        std::vector<IntegerInterface> br;
        for (unsigned s = 0; s < (1u << L); ++s) {
            std::vector<int> st(L);
            for (int i = 0; i < L; ++i) st[i] = (s >> i) & 1 ? 1 : -1;
            auto f = steps_to_interface(st);
            if (is_bridge(f)) br.push_back(f);
        }
        for (const auto& u : br)
            for (const auto& l : br) c += is_valid(State(PairInterface{u, l}), ModelKind::Pair);
        return c;
    }
    for (unsigned s = 0; s < (1u << L); ++s) {
        std::vector<int> st(L);
        for (int i = 0; i < L; ++i) st[i] = (s >> i) & 1 ? 1 : -1;
        auto f = steps_to_interface(st);
        c += is_valid(State(f), m);
    }
    return c;
}

std::vector<RateTable> profile_grid(int n) {
    return {build_rates(AsymmetryProfile::constant(0.0), n), build_rates(AsymmetryProfile::constant(1.0), n),
            build_rates(AsymmetryProfile::linear(-1.0, 3.0), n), build_rates(parse_profile("sin:4,2"), n)};
}

double binom(int n, int k) { return std::round(std::exp(log_binomial(n, k))); }

}  // namespace

TEST(Enumerate, SmallExamples) {
    EXPECT_EQ(enumerate_states(ModelKind::Bridge, 2).size(), 6);
    EXPECT_EQ(enumerate_states(ModelKind::BridgeWall, 3).size(), 5);
    auto p = enumerate_states(ModelKind::Pair, 1);
    ASSERT_EQ(p.size(), 3);
    IntegerInterface ud(1, {0, 1, 0}), du(1, {0, -1, 0});
    EXPECT_GE(p.find(PairInterface{ud, ud}), 0);
    EXPECT_GE(p.find(PairInterface{du, du}), 0);
    EXPECT_GE(p.find(PairInterface{ud, du}), 0);
    EXPECT_THROW(p.find(PairInterface{du, ud}), DataError);
}

TEST(Enumerate, CountsMatchClosedFormsAndBruteForce) {
    for (int n = 1; n <= 6; ++n) {
        EXPECT_EQ(enumerate_states(ModelKind::Bridge, n).size(), binom(2 * n, n));
        EXPECT_EQ(enumerate_states(ModelKind::BridgeWall, n).size(), binom(2 * n, n) / (n + 1));
        EXPECT_EQ(brute_count(ModelKind::BridgeWall, n), static_cast<std::size_t>(binom(2 * n, n) / (n + 1)));
    }
    for (int n = 1; n <= 4; ++n) {
        double closed = 0;
        for (int m = 0; m <= n; ++m) closed += binom(2 * n, 2 * m) * binom(2 * m, m) * binom(2 * (n - m), n - m) / (n - m + 1);
        const auto e = enumerate_states(ModelKind::Pair, n);
        EXPECT_EQ(e.size(), closed);
        EXPECT_EQ(static_cast<double>(brute_count(ModelKind::Pair, n)), closed);
        std::set<State> uniq(e.states.begin(), e.states.end());
        EXPECT_EQ(static_cast<int>(uniq.size()), e.size());
    }
    EXPECT_THROW(enumerate_states(ModelKind::Bridge, 20, 1e6), ResourceError);
}

TEST(Gibbs, Examples) {
    for (ModelKind m : {ModelKind::Bridge, ModelKind::BridgeWall, ModelKind::Pair}) {
        auto e = enumerate_states(m, 2);
        auto mu = gibbs_measure(e, build_rates(AsymmetryProfile::constant(0.0), 2));
        for (double w : mu.weights) EXPECT_NEAR(w, 1.0 / e.size(), 1e-15);
    }
    auto e = enumerate_states(ModelKind::Bridge, 1);
    auto mu = gibbs_measure(e, build_rates(AsymmetryProfile::constant(1.0), 1));
    const int up = e.find(IntegerInterface(1, {0, 1, 0}));
    // weights proportional to exp(+-1/sqrt2)
    const double expect = 1.0 / (1.0 + std::exp(-std::sqrt(2.0)));
    EXPECT_NEAR(mu.weights[up], expect, 1e-12);
    EXPECT_NEAR(mu.weights[up], 0.8044297, 1e-6);
}

TEST(Gibbs, DetailedBalanceAndStationarity) {
    for (ModelKind m : {ModelKind::Bridge, ModelKind::BridgeWall, ModelKind::Pair})
        for (int n = 1; n <= 3; ++n)
            for (const auto& r : profile_grid(n)) {
                auto e = enumerate_states(m, n);
                auto mu = gibbs_measure(e, r);
                auto g = generator_matrix(e, r);
                EXPECT_LT(detailed_balance_check(g, mu), 1e-12);
                EXPECT_LT(stationarity_residual(g, mu.weights), 1e-9);
            }
}

TEST(Gibbs, CorruptedMeasureViolatesBalance) {
    auto r = build_rates(AsymmetryProfile::constant(1.0), 2);
    auto e = enumerate_states(ModelKind::Bridge, 2);
    auto mu = gibbs_measure(e, r);
    auto g = generator_matrix(e, r);
    auto w = mu.weights;
    w[2] *= 1.01;
    EXPECT_GT(detailed_balance_check(g, w), 1e-3);
}

TEST(Generator, Examples) {
    auto g = generator_matrix(enumerate_states(ModelKind::Bridge, 1), build_rates(AsymmetryProfile::constant(0.0), 1));
    auto d = g.dense();
    ASSERT_EQ(d.rows(), 2);
    EXPECT_DOUBLE_EQ(d(0, 0), -2);
    EXPECT_DOUBLE_EQ(d(0, 1), 2);
    EXPECT_DOUBLE_EQ(d(1, 0), 2);
    EXPECT_DOUBLE_EQ(d(1, 1), -2);

    auto w = generator_matrix(enumerate_states(ModelKind::BridgeWall, 1), build_rates(AsymmetryProfile::constant(1.0), 1));
    ASSERT_EQ(w.dimension, 1);
    EXPECT_EQ(w.dense()(0, 0), 0.0);

    for (ModelKind m : {ModelKind::Bridge, ModelKind::BridgeWall, ModelKind::Pair}) {
        auto gm = generator_matrix(enumerate_states(m, 3), build_rates(parse_profile("sin:2,1"), 3)).dense();
        for (int i = 0; i < gm.rows(); ++i) EXPECT_NEAR(gm.row(i).sum(), 0.0, 1e-9);
    }
}

TEST(Samplers, UniformBridgeNOne) {
    Rng rng(1);
    int up = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) up += std::get<IntegerInterface>(uniform_sample(ModelKind::Bridge, 1, rng)).heights[1] == 1;
    EXPECT_NEAR(static_cast<double>(up) / n, 0.5, 0.01);
}

TEST(Samplers, UniformExcursionNThree) {
    auto e = enumerate_states(ModelKind::BridgeWall, 3);
    std::vector<double> counts(e.size(), 0.0);
    Rng rng(2);
    const int n = 1000000;
    for (int i = 0; i < n; ++i) counts[e.find(uniform_sample(ModelKind::BridgeWall, 3, rng))] += 1;
    for (double c : counts) EXPECT_NEAR(c / n, 0.2, 0.015 * 0.2);
}

TEST(Samplers, UniformPairNTwo) {
    auto e = enumerate_states(ModelKind::Pair, 2);
    std::vector<double> counts(e.size(), 0.0);
    Rng rng(3);
    const int n = 1000000;
    for (int i = 0; i < n; ++i) counts[e.find(uniform_sample(ModelKind::Pair, 2, rng))] += 1;
    std::vector<double> uni(e.size(), 1.0 / e.size());
    EXPECT_GT(chi_square_test(counts, uni).p_value, 0.01);
}

TEST(Samplers, PairClassMarginal) {
    const int N = 3;
    auto probs = pair_class_probabilities(N);
    std::vector<double> counts(N + 1, 0.0);
    Rng rng(4);
    for (int i = 0; i < 1000000; ++i) {
        auto p = uniform_pair(N, rng, probs);
        counts[mod2_encode(p).iota.size() / 2] += 1;
    }
    EXPECT_GT(chi_square_test(counts, probs).p_value, 0.01);
}

TEST(Vervaat, Examples) {
    IntegerInterface ud(1, {0, 1, 0});
    EXPECT_EQ(vervaat(ud), ud);
    EXPECT_EQ(vervaat(IntegerInterface(1, {0, -1, 0})), ud);
    EXPECT_EQ(vervaat(IntegerInterface(2, {0, -1, 0, -1, 0})), IntegerInterface(2, {0, 1, 0, 1, 0}));
    EXPECT_THROW(vervaat(IntegerInterface(1, {0, 1, 2})), PreconditionError);
    for (const auto& s : enumerate_states(ModelKind::Bridge, 5).states)
        EXPECT_TRUE(is_excursion(vervaat(std::get<IntegerInterface>(s))));
}

TEST(Mod2, Examples) {
    IntegerInterface ud(1, {0, 1, 0}), du(1, {0, -1, 0});
    auto same = mod2_encode(PairInterface{IntegerInterface::tent(2), IntegerInterface::tent(2)});
    EXPECT_EQ(same.iota, (std::vector<int>{1, 2, 3, 4}));
    EXPECT_EQ(same.d_tilde.n, 0);
    EXPECT_EQ(same.s_tilde, IntegerInterface::tent(2));

    auto apart = mod2_encode(PairInterface{ud, du});
    EXPECT_TRUE(apart.iota.empty());
    EXPECT_EQ(apart.s_tilde.n, 0);
    EXPECT_EQ(apart.d_tilde, ud);

    Mod2Decomposition bad;
    bad.s_tilde = ud;
    bad.d_tilde = IntegerInterface::flat(0);
    bad.iota = {1};
    EXPECT_THROW(mod2_decode(bad), DecodeError);
    bad.iota = {1, 2, 3, 4};
    EXPECT_THROW(mod2_decode(bad), DecodeError);
}

TEST(Mod2, RoundTripOverAllPairs) {
    for (int n = 1; n <= 4; ++n)
        for (const auto& s : enumerate_states(ModelKind::Pair, n).states) {
            const auto& p = std::get<PairInterface>(s);
            auto d = mod2_encode(p);
            EXPECT_TRUE(is_bridge(d.s_tilde));
            EXPECT_TRUE(is_excursion(d.d_tilde));
            EXPECT_EQ(mod2_decode(d), p);
        }
}

TEST(TransferSampler, MatchesEnumeration) {
    for (ModelKind m : {ModelKind::Bridge, ModelKind::BridgeWall, ModelKind::Pair}) {
        const int n = m == ModelKind::Pair ? 2 : 3;
        auto r = build_rates(parse_profile("linear:3,4"), n);
        auto e = enumerate_states(m, n);
        auto mu = gibbs_measure(e, r);
        GibbsSampler gs(m, r);
        EXPECT_NEAR(gs.log_partition(), mu.log_partition, 1e-10);
        Rng rng(5);
        std::vector<State> samples;
        for (int i = 0; i < 200000; ++i) samples.push_back(gs.sample(rng));
        EXPECT_GT(empirical_vs_exact(samples, mu).p_value, 0.001) << to_string(m);
        if (m != ModelKind::Pair) {
            std::vector<double> mean, var;
            gs.site_moments(mean, var);
            for (int k = 0; k <= 2 * n; ++k) {
                double m1 = 0, m2 = 0;
                for (int i = 0; i < e.size(); ++i) {
                    const double h = std::get<IntegerInterface>(e.states[i]).h(k);
                    m1 += mu.weights[i] * h;
                    m2 += mu.weights[i] * h * h;
                }
                EXPECT_NEAR(mean[k], m1, 1e-12);
                EXPECT_NEAR(var[k], m2 - m1 * m1, 1e-12);
            }
        }
    }
}

TEST(Dirichlet, Examples) {
    auto e = enumerate_states(ModelKind::Bridge, 1);
    auto r = build_rates(AsymmetryProfile::constant(0.0), 1);
    auto mu = gibbs_measure(e, r);
    EXPECT_EQ(dirichlet_form({1.0, 1.0}, mu, r), 0.0);
    EXPECT_NEAR(dirichlet_form({1.0, 0.0}, mu, r), 1.0, 1e-14);
    EXPECT_NEAR(dirichlet_form({0.0, 1.0}, mu, r), 1.0, 1e-14);
    EXPECT_THROW(dirichlet_form({-1.0, 1.0}, mu, r), DomainError);
}

TEST(Dirichlet, MatchesGeneratorQuadraticForm) {
    // D(f) = -<sqrt f, L sqrt f>_mu
    auto r = build_rates(parse_profile("sin:2,1"), 3);
    for (ModelKind m : {ModelKind::Bridge, ModelKind::BridgeWall, ModelKind::Pair}) {
        auto e = enumerate_states(m, m == ModelKind::Pair ? 2 : 3);
        auto rr = build_rates(parse_profile("sin:2,1"), e.n);
        auto mu = gibbs_measure(e, rr);
        auto L = generator_matrix(e, rr).dense();
        Rng rng(6);
        Eigen::VectorXd g(e.size());
        std::vector<double> f(e.size());
        for (int i = 0; i < e.size(); ++i) {
            g(i) = rng.uniform();
            f[i] = g(i) * g(i);
        }
        Eigen::VectorXd Lg = L * g;
        double q = 0;
        for (int i = 0; i < e.size(); ++i) q -= mu.weights[i] * g(i) * Lg(i);
        EXPECT_NEAR(dirichlet_form(f, mu, rr), q, 1e-9 * std::max(1.0, q));
    }
    (void)r;
}

TEST(Eigen, Examples) {
    auto e = enumerate_states(ModelKind::Bridge, 1);
    auto r = build_rates(AsymmetryProfile::constant(0.0), 1);
    auto mu = gibbs_measure(e, r);
    auto g = generator_matrix(e, r);
    EXPECT_NEAR(principal_eigenvalue(g, mu, {0.3, -2.0}, 0.0), 0.0, 1e-12);
    EXPECT_NEAR(principal_eigenvalue(g, mu, {1.5, 1.5}, 2.0), 3.0, 1e-12);
    // V = 1 on the first state of the 2x2 chain
    EXPECT_NEAR(principal_eigenvalue(g, mu, {1.0, 0.0}, 1.0), (-3.0 + std::sqrt(17.0)) / 2, 1e-10);
    EXPECT_THROW(principal_eigenvalue(g, mu, {1.0, 0.0}, 1.0, 1), ResourceError);
}

TEST(Eigen, VariationalFormulaAndPositivity) {
    for (ModelKind m : {ModelKind::Bridge, ModelKind::Pair}) {
        auto e = enumerate_states(m, m == ModelKind::Pair ? 2 : 3);  // dimensions 20 and 10
        auto r = build_rates(parse_profile("sin:3,1"), e.n);
        auto mu = gibbs_measure(e, r);
        auto g = generator_matrix(e, r);
        Rng rng(8);
        std::vector<double> V(e.size());
        for (auto& v : V) v = rng.uniform() * 2 - 1;
        for (double a : {0.5, 2.0}) {
            auto res = principal_eigen(g, mu.weights, V, a);
            for (double x : res.eigenfunction) EXPECT_GT(x, 0.0);
            if (e.size() <= 10) EXPECT_NEAR(variational_supremum(mu, r, V, a), res.value, 1e-6);
        }
    }
}

TEST(Export, GibbsCsv) {
    auto e = enumerate_states(ModelKind::Bridge, 1);
    auto r = build_rates(AsymmetryProfile::constant(1.0), 1);
    std::ostringstream a, b;
    write_gibbs_csv(a, gibbs_measure(e, r));
    write_generator_csv(b, generator_matrix(e, r));
    EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "state_id,serialized_heights,log_weight");
    EXPECT_EQ(b.str().substr(0, b.str().find('\n')), "row,col,rate");
}
