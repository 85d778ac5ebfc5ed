#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "wasep/gibbs.hpp"
#include "wasep/lattice.hpp"

using namespace wasep;

TEST(Rates, SymmetricProfileGivesEqualRates) {
    for (int n : {1, 3, 8}) {
        auto r = build_rates(AsymmetryProfile::constant(0.0), n);
        for (int k = 1; k < 2 * n; ++k) {
            EXPECT_DOUBLE_EQ(r.p[k], 2.0 * n * n);
            EXPECT_DOUBLE_EQ(r.q[k], 2.0 * n * n);
        }
    }
}

TEST(Rates, ConstantOneAtNTwo) {
    auto r = build_rates(AsymmetryProfile::constant(1.0), 2);
    // theta = 4 * 4^{-3/2} = 1/2; p + q = 16, p / q = e^{1/2}
    const double q = 16.0 / (1.0 + std::exp(0.5));
    const double p = 16.0 - q;
    for (int k = 1; k < 4; ++k) {
        EXPECT_NEAR(r.p[k], p, 1e-12);
        EXPECT_NEAR(r.q[k], q, 1e-12);
        EXPECT_NEAR(r.p[k] / r.q[k], std::exp(0.5), 1e-12);
    }
}

TEST(Rates, LinearProfileSingleSite) {
    auto r = build_rates(AsymmetryProfile::linear(0.0, 1.0), 1);
    const double th = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(r.p[1], 4.0 * std::exp(th) / (1.0 + std::exp(th)), 1e-12);
    EXPECT_NEAR(r.p[1] + r.q[1], 4.0, 1e-12);
}

TEST(Rates, InvariantsForRandomProfiles) {
    for (const char* spec : {"sin:2,1.5", "linear:-3,7", "piecewise:1,0.3,-2,0.7,0.5", "const:-4"}) {
        auto prof = parse_profile(spec);
        for (int n : {1, 5, 64}) {
            auto r = build_rates(prof, n);
            const double L = 2.0 * n;
            for (int k = 1; k < 2 * n; ++k) {
                EXPECT_GT(r.p[k], 0);
                EXPECT_GT(r.q[k], 0);
                EXPECT_NEAR((r.p[k] + r.q[k]) / (L * L), 1.0, 1e-12);
                const double th = 4.0 * prof(k / L) * std::pow(L, -1.5);
                EXPECT_NEAR(std::log(r.p[k] / r.q[k]), th, 1e-12);
            }
        }
    }
}

TEST(Rates, NonFiniteProfileRejected) {
    AsymmetryProfile bad{[](double x) { return x > 0.4 ? NAN : 0.0; }, 0.0, "bad"};
    EXPECT_THROW(build_rates(bad, 4), InvalidProfileError);
    EXPECT_THROW(parse_profile("const:abc"), InvalidProfileError);
    EXPECT_THROW(parse_profile("cubic:1"), InvalidProfileError);
}

TEST(Laplacian, Examples) {
    EXPECT_EQ(discrete_laplacian(IntegerInterface(1, {0, 1, 0}), 1), -2);
    EXPECT_EQ(discrete_laplacian(IntegerInterface(1, {0, -1, 0}), 1), 2);
    EXPECT_EQ(discrete_laplacian(IntegerInterface(2, {0, 1, 2, 1, 0}), 1), 0);
    EXPECT_THROW(discrete_laplacian(IntegerInterface(2, {0, 1, 2, 1, 0}), 0), IndexError);
    EXPECT_THROW(discrete_laplacian(IntegerInterface(2, {0, 1, 2, 1, 0}), 4), IndexError);
}

TEST(Area, Examples) {
    auto r0 = build_rates(AsymmetryProfile::constant(0.0), 2);
    EXPECT_EQ(weighted_area(IntegerInterface(2, {0, 1, 2, 1, 0}), r0), 0.0);

    auto r1 = build_rates(AsymmetryProfile::constant(1.0), 1);
    IntegerInterface peak(1, {0, 1, 0});
    EXPECT_NEAR(scaled_area(peak, r1), 1.0 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(weighted_area(peak, r1) * std::pow(2.0, 1.5), 1.0 / std::sqrt(2.0), 1e-12);

    PairInterface same{IntegerInterface::tent(3), IntegerInterface::tent(3)};
    EXPECT_EQ(scaled_area(same, build_rates(AsymmetryProfile::constant(1.0), 3)), 0.0);
    EXPECT_THROW(scaled_area(peak, r0), DimensionError);
}

TEST(Area, FlipChangesAreaByLogRatio) {
    auto rates = build_rates(parse_profile("sin:1.7,1"), 6);
    for (ModelKind m : {ModelKind::Bridge, ModelKind::BridgeWall, ModelKind::Pair}) {
        auto e = enumerate_states(m, m == ModelKind::Pair ? 3 : 6);
        auto rr = build_rates(parse_profile("sin:1.7,1"), e.n);
        for (const auto& s : e.states)
            for (const auto& f : allowed_flips(s, m)) {
                const double before = scaled_area(s, rr);
                const double after = scaled_area(apply_flip(s, f), rr);
                // up-flips of the upper interface and down-flips of the lower widen the area
                const bool widens = (f.iface == 1) == (f.dir == Direction::Up);
                EXPECT_NEAR(after - before, (widens ? 1 : -1) * rr.log_ratio[f.site], 1e-12);
            }
    }
    (void)rates;
}

TEST(Particles, Examples) {
    EXPECT_EQ(to_particles(IntegerInterface(1, {0, 1, 0})).bits, (std::vector<int>{1, 0}));
    EXPECT_EQ(from_particles({{1, 1, 0, 0}}).heights, (std::vector<int>{0, 1, 2, 1, 0}));
}

TEST(Particles, RoundTripOnEnumeratedSpaces) {
    for (int n = 1; n <= 5; ++n) {
        for (ModelKind m : {ModelKind::Bridge, ModelKind::BridgeWall}) {
            auto e = enumerate_states(m, n);
            std::set<std::vector<int>> seen;
            for (const auto& s : e.states) {
                const auto& f = std::get<IntegerInterface>(s);
                auto eta = to_particles(f);
                EXPECT_EQ(eta.count(), n);
                if (m == ModelKind::BridgeWall) EXPECT_TRUE(eta.satisfies_wall());
                EXPECT_EQ(from_particles(eta), f);
                seen.insert(eta.bits);
            }
            EXPECT_EQ(seen.size(), e.states.size());
        }
    }
}

TEST(Flips, Examples) {
    IntegerInterface peak(1, {0, 1, 0});
    auto f1 = allowed_flips(peak, ModelKind::Bridge);
    ASSERT_EQ(f1.size(), 1u);
    EXPECT_EQ(f1[0], (Flip{1, 1, Direction::Down, RateKind::Q}));

    EXPECT_TRUE(allowed_flips(peak, ModelKind::BridgeWall).empty());

    auto f2 = allowed_flips(PairInterface{peak, peak});
    ASSERT_EQ(f2.size(), 1u);
    EXPECT_EQ(f2[0], (Flip{1, 2, Direction::Down, RateKind::P}));
}

TEST(Flips, RandomFlipSequencesStayValid) {
    Rng rng(11);
    for (ModelKind m : {ModelKind::Bridge, ModelKind::BridgeWall, ModelKind::Pair}) {
        for (int n : {1, 2, 5, 16}) {
            State s = m == ModelKind::Pair ? State(PairInterface{IntegerInterface::tent(n), IntegerInterface::zigzag(n)})
                                           : State(IntegerInterface::zigzag(n));
            if (m == ModelKind::Pair) {
                auto& p = std::get<PairInterface>(s);
                p.lower = IntegerInterface::zigzag(n);
                for (int k = 0; k <= 2 * n; ++k) p.lower.heights[k] = -p.lower.heights[k];
            }
            ASSERT_TRUE(is_valid(s, m));
            for (int step = 0; step < 2000; ++step) {
                auto fl = allowed_flips(s, m);
                if (fl.empty()) break;
                s = apply_flip(s, fl[rng.below(fl.size())]);
                ASSERT_TRUE(is_valid(s, m));
            }
        }
    }
}

TEST(TextFormat, RoundTrip) {
    State a = IntegerInterface(2, {0, 1, 2, 1, 0});
    State b = PairInterface{IntegerInterface(2, {0, 1, 2, 1, 0}), IntegerInterface(2, {0, -1, 0, -1, 0})};
    for (const auto& s : {a, b}) {
        std::stringstream ss;
        write_state(ss, s);
        EXPECT_EQ(read_state(ss), s);
    }
    std::stringstream bad("M 3\n0 1");
    EXPECT_THROW(read_state(bad), DataError);
}
