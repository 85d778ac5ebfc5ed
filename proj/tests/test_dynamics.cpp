#include <gtest/gtest.h>

#include <cmath>

#include "wasep/dynamics.hpp"
#include "wasep/gibbs.hpp"
#include "wasep/stats.hpp"

using namespace wasep;

namespace {

RateTable flat_rates(int n) { return build_rates(AsymmetryProfile::constant(0.0), n); }
RateTable unit_rates(int n) { return build_rates(AsymmetryProfile::constant(1.0), n); }

PairInterface spread_pair(int n) {
    auto lo = IntegerInterface::tent(n);
    for (auto& v : lo.heights) v = -v;
    return {IntegerInterface::tent(n), lo};
}

}  // namespace

TEST(Simulate, FirstEventFromSinglePeak) {
    auto r = flat_rates(1);
    IntegerInterface peak(1, {0, 1, 0});
    SimOptions opt;
    opt.max_events = 1;
    double sum = 0.0;
    const int runs = 100000;
    for (int i = 0; i < runs; ++i) {
        auto res = simulate(ModelKind::Bridge, peak, r, 100.0, {}, 1000 + i, opt);
        ASSERT_EQ(res.traj.events.size(), 1u);
        const auto& e = res.traj.events[0];
        EXPECT_EQ(e.dir, Direction::Down);
        sum += e.time;
        if (i == 0) EXPECT_EQ(state_at(res.traj, res.traj.t_end), State(IntegerInterface(1, {0, -1, 0})));
    }
    EXPECT_NEAR(sum / runs, 0.5, 0.01);
}

TEST(Simulate, WallAbsorbingStateAccumulatesZetaLinearly) {
    auto r = unit_rates(1);
    for (double T : {0.5, 1.0, 3.0}) {
        auto res = simulate(ModelKind::BridgeWall, IntegerInterface(1, {0, 1, 0}), build_rates(AsymmetryProfile::constant(0.0), 1), T, {}, 3);
        EXPECT_TRUE(res.traj.events.empty());
        EXPECT_NEAR(res.zeta.total_mass(), std::sqrt(2.0) * T, 1e-12);
        auto xx = [](double, double x) { return x * (1 - x); };
        EXPECT_NEAR(zeta_integral(res.zeta, xx), std::sqrt(2.0) * T / 4, 1e-12);
        EXPECT_NEAR(zeta_integral(res.zeta, [](double, double) { return 1.0; }), res.zeta.total_mass(), 1e-12);
        EXPECT_EQ(zeta_integral(res.zeta, [T](double t, double) { return t > T ? 1.0 : 0.0; }), 0.0);
        auto rep = support_check(res.traj, res.zeta);
        EXPECT_TRUE(rep.violations.empty());
        EXPECT_NEAR(rep.h_dzeta, T, 1e-12);
    }
    (void)r;
}

TEST(Simulate, ZeroHorizon) {
    for (ModelKind m : {ModelKind::Bridge, ModelKind::BridgeWall, ModelKind::Pair}) {
        State s = m == ModelKind::Pair ? State(spread_pair(3)) : State(IntegerInterface::zigzag(3));
        auto res = simulate(m, s, unit_rates(3), 0.0, {0.0}, 1);
        EXPECT_TRUE(res.traj.events.empty());
        EXPECT_EQ(res.zeta.total_mass(), 0.0);
        EXPECT_EQ(res.zeta2.total_mass(), 0.0);
        ASSERT_EQ(res.traj.snapshots.size(), 1u);
        EXPECT_EQ(res.traj.snapshots[0].state, s);
    }
}

TEST(Simulate, Errors) {
    auto r = unit_rates(2);
    EXPECT_THROW(simulate(ModelKind::BridgeWall, IntegerInterface(2, {0, -1, 0, 1, 0}), r, 1.0, {}, 1),
                 PreconditionError);
    EXPECT_THROW(simulate(ModelKind::Bridge, IntegerInterface::tent(2), r, -1.0, {}, 1), ArgumentError);
    EXPECT_THROW(simulate(ModelKind::Bridge, IntegerInterface::tent(2), r, 1.0, {0.5, 0.2}, 1), ArgumentError);
    EXPECT_THROW(simulate(ModelKind::Bridge, IntegerInterface::tent(3), r, 1.0, {}, 1), DimensionError);
}

TEST(Simulate, Deterministic) {
    auto r = build_rates(parse_profile("sin:2,1"), 8);
    auto a = simulate(ModelKind::Pair, spread_pair(8), r, 0.3, {0.1, 0.2}, 99);
    auto b = simulate(ModelKind::Pair, spread_pair(8), r, 0.3, {0.1, 0.2}, 99);
    ASSERT_EQ(a.traj.events.size(), b.traj.events.size());
    for (std::size_t i = 0; i < a.traj.events.size(); ++i) {
        EXPECT_EQ(a.traj.events[i].time, b.traj.events[i].time);
        EXPECT_EQ(a.traj.events[i].site, b.traj.events[i].site);
        EXPECT_EQ(a.traj.events[i].iface, b.traj.events[i].iface);
        EXPECT_EQ(a.traj.events[i].dir, b.traj.events[i].dir);
    }
    EXPECT_EQ(a.zeta.mass_per_site, b.zeta.mass_per_site);
    EXPECT_EQ(a.zeta2.mass_per_site, b.zeta2.mass_per_site);
}

TEST(Simulate, ReplayReproducesSnapshotsAndConservesSteps) {
    for (ModelKind m : {ModelKind::Bridge, ModelKind::BridgeWall, ModelKind::Pair}) {
        const int n = 6;
        State s0 = m == ModelKind::Pair ? State(spread_pair(n)) : State(IntegerInterface::zigzag(n));
        std::vector<double> times = {0.0, 0.05, 0.1, 0.25, 0.5};
        auto res = simulate(m, s0, build_rates(parse_profile("linear:-2,5"), n), 0.5, times, 17);
        ASSERT_EQ(res.traj.snapshots.size(), times.size());
        double last = -1;
        State s = s0;
        std::size_t si = 0;
        for (const auto& e : res.traj.events) {
            EXPECT_GT(e.time, last);
            while (si < times.size() && times[si] < e.time) {
                EXPECT_EQ(res.traj.snapshots[si].state, s);
                ++si;
            }
            apply_event(s, e);
            ASSERT_TRUE(is_valid(s, m));
            last = e.time;
        }
        for (; si < times.size(); ++si) EXPECT_EQ(res.traj.snapshots[si].state, s);
    }
}

TEST(Simulate, ZetaMassMatchesIntervalLog) {
    for (ModelKind m : {ModelKind::BridgeWall, ModelKind::Pair}) {
        const int n = 5;
        State s0 = m == ModelKind::Pair ? State(PairInterface{IntegerInterface::zigzag(n), IntegerInterface::zigzag(n)})
                                        : State(IntegerInterface::zigzag(n));
        auto r = build_rates(parse_profile("sin:3,1"), n);
        auto res = simulate(m, s0, r, 2.0, {}, 5);
        for (const ReflectionMeasure* z : {&res.zeta, &res.zeta2}) {
            if (m != ModelKind::Pair && z == &res.zeta2) continue;
            std::vector<double> from_log(2 * n + 1, 0.0);
            for (const auto& iv : z->interval_log) from_log[iv.site] += z->interval_mass(iv);
            EXPECT_GT(z->total_mass(), 0.0);
            for (int k = 1; k < 2 * n; ++k) {
                EXPECT_GE(z->mass_per_site[k], 0.0);
                EXPECT_NEAR(from_log[k], z->mass_per_site[k], 1e-10 * std::max(1.0, z->mass_per_site[k]));
            }
        }
    }
}

TEST(Simulate, SupportConditionOnRandomRuns) {
    for (int n : {2, 4, 8, 16}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto r = unit_rates(n);
            auto w = simulate(ModelKind::BridgeWall, IntegerInterface::zigzag(n), r, 0.5, {}, seed);
            auto rep = support_check(w.traj, w.zeta);
            EXPECT_TRUE(rep.violations.empty());
            ASSERT_GT(rep.total_mass, 0.0);
            EXPECT_NEAR(rep.h_dzeta / rep.total_mass, 1.0 / std::sqrt(2.0 * n), 1e-12);

            auto p = simulate(ModelKind::Pair, PairInterface{IntegerInterface::zigzag(n), IntegerInterface::zigzag(n)},
                              r, 0.5, {}, seed);
            auto rp = support_check(p.traj, p.zeta, &p.zeta2);
            EXPECT_TRUE(rp.violations.empty());
            EXPECT_NEAR(rp.h_dzeta, 0.0, 1e-12);
        }
    }
}

TEST(Simulate, SupportCheckFlagsForgedIntervals) {
    auto r = unit_rates(4);
    auto w = simulate(ModelKind::BridgeWall, IntegerInterface::tent(4), r, 0.001, {}, 2);
    auto z = w.zeta;
    z.interval_log.push_back({4, 0.0, 0.001});  // the tent's top is never at height 1
    auto rep = support_check(w.traj, z);
    EXPECT_FALSE(rep.violations.empty());
    EXPECT_GT(rep.max_violation, 0.0);
}

TEST(Simulate, SeparatedPairHasNoReflection) {
    auto res = simulate(ModelKind::Pair, spread_pair(8), unit_rates(8), 1e-4, {}, 4);
    EXPECT_EQ(res.zeta.total_mass(), 0.0);
    EXPECT_EQ(res.zeta2.total_mass(), 0.0);
}

TEST(Simulate, SymmetricLongRunIsUniform) {
    for (ModelKind m : {ModelKind::Bridge, ModelKind::BridgeWall, ModelKind::Pair}) {
        const int n = 2;
        auto e = enumerate_states(m, n);
        auto r = flat_rates(n);
        Engine eng(m, e.states[0], r);
        eng.set_recording(false, false);
        Rng rng(77);
        std::vector<double> counts(e.size(), 0.0);
        double t = 0.0;
        // about 10^6 events at total rate ~ 4 * 8
        const int samples = 30000;
        for (int i = 0; i < samples; ++i) {
            t += 1.0;
            eng.run(t, rng);
            counts[e.find(eng.state())] += 1.0;
        }
        std::vector<double> uni(e.size(), 1.0 / e.size());
        EXPECT_GT(chi_square_test(counts, uni).p_value, 0.001) << to_string(m);
    }
}

TEST(Interpolate, GridTimesAndMidpoints) {
    Trajectory tr;
    tr.model = ModelKind::Bridge;
    tr.initial = IntegerInterface(1, {0, 1, 0});
    tr.events = {{0.3, 1, 1, Direction::Down}};
    tr.t_end = 1.0;
    // grid step 1/4; the event lies in [0.25, 0.5)
    auto at_grid = interpolate(tr, 0.5);
    EXPECT_NEAR(at_grid.upper[1], -1 / std::sqrt(2.0), 1e-15);
    auto mid = interpolate(tr, 0.375);
    EXPECT_NEAR(mid.upper[1], 0.0, 1e-15);
    auto quiet = interpolate(tr, 0.6);
    EXPECT_NEAR(quiet.upper[1], -1 / std::sqrt(2.0), 1e-15);
    EXPECT_THROW(interpolate(tr, 1.5), RangeError);
    EXPECT_THROW(interpolate(tr, -0.1), RangeError);
}

TEST(Export, CsvHeaders) {
    auto res = simulate(ModelKind::BridgeWall, IntegerInterface::zigzag(2), unit_rates(2), 0.1, {0.05}, 1);
    std::ostringstream a, b, c;
    write_events_csv(a, res.traj);
    write_snapshots_csv(b, res.traj.snapshots);
    write_zeta_csv(c, res.zeta);
    EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "time,site,interface_id,direction");
    EXPECT_EQ(b.str().substr(0, b.str().find('\n')), "time,k,height");
    EXPECT_EQ(c.str().substr(0, c.str().find('\n')), "site,t_start,t_end,mass");
}
