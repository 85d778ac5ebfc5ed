#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <vector>

#include "dynamics.hpp"
#include "errors.hpp"
#include "gibbs.hpp"
#include "lattice.hpp"
#include "rng.hpp"

namespace wasep {

struct GridFunction {
    int m = 0;
    std::vector<double> values;  // x_j = j/m, j = 0..m

    GridFunction() = default;
    explicit GridFunction(int m_) : m(m_), values(m_ + 1, 0.0) {}
    GridFunction(int m_, std::vector<double> v) : m(m_), values(std::move(v)) {}

    double x(int j) const { return static_cast<double>(j) / m; }
    double operator[](int j) const { return values[j]; }
    double& operator[](int j) { return values[j]; }

    // linear interpolation at x in [0,1]
    double at(double x) const {
        const double s = x * m;
        int j = std::min(static_cast<int>(s), m - 1);
        const double a = s - j;
        return (1 - a) * values[j] + a * values[j + 1];
    }

    static GridFunction from(int m, const std::function<double(double)>& f) {
        GridFunction g(m);
        for (int j = 0; j <= m; ++j) g.values[j] = f(g.x(j));
        return g;
    }
};

// ---------------------------------------------------------------- samplers

// random walk with N(0,1/m) steps minus x W(1): covariance min(x,y) - xy exactly
inline GridFunction sample_bridge(int m, Rng& rng) {
    if (m < 2) throw ArgumentError("sample_bridge: m must be >= 2");
    GridFunction g(m);
    const double s = 1.0 / std::sqrt(static_cast<double>(m));
    double w = 0.0;
    for (int j = 1; j <= m; ++j) {
        w += s * rng.normal();
        g.values[j] = w;
    }
    for (int j = 1; j <= m; ++j) g.values[j] -= g.x(j) * w;
    g.values[m] = 0.0;
    return g;
}

// continuous Vervaat: cyclic shift at the argmin
inline GridFunction vervaat(const GridFunction& b) {
    int jmin = 0;
    for (int j = 1; j < b.m; ++j)
        if (b.values[j] < b.values[jmin]) jmin = j;
    GridFunction e(b.m);
    for (int i = 0; i < b.m; ++i) e.values[i] = b.values[(jmin + i) % b.m] - b.values[jmin];
    e.values[b.m] = 0.0;
    return e;
}

inline GridFunction sample_excursion(int m, Rng& rng) { return vervaat(sample_bridge(m, rng)); }

struct GridPair {
    GridFunction upper;
    GridFunction lower;
};

inline GridFunction scaled_grid(const IntegerInterface& f) {
    return GridFunction(2 * f.n, f.scaled());
}

// uniform non-crossing lattice pair, rescaled by 1/sqrt(2n)
inline GridPair sample_watermelon(int n_lattice, Rng& rng) {
    if (n_lattice < 32) throw ArgumentError("sample_watermelon: n_lattice must be >= 32");
    static thread_local std::vector<double> probs;
    static thread_local int cached_n = -1;
    if (cached_n != n_lattice) {
        probs = pair_class_probabilities(n_lattice);
        cached_n = n_lattice;
    }
    auto p = uniform_pair(n_lattice, rng, probs);
    return {scaled_grid(p.upper), scaled_grid(p.lower)};
}

// ---------------------------------------------------------------- area reweighting

inline double area_sigma(const GridFunction& h, const AsymmetryProfile& sigma) {
    double s = 0.0;
    for (int j = 0; j <= h.m; ++j) {
        const double w = (j == 0 || j == h.m) ? 0.5 : 1.0;
        s += w * sigma(h.x(j)) * h.values[j];
    }
    return 2.0 * s / h.m;
}

inline double area_sigma(const GridPair& h, const AsymmetryProfile& sigma) {
    if (h.upper.m != h.lower.m) throw DimensionError("pair components on different grids");
    return area_sigma(h.upper, sigma) - area_sigma(h.lower, sigma);
}

enum class ContinuumLaw { Bridge, Excursion, Watermelon };

struct ContinuumSample {
    GridFunction upper;
    GridFunction lower;  // only for the watermelon
};

struct ReweightedEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;
    double ess = 0.0;
    bool degenerate = false;
};

// E_Q[F] = E_P[F e^A] / E_P[e^A], self-normalised, delta-method standard error
inline ReweightedEstimate reweighted_expectation(const std::function<double(const ContinuumSample&)>& F,
                                                 ContinuumLaw law, int m, const AsymmetryProfile& sigma,
                                                 int n_samples, std::uint64_t seed) {
    if (n_samples < 100) throw ArgumentError("reweighted_expectation: need at least 100 samples");
    Rng rng(seed);
    std::vector<double> a(n_samples), f(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        ContinuumSample s;
        if (law == ContinuumLaw::Bridge) {
            s.upper = sample_bridge(m, rng);
            a[i] = area_sigma(s.upper, sigma);
        } else if (law == ContinuumLaw::Excursion) {
            s.upper = sample_excursion(m, rng);
            a[i] = area_sigma(s.upper, sigma);
        } else {
            auto w = sample_watermelon(m / 2, rng);
            s.upper = std::move(w.upper);
            s.lower = std::move(w.lower);
            a[i] = area_sigma(GridPair{s.upper, s.lower}, sigma);
        }
        f[i] = F(s);
    }
    const double amax = *std::max_element(a.begin(), a.end());
    double sw = 0, sw2 = 0, swf = 0;
    for (int i = 0; i < n_samples; ++i) {
        const double w = std::exp(a[i] - amax);
        sw += w;
        sw2 += w * w;
        swf += w * f[i];
    }
    ReweightedEstimate r;
    r.estimate = swf / sw;
    double v = 0;
    for (int i = 0; i < n_samples; ++i) {
        const double w = std::exp(a[i] - amax);
        v += w * w * (f[i] - r.estimate) * (f[i] - r.estimate);
    }
    r.stderr_ = std::sqrt(v) / sw;
    r.ess = sw * sw / sw2;
    r.degenerate = r.ess < 10.0;
    return r;
}

// ---------------------------------------------------------------- SPDE solvers

struct SpdeConfig {
    int m = 128;
    double dt = 1e-3;
    double T = 1.0;
    AsymmetryProfile sigma = AsymmetryProfile::constant(0.0);
    double penalization_epsilon = 1e-4;
    std::uint64_t seed = 0;
    double theta = 0.5;        // 1/2 Crank-Nicolson, 1 backward Euler
    double noise_scale = 1.0;  // 0 switches the noise off
    std::vector<double> snapshot_times;
    std::optional<GridFunction> initial;
    std::optional<GridFunction> initial_lower;  // pair solver
};

struct SpdeResult {
    std::vector<double> times;
    std::vector<GridFunction> snapshots;
    std::vector<GridFunction> snapshots_lower;
    GridFunction final_state;
    GridFunction final_lower;
    std::vector<double> reflection_mass;   // per cell; pair: upper interface
    std::vector<double> reflection_mass2;  // pair: lower interface
    double min_value = 0.0;                // min over (t,x) of h, or of h1 - h2 for the pair
    double abs_h_dmass = 0.0;              // integral of |h| (or |h1 - h2|) against the penalisation mass
    double total_mass() const {
        double s = 0;
        for (double v : reflection_mass) s += v;
        return s;
    }
};

namespace detail {

// constant-coefficient tridiagonal system (1 + 2c) x_j - c x_{j-1} - c x_{j+1} = r_j, j = 1..m-1
class TriSolver {
public:
    TriSolver(int m, double c) : m_(m), c_(c), cp_(m + 1, 0.0), dp_(m + 1, 0.0) {
        const double b = 1 + 2 * c;
        double prev = 0.0;
        for (int j = 1; j < m; ++j) {
            const double den = b + c * prev;  // a = -c
            cp_[j] = -c / den;
            prev = cp_[j];
            denom_.push_back(den);
        }
    }
    void solve(std::vector<double>& r) const {
        // r[1..m-1] in, solution out; r[0], r[m] untouched (zero)
        double prev = 0.0;
        for (int j = 1; j < m_; ++j) {
            prev = (r[j] + c_ * prev) / denom_[j - 1];
            dp_[j] = prev;
        }
        r[m_ - 1] = dp_[m_ - 1];
        for (int j = m_ - 2; j >= 1; --j) r[j] = dp_[j] - cp_[j] * r[j + 1];
    }

private:
    int m_;
    double c_;
    std::vector<double> cp_;
    mutable std::vector<double> dp_;
    std::vector<double> denom_;
};

inline void check_spde(const SpdeConfig& c) {
    if (c.m < 2) throw ConfigError("spde: m must be >= 2");
    if (!(c.dt > 0) || !(c.T >= 0)) throw ConfigError("spde: need dt > 0 and T >= 0");
    if (c.theta < 0 || c.theta > 1) throw ConfigError("spde: theta must lie in [0,1]");
    if (c.theta < 0.5 && c.dt > 1.0 / ((1 - 2 * c.theta) * c.m * static_cast<double>(c.m)))
        throw ConfigError("spde: time step violates the stability bound of the scheme");
    if (!(c.penalization_epsilon > 0)) throw ConfigError("spde: penalization_epsilon must be positive");
    check_snapshot_times(c.snapshot_times, c.T);
}

// one theta-scheme step of dh = 1/2 h'' dt + s dt + sqrt(m) dW on the interior
class HeatStepper {
public:
    HeatStepper(const SpdeConfig& c, double sign)
        : m_(c.m), dt_(c.dt), th_(c.theta), k_(0.5 * c.m * static_cast<double>(c.m)),
          solver_(c.m, c.theta * c.dt * 0.5 * c.m * static_cast<double>(c.m)), rhs_(c.m + 1, 0.0),
          drift_(c.m + 1, 0.0), noise_sd_(std::sqrt(c.dt * c.m) * c.noise_scale) {
        for (int j = 1; j < m_; ++j) drift_[j] = sign * c.sigma(static_cast<double>(j) / m_) * dt_;
    }

    void step(std::vector<double>& h, Rng& rng) {
        const double e = (1 - th_) * dt_ * k_;
        for (int j = 1; j < m_; ++j) {
            rhs_[j] = h[j] + e * (h[j - 1] - 2 * h[j] + h[j + 1]) + drift_[j];
            if (noise_sd_ > 0) rhs_[j] += noise_sd_ * rng.normal();
        }
        rhs_[0] = rhs_[m_] = 0.0;
        if (th_ > 0) solver_.solve(rhs_);
        std::swap(h, rhs_);
        h[0] = h[m_] = 0.0;
    }

private:
    int m_;
    double dt_, th_, k_;
    TriSolver solver_;
    std::vector<double> rhs_;
    std::vector<double> drift_;
    double noise_sd_;
};

}  // namespace detail

inline GridFunction she_stationary_mean(int m, const AsymmetryProfile& sigma) {
    // solves 1/2 h'' + sigma = 0 with the same finite differences as the solver
    // 2 h_j - h_{j-1} - h_{j+1} = 2 sigma_j / m^2, Thomas on tridiag(-1, 2, -1)
    std::vector<double> r(m + 1, 0.0);
    for (int j = 1; j < m; ++j) r[j] = 2.0 * sigma(static_cast<double>(j) / m) / (static_cast<double>(m) * m);
    std::vector<double> cp(m + 1, 0.0), dp(m + 1, 0.0);
    for (int j = 1; j < m; ++j) {
        const double den = 2.0 + (j > 1 ? cp[j - 1] : 0.0);
        cp[j] = -1.0 / den;
        dp[j] = (r[j] + (j > 1 ? dp[j - 1] : 0.0)) / den;
    }
    GridFunction h(m);
    for (int j = m - 1; j >= 1; --j) h.values[j] = dp[j] - cp[j] * (j + 1 < m ? h.values[j + 1] : 0.0);
    return h;
}

// exact stationary law of the finite-difference SHE: mean plus a grid Brownian bridge
inline GridFunction she_stationary_sample(int m, const AsymmetryProfile& sigma, Rng& rng) {
    GridFunction b = sample_bridge(m, rng);
    GridFunction mu = she_stationary_mean(m, sigma);
    for (int j = 0; j <= m; ++j) b.values[j] += mu.values[j];
    return b;
}

namespace detail {

inline SpdeResult spde_run(const SpdeConfig& cfg, int mode) {
    // mode 0: SHE, 1: RSHE, 2: pair of RSHEs
    check_spde(cfg);
    const int m = cfg.m;
    Rng rng(cfg.seed);
    HeatStepper up(cfg, 1.0), lo(cfg, -1.0);
    std::vector<double> h = cfg.initial ? cfg.initial->values : std::vector<double>(m + 1, 0.0);
    std::vector<double> g = cfg.initial_lower ? cfg.initial_lower->values : std::vector<double>(m + 1, 0.0);
    if (static_cast<int>(h.size()) != m + 1 || static_cast<int>(g.size()) != m + 1)
        throw ConfigError("spde: initial condition has the wrong grid size");
    SpdeResult res;
    res.reflection_mass.assign(m + 1, 0.0);
    res.reflection_mass2.assign(m + 1, 0.0);
    auto current_min = [&]() {
        double mn = 0.0;
        for (int j = 0; j <= m; ++j) mn = std::min(mn, mode == 2 ? h[j] - g[j] : h[j]);
        return mn;
    };
    res.min_value = mode == 0 ? 0.0 : current_min();
    const long steps = std::lround(cfg.T / cfg.dt);
    if (std::abs(steps * cfg.dt - cfg.T) > 1e-9 * std::max(1.0, cfg.T))
        throw ConfigError("spde: T must be a multiple of dt");
    std::size_t si = 0;
    auto snap = [&](double t) {
        while (si < cfg.snapshot_times.size() && cfg.snapshot_times[si] <= t + 1e-12) {
            res.times.push_back(cfg.snapshot_times[si]);
            res.snapshots.emplace_back(m, h);
            if (mode == 2) res.snapshots_lower.emplace_back(m, g);
            ++si;
        }
    };
    snap(0.0);
    const double eps = cfg.penalization_epsilon;
    for (long s = 1; s <= steps; ++s) {
        up.step(h, rng);
        if (mode == 2) lo.step(g, rng);
        if (mode == 1) {
            const double f = 1.0 / (1.0 + cfg.dt / eps);
            for (int j = 1; j < m; ++j)
                if (h[j] < 0) {
                    h[j] *= f;
                    const double dm = cfg.dt * (-h[j]) / eps / m;
                    res.reflection_mass[j] += dm;
                    res.abs_h_dmass += -h[j] * dm;
                }
        } else if (mode == 2) {
            const double f = 1.0 / (1.0 + 2.0 * cfg.dt / eps);
            for (int j = 1; j < m; ++j) {
                const double gap = h[j] - g[j];
                if (gap < 0) {
                    const double ng = gap * f;
                    const double push = 0.5 * (ng - gap);
                    h[j] += push;
                    g[j] -= push;
                    const double dm = cfg.dt * (-ng) / eps / m;
                    res.reflection_mass[j] += dm;
                    res.reflection_mass2[j] += dm;
                    res.abs_h_dmass += -ng * 2 * dm;
                }
            }
        }
        if (mode != 0) res.min_value = std::min(res.min_value, current_min());
        snap(s * cfg.dt);
    }
    res.final_state = GridFunction(m, h);
    if (mode == 2) res.final_lower = GridFunction(m, g);
    return res;
}

}  // namespace detail

inline SpdeResult she_integrate(const SpdeConfig& cfg) { return detail::spde_run(cfg, 0); }
inline SpdeResult rshe_integrate(const SpdeConfig& cfg) { return detail::spde_run(cfg, 1); }
inline SpdeResult pair_rshe_integrate(const SpdeConfig& cfg) { return detail::spde_run(cfg, 2); }

inline void write_spde_snapshots_csv(std::ostream& os, const SpdeResult& r) {
    const bool pair = !r.snapshots_lower.empty();
    os << (pair ? "time,k,height,height2\n" : "time,k,height\n") << std::setprecision(17);
    for (std::size_t i = 0; i < r.times.size(); ++i)
        for (int j = 0; j <= r.snapshots[i].m; ++j) {
            os << r.times[i] << ',' << j << ',' << r.snapshots[i].values[j];
            if (pair) os << ',' << r.snapshots_lower[i].values[j];
            os << '\n';
        }
}

// ---------------------------------------------------------------- discrete heat kernel

inline double heat_kernel(int n, double t, int k, int l) {
    if (t < 0) throw ArgumentError("heat_kernel: t must be >= 0");
    const int L = 2 * n;
    if (k <= 0 || k >= L || l <= 0 || l >= L) return 0.0;
    const double L2 = static_cast<double>(L) * L;
    double s = 0.0;
    for (int j = 1; j < L; ++j) {
        const double a = j * M_PI / L;
        s += std::sin(a * k) * std::sin(a * l) * std::exp(L2 * t * (std::cos(a) - 1.0));
    }
    return s / n;
}

struct HeatKernelTable {
    int n = 0;
    double t = 0.0;
    Eigen::MatrixXd values;  // (2N+1) x (2N+1)
};

// sine basis of the killed walk: S(j,k) = sin(j pi k / 2N), eigenvalues (2N)^2 (cos(j pi/2N) - 1)
struct SineBasis {
    int n;
    Eigen::MatrixXd S;  // rows j = 1..2N-1 stored at 0..2N-2, columns k = 0..2N
    Eigen::VectorXd lambda;

    explicit SineBasis(int n_) : n(n_) {
        const int L = 2 * n;
        S.resize(L - 1, L + 1);
        lambda.resize(L - 1);
        for (int j = 1; j < L; ++j) {
            const double a = j * M_PI / L;
            lambda(j - 1) = static_cast<double>(L) * L * (std::cos(a) - 1.0);
            for (int k = 0; k <= L; ++k) S(j - 1, k) = (k == 0 || k == L) ? 0.0 : std::sin(a * k);
        }
    }
};

inline HeatKernelTable heat_kernel_table(int n, double t) {
    if (t < 0) throw ArgumentError("heat_kernel_table: t must be >= 0");
    SineBasis b(n);
    Eigen::VectorXd e = (b.lambda * t).array().exp();
    HeatKernelTable tab;
    tab.n = n;
    tab.t = t;
    tab.values = b.S.transpose() * e.asDiagonal() * b.S / n;
    return tab;
}

inline void write_kernel_csv(std::ostream& os, const HeatKernelTable& g) {
    os << "t,k,l,value\n" << std::setprecision(17);
    for (int k = 0; k < g.values.rows(); ++k)
        for (int l = 0; l < g.values.cols(); ++l) os << g.t << ',' << k << ',' << l << ',' << g.values(k, l) << '\n';
}

// ---------------------------------------------------------------- mild formulation

// Observer that accumulates, for Model 1, the spectral components of
// sum_k int_0^t g_{t-r}(k,.) (p_k - (2N)^2/2) 1{Delta h_r(k) != 0} dr.
class MildTracker {
public:
    MildTracker(const RateTable& rates, const std::vector<int>& h0)
        : n_(rates.n), basis_(rates.n), a_(2 * rates.n + 1, 0.0), h0_(h0) {
        const int L = 2 * n_;
        const double half = 2.0 * n_ * n_;
        for (int k = 1; k < L; ++k) c_.push_back(rates.p[k] - half);
        c_.insert(c_.begin(), 0.0);
        B_ = Eigen::VectorXd::Zero(L - 1);
        A_ = Eigen::VectorXd::Zero(L - 1);
        for (int k = 1; k < L; ++k) set_site(k, h0);
        Eigen::VectorXd hv(L + 1);
        for (int k = 0; k <= L; ++k) hv(k) = h0[k];
        h0hat_ = basis_.S * hv;
    }

    template <class E>
    void advance(const E&, double t0, double t1) {
        const double d = t1 - t0;
        if (d <= 0) return;
        for (int j = 0; j < B_.size(); ++j) {
            const double lam = basis_.lambda(j);
            const double em1 = std::expm1(lam * d);
            B_(j) = B_(j) * (1.0 + em1) + A_(j) * em1 / lam;
        }
    }

    template <class E>
    void flipped(const E& eng, int k, int, Direction, double) {
        const auto& h = eng.heights(1);
        for (int j = k - 1; j <= k + 1; ++j)
            if (j >= 1 && j < 2 * n_) set_site(j, h);
    }

    // residual at every site given the current heights and time t
    std::vector<double> residual(const std::vector<int>& h, double t) const {
        const int L = 2 * n_;
        const double s = 1.0 / std::sqrt(2.0 * n_);
        Eigen::VectorXd decay = (basis_.lambda * t).array().exp();
        Eigen::VectorXd init = basis_.S.transpose() * decay.cwiseProduct(h0hat_) / n_;
        Eigen::VectorXd drift = basis_.S.transpose() * B_ / n_;
        std::vector<double> out(L + 1, 0.0);
        for (int l = 1; l < L; ++l) out[l] = s * (h[l] - init(l)) - 2.0 * s * drift(l);
        return out;
    }

private:
    void set_site(int k, const std::vector<int>& h) {
        const double v = (h[k + 1] - 2 * h[k] + h[k - 1]) != 0 ? c_[k] : 0.0;
        const double dv = v - a_[k];
        if (dv == 0.0) return;
        a_[k] = v;
        A_ += dv * basis_.S.col(k);
    }

    int n_;
    SineBasis basis_;
    std::vector<double> c_;
    std::vector<double> a_;
    std::vector<int> h0_;
    Eigen::VectorXd A_, B_, h0hat_;
};

inline std::vector<double> mild_residual(const Trajectory& tr, const RateTable& rates, double t) {
    if (tr.model != ModelKind::Bridge) throw CapabilityError("mild_residual is defined for Model 1 trajectories");
    if (!tr.has_events) throw CapabilityError("mild_residual needs the event log");
    if (t < 0 || t > tr.t_end) throw RangeError("mild_residual: t outside [0, t_end]");
    auto h = std::get<IntegerInterface>(tr.initial).heights;
    MildTracker mt(rates, h);
    struct View {
        const std::vector<int>* h;
        const std::vector<int>& heights(int) const { return *h; }
    } view{&h};
    double last = 0.0;
    for (const auto& e : tr.events) {
        if (e.time > t) break;
        mt.advance(view, last, e.time);
        h[e.site] += e.dir == Direction::Up ? 2 : -2;
        mt.flipped(view, e.site, 1, e.dir, e.time);
        last = e.time;
    }
    mt.advance(view, last, t);
    return mt.residual(h, t);
}

}  // namespace wasep
