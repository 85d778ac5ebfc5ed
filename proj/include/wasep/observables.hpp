#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "continuum.hpp"
#include "dynamics.hpp"
#include "errors.hpp"
#include "lattice.hpp"

namespace wasep {

// ---------------------------------------------------------------- Fourier coefficients

// coefficient of h(k/2N) in <h, e_n>, e_0 = 1, e_n = sqrt2 cos(n pi x), h piecewise linear
inline double c_nk(int N, int n, int k) {
    if (n == 0) return 1.0 / (2.0 * N);
    const double a = n * M_PI;
    return 4.0 * std::sqrt(2.0) * N / (a * a) * std::cos(a * k / (2.0 * N)) * (1.0 - std::cos(a / (2.0 * N)));
}

struct FourierCoefficients {
    int n_modes = 0;
    std::vector<double> values;  // 0..n_modes
};

inline FourierCoefficients fourier(const std::vector<double>& h, int N, int n_modes) {
    if (n_modes < 0) throw ArgumentError("fourier: n_modes must be >= 0");
    FourierCoefficients f;
    f.n_modes = n_modes;
    f.values.assign(n_modes + 1, 0.0);
    for (int n = 0; n <= n_modes; ++n)
        for (int k = 1; k < 2 * N; ++k) f.values[n] += c_nk(N, n, k) * h[k];
    return f;
}

inline FourierCoefficients fourier(const IntegerInterface& f, int n_modes) {
    return fourier(f.scaled(), f.n, n_modes);
}

// ---------------------------------------------------------------- local functionals

struct LocalFunctional {
    int window = 1;
    std::vector<double> table;  // index sum_i eta_i 2^i, eta_0 the first site of the window

    double operator()(unsigned idx) const { return table[idx]; }

    static LocalFunctional make(int l, std::vector<double> t) {
        if (l < 1 || l > 16) throw ArgumentError("local functional window must be in 1..16");
        if (t.size() != (std::size_t(1) << l)) throw ArgumentError("local functional table must have 2^l entries");
        for (double v : t)
            if (!std::isfinite(v)) throw ArgumentError("local functional table must be finite");
        return {l, std::move(t)};
    }

    // 2 eta(1)(1 - eta(2)) + 2 (1 - eta(1)) eta(2)
    static LocalFunctional disagreement() { return make(2, {0.0, 2.0, 2.0, 0.0}); }
};

inline double phi_tilde(const LocalFunctional& phi, double a) {
    if (!(a >= 0 && a <= 1)) throw DomainError("phi_tilde: a must lie in [0,1]");
    double s = 0.0;
    for (std::size_t idx = 0; idx < phi.table.size(); ++idx) {
        const int ones = __builtin_popcountll(idx);
        s += phi.table[idx] * std::pow(a, ones) * std::pow(1.0 - a, phi.window - ones);
    }
    return s;
}

// V(eta) = sum_i | block mean of Phi(shifted eta) - Phi~(block density) |, blocks of
// half-width floor(eps N), indices mod 2N. Phi at j uses the window centred on j;
// for even l it is the mean of the two windows starting at j - l/2 and j - l/2 + 1.
class VStatistic {
public:
    VStatistic(const LocalFunctional& phi, int N, double eps) : phi_(phi), L_(2 * N) {
        w_ = static_cast<int>(std::floor(eps * N));
        if (w_ < 1) throw ArgumentError("v_statistic: floor(eps N) must be >= 1");
        off_ = (phi.window - 1) / 2;
        const int B = 2 * w_ + 1;
        tilde_.resize(B + 1);
        for (int s = 0; s <= B; ++s) tilde_[s] = phi_tilde(phi, static_cast<double>(s) / B);
    }

    int half_width() const { return w_; }

    void reset(const std::vector<int>& bits) {
        b_ = bits;
        const int L = L_;
        val_.assign(L, 0.0);
        for (int j = 0; j < L; ++j) val_[j] = window_value(j);
        sphi_.assign(L, 0.0);
        seta_.assign(L, 0);
        for (int i = 0; i < L; ++i)
            for (int d = -w_; d <= w_; ++d) {
                const int j = mod(i + d);
                sphi_[i] += val_[j];
                seta_[i] += b_[j];
            }
        term_.assign(L, 0.0);
        total_ = 0.0;
        for (int i = 0; i < L; ++i) total_ += term_[i] = term(i);
        since_ = 0;
    }

    double value() const { return total_; }

    // set bit p (0-based) to v
    void set_bit(int p, int v) {
        if (b_[p] == v) return;
        const int dv = v - b_[p];
        b_[p] = v;
        for (int d = -w_; d <= w_; ++d) seta_[mod(p + d)] += dv;
        // values at j read bits j - l/2 .. j + l/2
        for (int s = p - phi_.window / 2; s <= p + phi_.window / 2; ++s) {
            const int j = mod(s);
            const double nv = window_value(j);
            const double dphi = nv - val_[j];
            if (dphi == 0.0) continue;
            val_[j] = nv;
            for (int d = -w_; d <= w_; ++d) sphi_[mod(j + d)] += dphi;
        }
        lo_ = p - phi_.window / 2 - w_;
        hi_ = p + phi_.window / 2 + w_;
        for (int i = lo_; i <= hi_; ++i) {
            const int ii = mod(i);
            const double t = term(ii);
            total_ += t - term_[ii];
            term_[ii] = t;
        }
        if (++since_ >= 4096) {
            total_ = 0.0;
            for (double t : term_) total_ += t;
            since_ = 0;
        }
    }

private:
    int mod(int i) const {
        if (i >= 0 && i < L_) return i;
        if (i < 0 && i >= -L_) return i + L_;
        if (i >= L_ && i < 2 * L_) return i - L_;
        return ((i % L_) + L_) % L_;
    }
    double at(int start) const {
        unsigned idx = 0;
        for (int i = 0; i < phi_.window; ++i) idx |= static_cast<unsigned>(b_[mod(start + i)]) << i;
        return phi_.table[idx];
    }
    double window_value(int j) const {
        if (phi_.window % 2) return at(j - off_);
        return 0.5 * (at(j - phi_.window / 2) + at(j - phi_.window / 2 + 1));
    }
    double term(int i) const { return std::abs(sphi_[i] / (2 * w_ + 1) - tilde_[seta_[i]]); }

    LocalFunctional phi_;
    int L_;
    int w_ = 1;
    int off_ = 0;
    int lo_ = 0, hi_ = 0;
    std::vector<double> tilde_;
    std::vector<int> b_;
    std::vector<double> val_, sphi_, term_;
    std::vector<int> seta_;
    double total_ = 0.0;
    int since_ = 0;
};

inline double v_statistic(const ParticleConfiguration& eta, double eps, const LocalFunctional& phi) {
    if (eta.size() % 2 || eta.size() < phi.window) throw ArgumentError("v_statistic: bad configuration length");
    VStatistic v(phi, eta.size() / 2, eps);
    v.reset(eta.bits);
    return v.value();
}

// observer accumulating int V(eta_s) ds for a single-interface model
class VIntegral {
public:
    VIntegral(const LocalFunctional& phi, const IntegerInterface& h0, double eps)
        : v_(phi, h0.n, eps) {
        v_.reset(to_particles(h0).bits);
    }
    template <class E>
    void advance(const E&, double t0, double t1) {
        integral_ += v_.value() * (t1 - t0);
    }
    template <class E>
    void flipped(const E& eng, int k, int iface, Direction, double) {
        if (iface != 1) return;
        const auto& h = eng.heights(1);
        // a flip at site k swaps eta(k) and eta(k+1), stored at k-1 and k
        v_.set_bit(k - 1, h[k] - h[k - 1] == 1 ? 1 : 0);
        v_.set_bit(k, h[k + 1] - h[k] == 1 ? 1 : 0);
    }
    double integral() const { return integral_; }

private:
    VStatistic v_;
    double integral_ = 0.0;
};

// ---------------------------------------------------------------- martingales

// <h, phi>_N - <h_0, phi>_N - int drift - (+/-) int phi dzeta for one interface.
// With actual_rates the drift uses the rates of the allowed flips and no zeta
// term appears; the two forms coincide identically.
class LinearMartingale {
public:
    LinearMartingale(std::vector<double> weights, int iface, bool formal_drift = true)
        : w_(std::move(weights)), iface_(iface), formal_(formal_drift) {}

    static std::vector<double> pairing_weights(int N, const std::function<double(double)>& phi) {
        if (std::abs(phi(0.0)) > 1e-12 || std::abs(phi(1.0)) > 1e-12)
            throw TestFunctionError("test function must vanish at 0 and 1");
        std::vector<double> w(2 * N + 1, 0.0);
        for (int k = 1; k < 2 * N; ++k) w[k] = phi(site_x(N, k)) / (2.0 * N);
        return w;
    }

    template <class E>
    void start(const E& eng) {
        n_ = eng.n();
        scale_ = 1.0 / std::sqrt(2.0 * n_);
        const int L = 2 * n_;
        rate_.assign(L + 1, 0.0);
        br_.assign(L + 1, 0.0);
        x0_ = pairing(eng.heights(iface_));
        wsq_max_ = 0.0;
        for (int k = 1; k < L; ++k) wsq_max_ = std::max(wsq_max_, w_[k] * w_[k]);
        for (int k = 1; k < L; ++k) refresh(eng, k);
        started_ = true;
    }

    template <class E>
    void advance(const E&, double t0, double t1) {
        const double d = t1 - t0;
        drift_int_ += drift_ * d;
        bracket_int_ += bracket_ * d;
    }

    template <class E>
    void flipped(const E& eng, int k, int, Direction, double) {
        for (int j = k - 1; j <= k + 1; ++j)
            if (j >= 1 && j < 2 * n_) refresh(eng, j);
    }

    // value at time t >= eng.time() given integrals advanced to t
    template <class E>
    double value(const E& eng, double t) const {
        double v = pairing(eng.heights(iface_)) - x0_ - drift_int_;
        if (formal_ && eng.model() != ModelKind::Bridge) {
            double z = 0.0;
            for (int k = 1; k < 2 * n_; ++k) z += w_[k] * 2.0 * n_ * eng.zeta_mass_at(iface_, k, t);
            v += iface_ == 1 ? -z : z;
        }
        return v;
    }

    double bracket_integral() const { return bracket_int_; }
    double bracket_rate() const { return bracket_; }
    // max over the path of bracket integrand / (4 sup phi^2), bounded by 1
    double bracket_ratio_max() const { return bracket_ratio_max_; }

private:
    double pairing(const std::vector<int>& h) const {
        double s = 0.0;
        for (int k = 1; k < 2 * n_; ++k) s += w_[k] * h[k];
        return s * scale_;
    }

    template <class E>
    void refresh(const E& eng, int k) {
        const double up = eng.up_rate(iface_, k);
        const double dn = eng.down_rate(iface_, k);
        double r;
        if (formal_) {
            const RateTable& rt = eng.rates();
            const double L2 = 4.0 * n_ * n_;
            const int lap = eng.lap(iface_, k);
            const double a = lap != 0 ? rt.p[k] - 0.5 * L2 : 0.0;
            r = w_[k] * scale_ * (0.5 * L2 * lap + (iface_ == 1 ? 2.0 : -2.0) * a);
        } else {
            r = w_[k] * scale_ * 2.0 * (up - dn);
        }
        drift_ += r - rate_[k];
        rate_[k] = r;
        // jumps of size 2 w_k / sqrt(2N)
        const double b = 4.0 * w_[k] * w_[k] * scale_ * scale_ * (up + dn);
        bracket_ += b - br_[k];
        br_[k] = b;
        if (wsq_max_ > 0) {
            // 4/(2N)^2 <rate, phi^2>_N over 4 sup phi^2, with phi_k = 2N w_k
            const double L = 2.0 * n_;
            bracket_ratio_max_ = std::max(bracket_ratio_max_, bracket_ / (4.0 * wsq_max_ * L * L));
        }
    }

    std::vector<double> w_;
    int iface_;
    bool formal_;
    bool started_ = false;
    int n_ = 0;
    double scale_ = 1.0;
    double x0_ = 0.0;
    std::vector<double> rate_, br_;
    double drift_ = 0.0, bracket_ = 0.0;
    double drift_int_ = 0.0, bracket_int_ = 0.0;
    double wsq_max_ = 0.0;
    double bracket_ratio_max_ = 0.0;
};

// records several linear martingales at a list of query times
class MartingaleRecorder {
public:
    MartingaleRecorder(std::vector<LinearMartingale> ms, std::vector<double> times)
        : ms_(std::move(ms)), times_(std::move(times)) {
        values_.assign(ms_.size(), std::vector<double>(times_.size(), 0.0));
        brackets_ = values_;
    }

    template <class E>
    void start(const E& eng) {
        for (auto& m : ms_) m.start(eng);
    }

    template <class E>
    void advance(const E& eng, double t0, double t1) {
        double t = t0;
        while (next_ < times_.size() && times_[next_] <= t1) {
            const double q = std::max(times_[next_], t);
            for (auto& m : ms_) m.advance(eng, t, q);
            t = q;
            for (std::size_t i = 0; i < ms_.size(); ++i) {
                values_[i][next_] = ms_[i].value(eng, q);
                brackets_[i][next_] = ms_[i].bracket_integral();
            }
            ++next_;
        }
        for (auto& m : ms_) m.advance(eng, t, t1);
    }

    template <class E>
    void flipped(const E& eng, int k, int iface, Direction d, double t) {
        for (auto& m : ms_) m.flipped(eng, k, iface, d, t);
    }

    const std::vector<double>& values(std::size_t i) const { return values_[i]; }
    const std::vector<double>& brackets(std::size_t i) const { return brackets_[i]; }
    const LinearMartingale& martingale(std::size_t i) const { return ms_[i]; }

private:
    std::vector<LinearMartingale> ms_;
    std::vector<double> times_;
    std::vector<std::vector<double>> values_, brackets_;
    std::size_t next_ = 0;
};

namespace detail {

inline MartingaleRecorder record_martingales(const Trajectory& tr, const RateTable& rates,
                                             std::vector<LinearMartingale> ms, const std::vector<double>& times) {
    check_snapshot_times(times, tr.t_end);
    MartingaleRecorder rec(std::move(ms), times);
    if (!tr.has_events) throw CapabilityError("martingales need the event log");
    Engine eng(tr.model, tr.initial, rates);
    eng.set_recording(false, false);
    rec.start(eng);
    for (const auto& e : tr.events) eng.replay(e, rec);
    eng.idle_until(tr.t_end, rec);
    return rec;
}

}  // namespace detail

inline std::vector<double> martingale_M(const Trajectory& tr, const RateTable& rates,
                                        const std::function<double(double)>& phi, const std::vector<double>& times,
                                        int iface = 1) {
    auto w = LinearMartingale::pairing_weights(rates.n, phi);
    return detail::record_martingales(tr, rates, {LinearMartingale(w, iface)}, times).values(0);
}

inline std::vector<double> martingale_L(const Trajectory& tr, const RateTable& rates,
                                        const std::function<double(double)>& phi, const std::vector<double>& times,
                                        int iface = 1) {
    auto w = LinearMartingale::pairing_weights(rates.n, phi);
    auto rec = detail::record_martingales(tr, rates, {LinearMartingale(w, iface)}, times);
    std::vector<double> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) out[i] = rec.values(0)[i] * rec.values(0)[i] - rec.brackets(0)[i];
    return out;
}

inline std::vector<double> martingale_K(const Trajectory& tr, const RateTable& rates,
                                        const std::function<double(double)>& phi,
                                        const std::function<double(double)>& psi, const std::vector<double>& times) {
    if (tr.model != ModelKind::Pair) throw CapabilityError("martingale_K needs a Model 2 trajectory");
    auto w1 = LinearMartingale::pairing_weights(rates.n, phi);
    auto w2 = LinearMartingale::pairing_weights(rates.n, psi);
    auto rec = detail::record_martingales(tr, rates, {LinearMartingale(w1, 1), LinearMartingale(w2, 2)}, times);
    std::vector<double> out(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) out[i] = rec.values(0)[i] * rec.values(1)[i];
    return out;
}

// weights c_{n,k} for the Fourier martingale of mode n
inline std::vector<double> fourier_weights(int N, int n) {
    std::vector<double> w(2 * N + 1, 0.0);
    for (int k = 1; k < 2 * N; ++k) w[k] = c_nk(N, n, k);
    return w;
}

// ---------------------------------------------------------------- norms

// midpoint double quadrature, diagonal cells excluded
inline double slobodeckij_norm(const GridFunction& h, double eta, double r) {
    if (!(eta > 0 && eta < 1) || !(r >= 1)) throw ArgumentError("slobodeckij_norm: need 0 < eta < 1 and r >= 1");
    const int m = h.m;
    std::vector<double> mid(m);
    for (int i = 0; i < m; ++i) mid[i] = 0.5 * (h.values[i] + h.values[i + 1]);
    double single = 0.0;
    for (int i = 0; i < m; ++i) single += std::pow(std::abs(mid[i]), r);
    single /= m;
    const double e = eta * r + 1.0;
    // |x_i - x_j| = |i-j|/m; precompute the kernel per distance
    std::vector<double> ker(m);
    for (int d = 1; d < m; ++d) ker[d] = std::pow(static_cast<double>(d) / m, -e);
    double dbl = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) dbl += std::pow(std::abs(mid[i] - mid[j]), r) * ker[j - i];
    dbl *= 2.0 / (static_cast<double>(m) * m);
    return std::pow(single + dbl, 1.0 / r);
}

// ---------------------------------------------------------------- metric on measures

namespace detail {

inline double smooth_step(double s) {
    if (s <= 0) return 0.0;
    if (s >= 1) return 1.0;
    const double a = std::exp(-1.0 / s);
    const double b = std::exp(-1.0 / (1.0 - s));
    return a / (a + b);
}

}  // namespace detail

// k-th test function (k >= 1): x(1-x) t^a x^b rho_p(t), enumerated by p = 1, 2, ...,
// then total degree a + b = 0..3, then a = 0..deg; rho_p = 1 on [0,p], 0 beyond p+1
inline std::function<double(double, double)> metric_test_function(int k) {
    if (k < 1) throw ArgumentError("metric test functions are indexed from 1");
    const int p = (k - 1) / 10 + 1;
    int r = (k - 1) % 10;
    int deg = 0;
    while (r >= deg + 1) {
        r -= deg + 1;
        ++deg;
    }
    const int a = r;
    const int b = deg - a;
    return [p, a, b](double t, double x) {
        return x * (1 - x) * std::pow(t, a) * std::pow(x, b) * (1.0 - detail::smooth_step(t - p));
    };
}

inline double measure_distance(const ReflectionMeasure& z1, const ReflectionMeasure& z2, int k_max) {
    if (k_max < 1) throw ArgumentError("measure_distance: k_max must be >= 1");
    if (!z1.has_log || !z2.has_log) throw CapabilityError("measure_distance needs the pinned-interval logs");
    double d = 0.0;
    for (int k = 1; k <= k_max; ++k) {
        auto f = metric_test_function(k);
        const double diff = std::abs(zeta_integral(z1, f) - zeta_integral(z2, f));
        d += std::ldexp(std::min(1.0, diff), -k);
    }
    return d;
}

// ---------------------------------------------------------------- export

struct ObservableRow {
    double time;
    std::string name;
    double value;
    int run_id;
    std::uint64_t seed;
};

inline void write_observables_csv(std::ostream& os, const std::vector<ObservableRow>& rows) {
    os << "time,name,value,run_id,seed\n" << std::setprecision(17);
    for (const auto& r : rows) os << r.time << ',' << r.name << ',' << r.value << ',' << r.run_id << ',' << r.seed << '\n';
}

}  // namespace wasep
