#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <iomanip>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "lattice.hpp"
#include "rng.hpp"

namespace wasep {

// ---------------------------------------------------------------- counting

inline double log_binomial(int n, int k) {
    if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline double log_catalan(int n) { return log_binomial(2 * n, n) - std::log(n + 1.0); }

// log of C(2N,2m) C(2m,m) Cat(N-m), the number of pairs whose decomposition has size m
inline double log_pair_class_weight(int n, int m) {
    return log_binomial(2 * n, 2 * m) + log_binomial(2 * m, m) + log_catalan(n - m);
}

inline double state_count(ModelKind model, int n) {
    if (model == ModelKind::Bridge) return std::round(std::exp(log_binomial(2 * n, n)));
    if (model == ModelKind::BridgeWall) return std::round(std::exp(log_catalan(n)));
    double s = 0.0;
    for (int m = 0; m <= n; ++m) s += std::round(std::exp(log_pair_class_weight(n, m)));
    return s;
}

// ---------------------------------------------------------------- enumeration

struct StateEnumeration {
    ModelKind model = ModelKind::Bridge;
    int n = 0;
    std::vector<State> states;
    std::map<State, int> index;

    int size() const { return static_cast<int>(states.size()); }

    int find(const State& s) const {
        auto it = index.find(s);
        if (it == index.end()) throw DataError("state is not in the enumeration");
        return it->second;
    }
};

namespace detail {

inline void extend_paths(int n, bool wall, std::vector<int>& h, std::vector<IntegerInterface>& out) {
    const int k = static_cast<int>(h.size()) - 1;
    if (k == 2 * n) {
        if (h.back() == 0) out.emplace_back(n, h);
        return;
    }
    const int remaining = 2 * n - k;
    for (int d : {1, -1}) {
        const int v = h.back() + d;
        if (std::abs(v) > remaining - 1) continue;
        if (wall && v < 0) continue;
        h.push_back(v);
        extend_paths(n, wall, h, out);
        h.pop_back();
    }
}

inline std::vector<IntegerInterface> all_paths(int n, bool wall) {
    std::vector<IntegerInterface> out;
    std::vector<int> h{0};
    extend_paths(n, wall, h, out);
    return out;
}

}  // namespace detail

inline StateEnumeration enumerate_states(ModelKind model, int n, double cap = 1e7) {
    if (n < 1) throw ArgumentError("enumerate_states: n must be >= 1");
    if (state_count(model, n) > cap) throw ResourceError("state space larger than the enumeration cap");
    StateEnumeration e;
    e.model = model;
    e.n = n;
    if (model == ModelKind::Pair) {
        auto paths = detail::all_paths(n, false);
        for (const auto& u : paths)
            for (const auto& l : paths) {
                bool ok = true;
                for (int k = 1; k < 2 * n && ok; ++k) ok = u.heights[k] >= l.heights[k];
                if (ok) e.states.push_back(PairInterface{u, l});
            }
    } else {
        for (auto& p : detail::all_paths(n, model == ModelKind::BridgeWall)) e.states.push_back(std::move(p));
    }
    for (int i = 0; i < e.size(); ++i) e.index.emplace(e.states[i], i);
    return e;
}

// ---------------------------------------------------------------- Gibbs measure

struct GibbsMeasure {
    std::shared_ptr<const StateEnumeration> enumeration;
    std::vector<double> weights;
    std::vector<double> log_weights;  // normalised
    double log_partition = 0.0;

    int size() const { return static_cast<int>(weights.size()); }
};

inline double log_sum_exp(const std::vector<double>& v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

inline GibbsMeasure gibbs_measure(std::shared_ptr<const StateEnumeration> e, const RateTable& rates) {
    if (e->n != rates.n) throw DimensionError("enumeration and rates have different N");
    GibbsMeasure mu;
    mu.enumeration = e;
    std::vector<double> lw(e->size());
    for (int i = 0; i < e->size(); ++i) lw[i] = scaled_area(e->states[i], rates);
    mu.log_partition = log_sum_exp(lw);
    mu.log_weights.resize(lw.size());
    mu.weights.resize(lw.size());
    for (std::size_t i = 0; i < lw.size(); ++i) {
        mu.log_weights[i] = lw[i] - mu.log_partition;
        mu.weights[i] = std::exp(mu.log_weights[i]);
    }
    return mu;
}

inline GibbsMeasure gibbs_measure(const StateEnumeration& e, const RateTable& rates) {
    return gibbs_measure(std::make_shared<const StateEnumeration>(e), rates);
}

// ---------------------------------------------------------------- generator

struct RateEntry {
    int row;
    int col;
    double rate;
};

struct GeneratorMatrix {
    int dimension = 0;
    std::vector<RateEntry> entries;  // off-diagonal
    std::vector<double> diagonal;

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dimension, dimension);
        for (const auto& e : entries) m(e.row, e.col) += e.rate;
        for (int i = 0; i < dimension; ++i) m(i, i) = diagonal[i];
        return m;
    }

    double max_row_sum() const {
        std::vector<double> s(diagonal);
        for (const auto& e : entries) s[e.row] += e.rate;
        double m = 0.0;
        for (double v : s) m = std::max(m, std::abs(v));
        return m;
    }
};

inline GeneratorMatrix generator_matrix(const StateEnumeration& e, const RateTable& rates) {
    if (e.n != rates.n) throw DimensionError("enumeration and rates have different N");
    GeneratorMatrix g;
    g.dimension = e.size();
    g.diagonal.assign(e.size(), 0.0);
    for (int i = 0; i < e.size(); ++i) {
        for (const auto& f : allowed_flips(e.states[i], e.model)) {
            const int j = e.find(apply_flip(e.states[i], f));
            const double r = flip_rate(f, rates);
            g.entries.push_back({i, j, r});
            g.diagonal[i] -= r;
        }
    }
    return g;
}

inline double detailed_balance_check(const GeneratorMatrix& g, const std::vector<double>& mu) {
    std::map<std::pair<int, int>, double> rate;
    for (const auto& e : g.entries) rate[{e.row, e.col}] += e.rate;
    double worst = 0.0;
    for (const auto& [ij, r] : rate) {
        auto back = rate.find({ij.second, ij.first});
        const double rb = back == rate.end() ? 0.0 : back->second;
        const double a = mu[ij.first] * r;
        const double b = mu[ij.second] * rb;
        worst = std::max(worst, std::abs(a - b) / std::max(1.0, a));
    }
    return worst;
}

inline double detailed_balance_check(const GeneratorMatrix& g, const GibbsMeasure& mu) {
    return detailed_balance_check(g, mu.weights);
}

// || mu^T L ||_inf
inline double stationarity_residual(const GeneratorMatrix& g, const std::vector<double>& mu) {
    std::vector<double> r(g.dimension, 0.0);
    for (int i = 0; i < g.dimension; ++i) r[i] += mu[i] * g.diagonal[i];
    for (const auto& e : g.entries) r[e.col] += mu[e.row] * e.rate;
    double m = 0.0;
    for (double v : r) m = std::max(m, std::abs(v));
    return m;
}

// ---------------------------------------------------------------- samplers

inline IntegerInterface steps_to_interface(const std::vector<int>& steps) {
    IntegerInterface f;
    f.n = static_cast<int>(steps.size()) / 2;
    f.heights.assign(steps.size() + 1, 0);
    for (std::size_t k = 0; k < steps.size(); ++k) f.heights[k + 1] = f.heights[k] + steps[k];
    return f;
}

inline std::vector<int> interface_steps(const IntegerInterface& f) {
    std::vector<int> s(2 * f.n);
    for (int k = 0; k < 2 * f.n; ++k) s[k] = f.heights[k + 1] - f.heights[k];
    return s;
}

inline IntegerInterface uniform_bridge(int n, Rng& rng) {
    std::vector<int> s(2 * n);
    for (int k = 0; k < 2 * n; ++k) s[k] = k < n ? 1 : -1;
    for (int k = 2 * n - 1; k > 0; --k) std::swap(s[k], s[rng.below(k + 1)]);
    return steps_to_interface(s);
}

// cycle lemma: exactly one rotation of a sequence of n+1 ups and n downs has all
// partial sums positive; dropping its leading up leaves a uniform Dyck path
inline IntegerInterface uniform_excursion(int n, Rng& rng) {
    const int len = 2 * n + 1;
    std::vector<int> s(len);
    for (int k = 0; k < len; ++k) s[k] = k <= n ? 1 : -1;
    for (int k = len - 1; k > 0; --k) std::swap(s[k], s[rng.below(k + 1)]);
    // rotation start = index after the last minimum of the partial sums
    int sum = 0, best = 0, start = 0;
    for (int k = 0; k < len; ++k) {
        sum += s[k];
        if (sum <= best) {
            best = sum;
            start = k + 1;
        }
    }
    std::vector<int> d;
    d.reserve(2 * n);
    for (int k = 1; k < len; ++k) d.push_back(s[(start + k) % len]);
    return steps_to_interface(d);
}

// cyclic shift of the steps after the first global minimum
inline IntegerInterface vervaat(const IntegerInterface& bridge) {
    if (!is_bridge(bridge)) throw PreconditionError("vervaat: input is not a bridge");
    const int L = 2 * bridge.n;
    int kmin = 0;
    for (int k = 1; k <= L; ++k)
        if (bridge.heights[k] < bridge.heights[kmin]) kmin = k;
    auto s = interface_steps(bridge);
    std::rotate(s.begin(), s.begin() + (kmin % std::max(L, 1)), s.end());
    return steps_to_interface(s);
}

// ---------------------------------------------------------------- mod-2 decomposition

struct Mod2Decomposition {
    IntegerInterface s_tilde;  // bridge of size n
    IntegerInterface d_tilde;  // excursion of size N - n
    std::vector<int> iota;     // sorted step indices in 1..2N
};

inline Mod2Decomposition mod2_encode(const PairInterface& p) {
    if (!is_valid(p)) throw PreconditionError("mod2_encode: invalid pair");
    const auto su = interface_steps(p.upper);
    const auto sl = interface_steps(p.lower);
    Mod2Decomposition d;
    std::vector<int> s, e;
    for (int i = 0; i < 2 * p.n(); ++i) {
        if (su[i] == sl[i]) {
            d.iota.push_back(i + 1);
            s.push_back(su[i]);
        } else {
            e.push_back(su[i]);  // up-down is an up step of the excursion
        }
    }
    d.s_tilde = steps_to_interface(s);
    d.d_tilde = steps_to_interface(e);
    return d;
}

inline PairInterface mod2_decode(const Mod2Decomposition& d) {
    const int ni = static_cast<int>(d.iota.size());
    if (ni % 2) throw DecodeError("iota must have even size");
    if (!is_bridge(d.s_tilde) || 2 * d.s_tilde.n != ni) throw DecodeError("s_tilde must be a bridge with |iota| steps");
    if (!is_excursion(d.d_tilde)) throw DecodeError("d_tilde must be an excursion");
    const int n = d.s_tilde.n + d.d_tilde.n;
    if (n < 1) throw DecodeError("empty decomposition");
    std::vector<char> in(2 * n + 1, 0);
    for (int i = 0; i < ni; ++i) {
        if (d.iota[i] < 1 || d.iota[i] > 2 * n || (i && d.iota[i] <= d.iota[i - 1]))
            throw DecodeError("iota must be strictly increasing within 1..2N");
        in[d.iota[i]] = 1;
    }
    const auto ss = interface_steps(d.s_tilde);
    const auto se = interface_steps(d.d_tilde);
    std::vector<int> su, sl;
    std::size_t a = 0, b = 0;
    for (int i = 1; i <= 2 * n; ++i) {
        if (in[i]) {
            su.push_back(ss[a]);
            sl.push_back(ss[a]);
            ++a;
        } else {
            su.push_back(se[b]);
            sl.push_back(-se[b]);
            ++b;
        }
    }
    return PairInterface{steps_to_interface(su), steps_to_interface(sl)};
}

inline std::vector<double> pair_class_probabilities(int n) {
    std::vector<double> lw(n + 1);
    for (int m = 0; m <= n; ++m) lw[m] = log_pair_class_weight(n, m);
    const double z = log_sum_exp(lw);
    std::vector<double> p(n + 1);
    for (int m = 0; m <= n; ++m) p[m] = std::exp(lw[m] - z);
    return p;
}

inline PairInterface uniform_pair(int n, Rng& rng, const std::vector<double>& class_prob) {
    double u = rng.uniform();
    int m = 0;
    while (m < n && u >= class_prob[m]) u -= class_prob[m++];
    Mod2Decomposition d;
    d.s_tilde = m ? uniform_bridge(m, rng) : IntegerInterface::flat(0);
    d.d_tilde = m < n ? uniform_excursion(n - m, rng) : IntegerInterface::flat(0);
    // uniform 2m-subset by partial shuffle
    std::vector<int> idx(2 * n);
    std::iota(idx.begin(), idx.end(), 1);
    for (int i = 0; i < 2 * m; ++i) std::swap(idx[i], idx[i + rng.below(2 * n - i)]);
    d.iota.assign(idx.begin(), idx.begin() + 2 * m);
    std::sort(d.iota.begin(), d.iota.end());
    return mod2_decode(d);
}

inline State uniform_sample(ModelKind model, int n, Rng& rng) {
    if (n < 1) throw ArgumentError("uniform_sample: n must be >= 1");
    switch (model) {
        case ModelKind::Bridge: return uniform_bridge(n, rng);
        case ModelKind::BridgeWall: return uniform_excursion(n, rng);
        case ModelKind::Pair: return uniform_pair(n, rng, pair_class_probabilities(n));
    }
    return {};
}

inline State uniform_sample(ModelKind model, int n, std::uint64_t seed) {
    Rng rng(seed);
    return uniform_sample(model, n, rng);
}

// ---------------------------------------------------------------- exact Gibbs sampler

// Transfer-matrix sampler for the area-tilted measure of any of the three models.
// Backward messages are stored in log form over (site, height) or (site, h1, h2).
class GibbsSampler {
public:
    GibbsSampler(ModelKind model, const RateTable& rates) : model_(model), n_(rates.n), theta_(rates.log_ratio) {
        const int L = 2 * n_;
        W_ = 2 * n_ + 1;
        const double NEG = -std::numeric_limits<double>::infinity();
        if (model_ != ModelKind::Pair) {
            back_.assign(static_cast<std::size_t>(L + 1) * W_, NEG);
            at(L, 0) = 0.0;
            for (int k = L - 1; k >= 0; --k)
                for (int H = lo(); H <= n_; ++H) {
                    double a = NEG, b = NEG;
                    if (H + 1 <= n_) a = at(k + 1, H + 1) + site_w(k + 1, H + 1);
                    if (H - 1 >= lo()) b = at(k + 1, H - 1) + site_w(k + 1, H - 1);
                    at(k, H) = lse(a, b);
                }
        } else {
            back_.assign(static_cast<std::size_t>(L + 1) * W_ * W_, NEG);
            at2(L, 0, 0) = 0.0;
            for (int k = L - 1; k >= 0; --k)
                for (int u = -n_; u <= n_; ++u)
                    for (int l = -n_; l <= u; ++l) {
                        double acc = NEG;
                        for (int du : {1, -1})
                            for (int dl : {1, -1}) {
                                const int u2 = u + du, l2 = l + dl;
                                if (std::abs(u2) > n_ || std::abs(l2) > n_ || l2 > u2) continue;
                                acc = lse(acc, at2(k + 1, u2, l2) + site_w(k + 1, u2 - l2));
                            }
                        at2(k, u, l) = acc;
                    }
        }
    }

    double log_partition() const { return model_ == ModelKind::Pair ? at2c(0, 0, 0) : atc(0, 0); }

    State sample(Rng& rng) const {
        const int L = 2 * n_;
        if (model_ != ModelKind::Pair) {
            std::vector<int> h(L + 1, 0);
            for (int k = 0; k < L; ++k) {
                const int H = h[k];
                const double a = H + 1 <= n_ ? atc(k + 1, H + 1) + site_w(k + 1, H + 1) : -INFINITY;
                const double b = H - 1 >= lo() ? atc(k + 1, H - 1) + site_w(k + 1, H - 1) : -INFINITY;
                const double pu = 1.0 / (1.0 + std::exp(b - a));
                h[k + 1] = rng.uniform() < pu ? H + 1 : H - 1;
            }
            return IntegerInterface(n_, h);
        }
        std::vector<int> hu(L + 1, 0), hl(L + 1, 0);
        for (int k = 0; k < L; ++k) {
            double w[4];
            int cu[4], cl[4];
            int c = 0;
            double mx = -INFINITY;
            for (int du : {1, -1})
                for (int dl : {1, -1}) {
                    const int u2 = hu[k] + du, l2 = hl[k] + dl;
                    cu[c] = u2;
                    cl[c] = l2;
                    w[c] = (std::abs(u2) > n_ || std::abs(l2) > n_ || l2 > u2)
                               ? -INFINITY
                               : at2c(k + 1, u2, l2) + site_w(k + 1, u2 - l2);
                    mx = std::max(mx, w[c]);
                    ++c;
                }
            double tot = 0;
            for (double& x : w) tot += (x = std::exp(x - mx));
            double u = rng.uniform() * tot;
            int j = 0;
            while (j < 3 && (u >= w[j] || w[j] == 0.0)) {
                u -= w[j];
                ++j;
            }
            while (w[j] == 0.0) --j;
            hu[k + 1] = cu[j];
            hl[k + 1] = cl[j];
        }
        return PairInterface{IntegerInterface(n_, hu), IntegerInterface(n_, hl)};
    }

    // exact one-site law of H_k (single-interface models): mean and variance of h = H / sqrt(2N)
    void site_moments(std::vector<double>& mean, std::vector<double>& var) const {
        if (model_ == ModelKind::Pair) throw CapabilityError("site_moments is for single-interface models");
        const int L = 2 * n_;
        std::vector<double> fwd(static_cast<std::size_t>(L + 1) * W_, -INFINITY);
        fwd[idx(0, 0)] = 0.0;
        for (int k = 1; k <= L; ++k)
            for (int H = lo(); H <= n_; ++H) {
                double a = H - 1 >= lo() ? fwd[idx(k - 1, H - 1)] : -INFINITY;
                double b = H + 1 <= n_ ? fwd[idx(k - 1, H + 1)] : -INFINITY;
                fwd[idx(k, H)] = lse(a, b) + site_w(k, H);
            }
        const double z = log_partition();
        const double s = 1.0 / std::sqrt(2.0 * n_);
        mean.assign(L + 1, 0.0);
        var.assign(L + 1, 0.0);
        for (int k = 0; k <= L; ++k) {
            double m1 = 0, m2 = 0;
            for (int H = lo(); H <= n_; ++H) {
                const double lp = fwd[idx(k, H)] + atc(k, H) - z;
                if (!std::isfinite(lp)) continue;
                const double p = std::exp(lp);
                m1 += p * H * s;
                m2 += p * H * H * s * s;
            }
            mean[k] = m1;
            var[k] = m2 - m1 * m1;
        }
    }

private:
    static double lse(double a, double b) {
        if (a == -INFINITY) return b;
        if (b == -INFINITY) return a;
        const double m = std::max(a, b);
        return m + std::log1p(std::exp(-std::abs(a - b)));
    }
    int lo() const { return model_ == ModelKind::BridgeWall ? 0 : -n_; }
    double site_w(int k, int H) const { return k < 2 * n_ ? 0.5 * theta_[k] * H : 0.0; }
    std::size_t idx(int k, int H) const { return static_cast<std::size_t>(k) * W_ + (H + n_); }
    double& at(int k, int H) { return back_[idx(k, H)]; }
    double atc(int k, int H) const { return back_[idx(k, H)]; }
    std::size_t idx2(int k, int u, int l) const {
        return (static_cast<std::size_t>(k) * W_ + (u + n_)) * W_ + (l + n_);
    }
    double& at2(int k, int u, int l) { return back_[idx2(k, u, l)]; }
    double at2c(int k, int u, int l) const { return back_[idx2(k, u, l)]; }

    ModelKind model_;
    int n_;
    int W_;
    std::vector<double> theta_;
    std::vector<double> back_;
};

// ---------------------------------------------------------------- Dirichlet form and eigenvalues

// D(f) = sum_eta mu(eta) sum over p-rate flips eta -> eta' of p_k (sqrt f(eta') - sqrt f(eta))^2
inline double dirichlet_form(const std::vector<double>& f, const GibbsMeasure& mu, const RateTable& rates) {
    const auto& e = *mu.enumeration;
    if (static_cast<int>(f.size()) != e.size()) throw DimensionError("f has the wrong length");
    for (double v : f)
        if (v < 0 || !std::isfinite(v)) throw DomainError("dirichlet_form needs f >= 0");
    double d = 0.0;
    for (int i = 0; i < e.size(); ++i) {
        const double si = std::sqrt(f[i]);
        for (const auto& fl : allowed_flips(e.states[i], e.model)) {
            if (fl.kind != RateKind::P) continue;
            const int j = e.find(apply_flip(e.states[i], fl));
            const double diff = std::sqrt(f[j]) - si;
            d += mu.weights[i] * rates.p[fl.site] * diff * diff;
        }
    }
    return d;
}

struct EigenResult {
    double value = 0.0;
    std::vector<double> eigenfunction;  // de-symmetrised, sign-normalised
};

inline EigenResult principal_eigen(const GeneratorMatrix& g, const std::vector<double>& mu,
                                   const std::vector<double>& potential, double a, int cap = 5000) {
    const int d = g.dimension;
    if (d > cap) throw ResourceError("generator dimension exceeds the eigensolver cap");
    if (static_cast<int>(potential.size()) != d || static_cast<int>(mu.size()) != d)
        throw DimensionError("potential / measure length mismatch");
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
    for (const auto& e : g.entries) S(e.row, e.col) += e.rate * std::sqrt(mu[e.row] / mu[e.col]);
    for (int i = 0; i < d; ++i) S(i, i) = g.diagonal[i] + a * potential[i];
    // symmetrise away rounding
    Eigen::MatrixXd Sym = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sym);
    EigenResult r;
    r.value = es.eigenvalues()(d - 1);
    Eigen::VectorXd v = es.eigenvectors().col(d - 1);
    r.eigenfunction.resize(d);
    double sgn = v.sum() >= 0 ? 1.0 : -1.0;
    for (int i = 0; i < d; ++i) r.eigenfunction[i] = sgn * v(i) / std::sqrt(mu[i]);
    return r;
}

inline double principal_eigenvalue(const GeneratorMatrix& g, const GibbsMeasure& mu,
                                   const std::vector<double>& potential, double a, int cap = 5000) {
    return principal_eigen(g, mu.weights, potential, a, cap).value;
}

// sup over f >= 0 with mu[f] = 1 of a mu[V f] - D(f), by shifted power iteration on
// g = sqrt f using only the flip structure (no generator matrix, no eigensolver)
inline double variational_supremum(const GibbsMeasure& mu, const RateTable& rates, const std::vector<double>& V,
                                   double a, int max_iter = 2000000, double tol = 1e-15) {
    const auto& e = *mu.enumeration;
    const int d = e.size();
    struct Move {
        int i, j;
        double w;  // mu_i p
    };
    std::vector<Move> moves;
    for (int i = 0; i < d; ++i)
        for (const auto& fl : allowed_flips(e.states[i], e.model))
            if (fl.kind == RateKind::P)
                moves.push_back({i, e.find(apply_flip(e.states[i], fl)), mu.weights[i] * rates.p[fl.site]});
    auto objective = [&](const std::vector<double>& g) {
        double v = 0.0, dir = 0.0;
        for (int i = 0; i < d; ++i) v += mu.weights[i] * V[i] * g[i] * g[i];
        for (const auto& m : moves) dir += m.w * (g[m.j] - g[m.i]) * (g[m.j] - g[m.i]);
        return a * v - dir;
    };
    // gradient of the quadratic form in the mu inner product, halved
    double shift = 0.0;
    std::vector<double> deg(d, 0.0);
    for (const auto& m : moves) {
        deg[m.i] += m.w / mu.weights[m.i];
        deg[m.j] += m.w / mu.weights[m.j];
    }
    for (int i = 0; i < d; ++i) shift = std::max(shift, 2.0 * deg[i] + std::abs(a * V[i]));
    shift += 1.0;
    std::vector<double> g(d, 1.0), h(d);
    double prev = objective(g);
    for (int it = 0; it < max_iter; ++it) {
        for (int i = 0; i < d; ++i) h[i] = (shift + a * V[i]) * g[i];
        for (const auto& m : moves) {
            const double c = m.w * (g[m.j] - g[m.i]);
            h[m.i] += c / mu.weights[m.i];
            h[m.j] -= c / mu.weights[m.j];
        }
        double nrm = 0.0;
        for (int i = 0; i < d; ++i) nrm += mu.weights[i] * h[i] * h[i];
        nrm = std::sqrt(nrm);
        for (int i = 0; i < d; ++i) g[i] = std::max(0.0, h[i] / nrm);
        const double cur = objective(g);
        if (std::abs(cur - prev) < tol * std::max(1.0, std::abs(cur)) && it > 10) return cur;
        prev = cur;
    }
    return prev;
}

// ---------------------------------------------------------------- export

inline void write_gibbs_csv(std::ostream& os, const GibbsMeasure& mu) {
    os << "state_id,serialized_heights,log_weight\n" << std::setprecision(17);
    for (int i = 0; i < mu.size(); ++i)
        os << i << ",\"" << heights_string(mu.enumeration->states[i]) << "\"," << mu.log_weights[i] << '\n';
}

inline void write_generator_csv(std::ostream& os, const GeneratorMatrix& g) {
    os << "row,col,rate\n" << std::setprecision(17);
    for (const auto& e : g.entries) os << e.row << ',' << e.col << ',' << e.rate << '\n';
    for (int i = 0; i < g.dimension; ++i) os << i << ',' << i << ',' << g.diagonal[i] << '\n';
}

}  // namespace wasep
