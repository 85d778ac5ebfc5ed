#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "errors.hpp"
#include "lattice.hpp"
#include "rng.hpp"

namespace wasep {

struct Event {
    double time;
    int site;
    int iface;
    Direction dir;
};

struct Snapshot {
    double time;
    State state;
};

struct Trajectory {
    ModelKind model = ModelKind::Bridge;
    State initial;
    std::vector<Event> events;
    double t_end = 0.0;
    std::vector<Snapshot> snapshots;
    bool has_events = true;
};

struct PinnedInterval {
    int site;
    double t_start;
    double t_end;
};

struct ReflectionMeasure {
    int n = 0;
    std::vector<double> mass_per_site;  // 0..2N, ends unused
    std::vector<double> density;        // 2 q_k / (2N)^{3/2}
    std::vector<PinnedInterval> interval_log;
    bool has_log = false;

    double total_mass() const {
        double s = 0.0;
        for (double m : mass_per_site) s += m;
        return s;
    }

    double interval_mass(const PinnedInterval& iv) const { return density[iv.site] * (iv.t_end - iv.t_start); }

    static ReflectionMeasure zero(const RateTable& r) {
        ReflectionMeasure z;
        z.n = r.n;
        z.mass_per_site.assign(2 * r.n + 1, 0.0);
        z.density.assign(2 * r.n + 1, 0.0);
        const double c = 2.0 * std::pow(2.0 * r.n, -1.5);
        for (int k = 1; k < 2 * r.n; ++k) z.density[k] = c * r.q[k];
        z.has_log = true;
        return z;
    }
};

struct SimOptions {
    bool record_events = true;
    bool record_intervals = true;
    std::uint64_t max_events = 0;  // 0 = no limit
};

struct SimResult {
    Trajectory traj;
    ReflectionMeasure zeta;   // BridgeWall, or upper of Pair
    ReflectionMeasure zeta2;  // lower of Pair
};

namespace detail {

class IndexedSet {
public:
    void reset(int capacity) {
        items_.clear();
        pos_.assign(capacity, -1);
    }
    bool contains(int k) const { return pos_[k] >= 0; }
    void insert(int k) {
        if (pos_[k] >= 0) return;
        pos_[k] = static_cast<int>(items_.size());
        items_.push_back(k);
    }
    void erase(int k) {
        int i = pos_[k];
        if (i < 0) return;
        int last = items_.back();
        items_[i] = last;
        pos_[last] = i;
        items_.pop_back();
        pos_[k] = -1;
    }
    void set(int k, bool on) { on ? insert(k) : erase(k); }
    int size() const { return static_cast<int>(items_.size()); }
    int operator[](int i) const { return items_[i]; }

private:
    std::vector<int> items_;
    std::vector<int> pos_;
};

}  // namespace detail

struct NullObserver {
    template <class E>
    void advance(const E&, double, double) {}
    template <class E>
    void flipped(const E&, int, int, Direction, double) {}
};

// Exact continuous-time corner-flip dynamics. Candidate flips are kept in four
// classes (upper up, upper down, lower up, lower down); a class is picked with
// probability size * max-rate / total and the candidate is accepted with
// probability rate / max-rate.
class Engine {
public:
    Engine(ModelKind model, const State& initial, const RateTable& rates)
        : model_(model), rates_(rates), n_(rates.n) {
        require_valid(initial, model);
        if (state_n(initial) != rates.n) throw DimensionError("state and rate table have different N");
        if (model == ModelKind::Pair) {
            const auto& p = std::get<PairInterface>(initial);
            h_[0] = p.upper.heights;
            h_[1] = p.lower.heights;
        } else {
            h_[0] = std::get<IntegerInterface>(initial).heights;
        }
        const int L = 2 * n_;
        double pmax = 0, qmax = 0;
        for (int k = 1; k < L; ++k) {
            pmax = std::max(pmax, rates_.p[k]);
            qmax = std::max(qmax, rates_.q[k]);
        }
        // class 0: upper up (p); 1: upper down (q); 2: lower up (q); 3: lower down (p)
        cmax_[0] = pmax;
        cmax_[1] = qmax;
        cmax_[2] = qmax;
        cmax_[3] = pmax;
        for (auto& c : cls_) c.reset(L + 1);
        for (auto& b : blocked_) b.reset(L + 1);
        zeta_[0] = ReflectionMeasure::zero(rates_);
        zeta_[1] = ReflectionMeasure::zero(rates_);
        for (auto& s : start_) s.assign(L + 1, 0.0);
        for (int k = 1; k < L; ++k) refresh(k);
    }

    ModelKind model() const { return model_; }
    int n() const { return n_; }
    double time() const { return t_; }
    const RateTable& rates() const { return rates_; }
    const std::vector<int>& heights(int iface = 1) const { return h_[iface - 1]; }
    bool blocked(int iface, int k) const { return blocked_[iface - 1].contains(k); }
    std::uint64_t event_count() const { return n_events_; }
    std::uint64_t proposal_count() const { return n_proposals_; }

    int lap(int iface, int k) const {
        const auto& h = h_[iface - 1];
        return h[k + 1] - 2 * h[k] + h[k - 1];
    }

    // rate at which site k of iface moves up / down in the current state
    double up_rate(int iface, int k) const {
        return cls_[iface == 1 ? 0 : 2].contains(k) ? (iface == 1 ? rates_.p[k] : rates_.q[k]) : 0.0;
    }
    double down_rate(int iface, int k) const {
        return cls_[iface == 1 ? 1 : 3].contains(k) ? (iface == 1 ? rates_.q[k] : rates_.p[k]) : 0.0;
    }

    // zeta mass of iface at site k accumulated up to the current time (open interval included)
    double zeta_mass_now(int iface, int k) const {
        const auto& z = zeta_[iface - 1];
        double m = z.mass_per_site[k];
        if (blocked_[iface - 1].contains(k)) m += z.density[k] * (t_ - start_[iface - 1][k]);
        return m;
    }

    State state() const {
        IntegerInterface u(n_, h_[0]);
        if (model_ != ModelKind::Pair) return u;
        return PairInterface{u, IntegerInterface(n_, h_[1])};
    }

    double total_rate() const {
        double r = 0.0;
        for (int c = 0; c < 4; ++c) r += cls_[c].size() * cmax_[c];
        return r;
    }

    void set_recording(bool events, bool intervals) {
        rec_events_ = events;
        rec_intervals_ = intervals;
        zeta_[0].has_log = zeta_[1].has_log = intervals;
    }

    // Advance to t_end (or until max_events flips). Snapshot times must be sorted.
    template <class Obs = NullObserver>
    void run(double t_end, Rng& rng, Obs&& obs = Obs{}, const std::vector<double>& snapshot_times = {},
             std::uint64_t max_events = 0) {
        std::size_t si = 0;
        while (si < snapshot_times.size() && snapshot_times[si] < t_) ++si;
        while (true) {
            const double R = total_rate();
            const double dt = R > 0 ? rng.exponential() / R : std::numeric_limits<double>::infinity();
            const double tn = t_ + dt;
            while (si < snapshot_times.size() && snapshot_times[si] <= std::min(tn, t_end)) {
                snapshots_.push_back({snapshot_times[si], state()});
                ++si;
            }
            if (tn > t_end) {
                obs.advance(*this, t_, t_end);
                t_ = t_end;
                break;
            }
            obs.advance(*this, t_, tn);
            t_ = tn;
            ++n_proposals_;
            double u = rng.uniform() * R;
            int c = 0;
            for (; c < 3; ++c) {
                const double w = cls_[c].size() * cmax_[c];
                if (u < w) break;
                u -= w;
            }
            while (c > 0 && cls_[c].size() == 0) --c;  // rounding at the top of the range
            const int k = cls_[c][static_cast<int>(rng.below(cls_[c].size()))];
            const double rate = (c == 0 || c == 3) ? rates_.p[k] : rates_.q[k];
            if (rate < cmax_[c] && rng.uniform() * cmax_[c] >= rate) continue;
            const int iface = c < 2 ? 1 : 2;
            const Direction dir = (c == 0 || c == 2) ? Direction::Up : Direction::Down;
            flip(k, iface, dir);
            obs.flipped(*this, k, iface, dir, t_);
            if (max_events && n_events_ >= max_events) break;
        }
    }

    // replay of a recorded event; no randomness involved
    template <class Obs = NullObserver>
    void replay(const Event& e, Obs&& obs = Obs{}) {
        if (e.time < t_) throw DataError("replayed events must be time-ordered");
        const bool up = e.dir == Direction::Up;
        const int c = e.iface == 1 ? (up ? 0 : 1) : (up ? 2 : 3);
        if (!cls_[c].contains(e.site)) throw DataError("replayed event is not an allowed flip");
        obs.advance(*this, t_, e.time);
        t_ = e.time;
        flip(e.site, e.iface, e.dir);
        obs.flipped(*this, e.site, e.iface, e.dir, t_);
    }

    template <class Obs = NullObserver>
    void idle_until(double t, Obs&& obs = Obs{}) {
        obs.advance(*this, t_, t);
        t_ = t;
    }

    // zeta mass up to time t >= time(), assuming no flip in between
    double zeta_mass_at(int iface, int k, double t) const {
        const auto& z = zeta_[iface - 1];
        double m = z.mass_per_site[k];
        if (blocked_[iface - 1].contains(k)) m += z.density[k] * (t - start_[iface - 1][k]);
        return m;
    }

    // closes open pinned intervals; call once at the end
    void finish() {
        for (int i = 0; i < 2; ++i)
            for (int k = 1; k < 2 * n_; ++k)
                if (blocked_[i].contains(k)) close_interval(i, k);
    }

    std::vector<Event>& events() { return events_; }
    std::vector<Snapshot>& snapshots() { return snapshots_; }
    ReflectionMeasure& zeta(int iface) { return zeta_[iface - 1]; }

private:
    void flip(int k, int iface, Direction dir) {
        h_[iface - 1][k] += dir == Direction::Up ? 2 : -2;
        ++n_events_;
        if (rec_events_) events_.push_back({t_, k, iface, dir});
        for (int j = k - 1; j <= k + 1; ++j)
            if (j >= 1 && j < 2 * n_) refresh(j);
    }

    void close_interval(int i, int k) {
        const double len = t_ - start_[i][k];
        auto& z = zeta_[i];
        z.mass_per_site[k] += z.density[k] * len;
        if (rec_intervals_) z.interval_log.push_back({k, start_[i][k], t_});
        start_[i][k] = t_;
    }

    void set_blocked(int i, int k, bool on) {
        const bool was = blocked_[i].contains(k);
        if (was == on) return;
        if (on) {
            start_[i][k] = t_;
            blocked_[i].insert(k);
        } else {
            close_interval(i, k);
            blocked_[i].erase(k);
        }
    }

    void refresh(int k) {
        const auto& u = h_[0];
        const int du = u[k + 1] - 2 * u[k] + u[k - 1];
        if (model_ == ModelKind::Pair) {
            const auto& l = h_[1];
            const int dl = l[k + 1] - 2 * l[k] + l[k - 1];
            const bool apart = u[k] > l[k];
            cls_[0].set(k, du == 2);
            cls_[1].set(k, du == -2 && apart);
            cls_[2].set(k, dl == 2 && apart);
            cls_[3].set(k, dl == -2);
            set_blocked(0, k, du == -2 && !apart);
            set_blocked(1, k, dl == 2 && !apart);
        } else {
            const bool wall = model_ == ModelKind::BridgeWall;
            cls_[0].set(k, du == 2);
            cls_[1].set(k, du == -2 && (!wall || u[k] > 1));
            if (wall) set_blocked(0, k, du == -2 && u[k] == 1);
        }
    }

    ModelKind model_;
    RateTable rates_;
    int n_;
    double t_ = 0.0;
    std::vector<int> h_[2];
    detail::IndexedSet cls_[4];
    double cmax_[4];
    detail::IndexedSet blocked_[2];
    std::vector<double> start_[2];
    ReflectionMeasure zeta_[2];
    std::vector<Event> events_;
    std::vector<Snapshot> snapshots_;
    bool rec_events_ = true;
    bool rec_intervals_ = true;
    std::uint64_t n_events_ = 0;
    std::uint64_t n_proposals_ = 0;
};

inline void check_snapshot_times(const std::vector<double>& times, double t_end) {
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < 0 || times[i] > t_end) throw ArgumentError("snapshot time outside [0, t_end]");
        if (i && times[i] < times[i - 1]) throw ArgumentError("snapshot times must be sorted");
    }
}

template <class Obs>
SimResult simulate_observed(ModelKind model, const State& initial, const RateTable& rates, double t_end,
                            const std::vector<double>& snapshot_times, std::uint64_t seed, Obs&& obs,
                            const SimOptions& opt = {}) {
    if (!(t_end >= 0) || !std::isfinite(t_end)) throw ArgumentError("t_end must be a finite non-negative time");
    check_snapshot_times(snapshot_times, t_end);
    Engine eng(model, initial, rates);
    eng.set_recording(opt.record_events, opt.record_intervals);
    Rng rng(seed);
    eng.run(t_end, rng, obs, snapshot_times, opt.max_events);
    eng.finish();
    SimResult res;
    res.traj.model = model;
    res.traj.initial = initial;
    res.traj.events = std::move(eng.events());
    res.traj.snapshots = std::move(eng.snapshots());
    res.traj.t_end = eng.time();
    res.traj.has_events = opt.record_events;
    res.zeta = std::move(eng.zeta(1));
    res.zeta2 = std::move(eng.zeta(2));
    return res;
}

inline SimResult simulate(ModelKind model, const State& initial, const RateTable& rates, double t_end,
                          const std::vector<double>& snapshot_times, std::uint64_t seed, const SimOptions& opt = {}) {
    return simulate_observed(model, initial, rates, t_end, snapshot_times, seed, NullObserver{}, opt);
}

// ---------------------------------------------------------------- replay and interpolation

// runs an observer over a recorded trajectory
template <class Obs>
void replay_trajectory(const Trajectory& tr, const RateTable& rates, Obs&& obs) {
    if (!tr.has_events) throw CapabilityError("trajectory was recorded without events");
    Engine eng(tr.model, tr.initial, rates);
    eng.set_recording(false, false);
    for (const auto& e : tr.events) eng.replay(e, obs);
    eng.idle_until(tr.t_end, obs);
}

inline void apply_event(State& s, const Event& e) {
    if (auto* p = std::get_if<PairInterface>(&s))
        apply_flip_inplace(e.iface == 1 ? p->upper : p->lower, e.site, e.dir);
    else
        apply_flip_inplace(std::get<IntegerInterface>(s), e.site, e.dir);
}

// state at time t (events at times <= t applied)
inline State state_at(const Trajectory& tr, double t) {
    if (!tr.has_events) throw CapabilityError("trajectory was recorded without events");
    if (t < 0 || t > tr.t_end) throw RangeError("time outside [0, t_end]");
    State s = tr.initial;
    for (const auto& e : tr.events) {
        if (e.time > t) break;
        apply_event(s, e);
    }
    return s;
}

struct ContinuousState {
    std::vector<double> upper;
    std::vector<double> lower;  // empty for single-interface models
};

inline ContinuousState scaled_state(const State& s) {
    if (auto* p = std::get_if<PairInterface>(&s)) return {p->upper.scaled(), p->lower.scaled()};
    return {std::get<IntegerInterface>(s).scaled(), {}};
}

// time interpolation on the grid (2N)^{-2}
inline ContinuousState interpolate(const Trajectory& tr, double t) {
    if (t < 0 || t > tr.t_end) throw RangeError("interpolate: t outside [0, t_end]");
    const int n = state_n(tr.initial);
    const double L2 = 4.0 * n * n;
    const double x = t * L2;
    const double i = std::floor(x);
    const double a = x - i;
    const double t0 = i / L2;
    auto s0 = scaled_state(state_at(tr, t0));
    if (a == 0.0) return s0;
    const double t1 = (i + 1) / L2;
    if (t1 > tr.t_end) throw RangeError("interpolate: next grid time lies beyond t_end");
    auto s1 = scaled_state(state_at(tr, t1));
    auto mix = [a](std::vector<double>& u, const std::vector<double>& v) {
        for (std::size_t k = 0; k < u.size(); ++k) u[k] = (1 - a) * u[k] + a * v[k];
    };
    mix(s0.upper, s1.upper);
    mix(s0.lower, s1.lower);
    return s0;
}

// ---------------------------------------------------------------- zeta pairings

inline double zeta_integral(const ReflectionMeasure& z, const std::function<double(double, double)>& phi) {
    if (!z.has_log) throw CapabilityError("zeta_integral needs the pinned-interval log");
    using boost::math::quadrature::gauss_kronrod;
    double s = 0.0;
    for (const auto& iv : z.interval_log) {
        if (iv.t_end <= iv.t_start) continue;
        const double x = site_x(z.n, iv.site);
        auto f = [&](double t) { return phi(t, x); };
        double err = 0;
        const double v = gauss_kronrod<double, 15>::integrate(f, iv.t_start, iv.t_end, 15, 1e-8, &err);
        s += z.density[iv.site] * v;
    }
    return s;
}

// time-independent test function: exact
inline double zeta_pairing(const ReflectionMeasure& z, const std::function<double(double)>& phi) {
    double s = 0.0;
    for (int k = 1; k < 2 * z.n; ++k) s += phi(site_x(z.n, k)) * z.mass_per_site[k];
    return s;
}

// ---------------------------------------------------------------- support check

struct SupportReport {
    double max_violation = 0.0;  // longest logged time not backed by pinned geometry
    std::vector<PinnedInterval> violations;
    double h_dzeta = 0.0;        // integral of h (BridgeWall) or h1 - h2 (Pair) against zeta (sum)
    double total_mass = 0.0;
};

namespace detail {

inline double uncovered(const std::vector<std::pair<double, double>>& logged,
                        const std::vector<std::pair<double, double>>& truth) {
    // measure of union(logged) minus union(truth); both lists are disjoint and sorted
    double out = 0.0;
    std::size_t j = 0;
    for (auto [a, b] : logged) {
        double cur = a;
        while (j < truth.size() && truth[j].second <= cur) ++j;
        std::size_t jj = j;
        while (cur < b) {
            if (jj >= truth.size() || truth[jj].first >= b) {
                out += b - cur;
                break;
            }
            if (truth[jj].first > cur) out += truth[jj].first - cur;
            cur = std::max(cur, truth[jj].second);
            ++jj;
        }
    }
    return out;
}

}  // namespace detail

inline SupportReport support_check(const Trajectory& tr, const ReflectionMeasure& z1,
                                   const ReflectionMeasure* z2 = nullptr) {
    if (!tr.has_events) throw CapabilityError("support_check needs the event log");
    if (!z1.has_log || (z2 && !z2->has_log)) throw CapabilityError("support_check needs the pinned-interval log");
    SupportReport rep;
    if (tr.model == ModelKind::Bridge) return rep;
    const int n = state_n(tr.initial);
    const int L = 2 * n;
    const bool pair = tr.model == ModelKind::Pair;

    // reconstruct pinned intervals and h-weighted masses from the replay
    std::vector<std::vector<std::pair<double, double>>> truth[2];
    truth[0].resize(L + 1);
    truth[1].resize(L + 1);
    std::vector<double> open[2] = {std::vector<double>(L + 1, -1), std::vector<double>(L + 1, -1)};
    State s = tr.initial;
    auto pinned = [&](int i, int k) {
        if (pair) {
            const auto& p = std::get<PairInterface>(s);
            const auto& f = i == 0 ? p.upper : p.lower;
            const int d = discrete_laplacian(f, k);
            return p.upper.heights[k] == p.lower.heights[k] && (i == 0 ? d == -2 : d == 2);
        }
        const auto& f = std::get<IntegerInterface>(s);
        return discrete_laplacian(f, k) == -2 && f.heights[k] == 1;
    };
    auto gap = [&](int k) {
        if (pair) {
            const auto& p = std::get<PairInterface>(s);
            return (p.upper.heights[k] - p.lower.heights[k]) / std::sqrt(2.0 * n);
        }
        return std::get<IntegerInterface>(s).heights[k] / std::sqrt(2.0 * n);
    };
    const ReflectionMeasure* zs[2] = {&z1, z2};
    auto sweep = [&](double t) {
        for (int i = 0; i < (pair ? 2 : 1); ++i)
            for (int k = 1; k < L; ++k) {
                const bool on = pinned(i, k);
                if (on && open[i][k] < 0) open[i][k] = t;
                if (!on && open[i][k] >= 0) {
                    truth[i][k].push_back({open[i][k], t});
                    open[i][k] = -1;
                }
            }
    };
    sweep(0.0);
    double last = 0.0;
    for (const auto& e : tr.events) {
        // h-weighted mass on [last, e.time)
        for (int i = 0; i < (pair ? 2 : 1); ++i)
            for (int k = 1; k < L; ++k)
                if (open[i][k] >= 0) rep.h_dzeta += gap(k) * zs[i]->density[k] * (e.time - last);
        apply_event(s, e);
        sweep(e.time);
        last = e.time;
    }
    for (int i = 0; i < (pair ? 2 : 1); ++i)
        for (int k = 1; k < L; ++k)
            if (open[i][k] >= 0) {
                rep.h_dzeta += gap(k) * zs[i]->density[k] * (tr.t_end - last);
                if (tr.t_end > open[i][k]) truth[i][k].push_back({open[i][k], tr.t_end});
            }

    for (int i = 0; i < (pair ? 2 : 1); ++i) {
        rep.total_mass += zs[i]->total_mass();
        std::vector<std::vector<std::pair<double, double>>> logged(L + 1);
        for (const auto& iv : zs[i]->interval_log)
            if (iv.t_end > iv.t_start) logged[iv.site].push_back({iv.t_start, iv.t_end});
        for (int k = 1; k < L; ++k) {
            std::sort(logged[k].begin(), logged[k].end());
            const double u = detail::uncovered(logged[k], truth[i][k]);
            if (u > 0) {
                rep.violations.push_back({k, 0.0, u});
                rep.max_violation = std::max(rep.max_violation, u);
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------- CSV export

inline void write_events_csv(std::ostream& os, const Trajectory& tr) {
    os << "time,site,interface_id,direction\n" << std::setprecision(17);
    for (const auto& e : tr.events)
        os << e.time << ',' << e.site << ',' << e.iface << ',' << (e.dir == Direction::Up ? "up" : "down") << '\n';
}

inline void write_snapshots_csv(std::ostream& os, const std::vector<Snapshot>& snaps) {
    bool pair = !snaps.empty() && std::holds_alternative<PairInterface>(snaps.front().state);
    os << (pair ? "time,k,height,height2\n" : "time,k,height\n") << std::setprecision(17);
    for (const auto& s : snaps) {
        if (pair) {
            const auto& p = std::get<PairInterface>(s.state);
            for (int k = 0; k <= 2 * p.n(); ++k)
                os << s.time << ',' << k << ',' << p.upper.heights[k] << ',' << p.lower.heights[k] << '\n';
        } else {
            const auto& f = std::get<IntegerInterface>(s.state);
            for (int k = 0; k <= 2 * f.n; ++k) os << s.time << ',' << k << ',' << f.heights[k] << '\n';
        }
    }
}

inline void write_zeta_csv(std::ostream& os, const ReflectionMeasure& z) {
    os << "site,t_start,t_end,mass\n" << std::setprecision(17);
    for (const auto& iv : z.interval_log)
        os << iv.site << ',' << iv.t_start << ',' << iv.t_end << ',' << z.interval_mass(iv) << '\n';
}

}  // namespace wasep
