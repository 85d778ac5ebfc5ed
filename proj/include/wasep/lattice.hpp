#pragma once

#include <cmath>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"

namespace wasep {

enum class ModelKind { Bridge, BridgeWall, Pair };

inline const char* to_string(ModelKind m) {
    switch (m) {
        case ModelKind::Bridge: return "bridge";
        case ModelKind::BridgeWall: return "bridge-wall";
        case ModelKind::Pair: return "pair";
    }
    return "?";
}

inline ModelKind parse_model(const std::string& s) {
    if (s == "bridge" || s == "1") return ModelKind::Bridge;
    if (s == "bridge-wall" || s == "wall" || s == "1-w") return ModelKind::BridgeWall;
    if (s == "pair" || s == "2") return ModelKind::Pair;
    throw ArgumentError("unknown model '" + s + "'");
}

struct IntegerInterface {
    int n = 0;
    std::vector<int> heights;  // length 2n+1, unscaled

    IntegerInterface() = default;
    IntegerInterface(int n_, std::vector<int> h) : n(n_), heights(std::move(h)) {}

    int size() const { return 2 * n; }
    int operator[](int k) const { return heights[k]; }
    double scale() const { return 1.0 / std::sqrt(2.0 * n); }
    double h(int k) const { return heights[k] * scale(); }

    std::vector<double> scaled() const {
        std::vector<double> out(heights.size());
        const double s = scale();
        for (std::size_t k = 0; k < heights.size(); ++k) out[k] = heights[k] * s;
        return out;
    }

    bool operator==(const IntegerInterface& o) const { return n == o.n && heights == o.heights; }
    bool operator!=(const IntegerInterface& o) const { return !(*this == o); }
    bool operator<(const IntegerInterface& o) const {
        return n != o.n ? n < o.n : heights < o.heights;
    }

    // 0..0 of size n (used for empty components of the pair decomposition)
    static IntegerInterface flat(int n) { return IntegerInterface(n, std::vector<int>(2 * n + 1, 0)); }

    // up^n down^n, the highest bridge
    static IntegerInterface tent(int n) {
        std::vector<int> h(2 * n + 1);
        for (int k = 0; k <= 2 * n; ++k) h[k] = k <= n ? k : 2 * n - k;
        return IntegerInterface(n, h);
    }

    // UDUD...: the lowest excursion
    static IntegerInterface zigzag(int n) {
        std::vector<int> h(2 * n + 1);
        for (int k = 0; k <= 2 * n; ++k) h[k] = k % 2;
        return IntegerInterface(n, h);
    }
};

struct PairInterface {
    IntegerInterface upper;
    IntegerInterface lower;

    int n() const { return upper.n; }
    bool operator==(const PairInterface& o) const { return upper == o.upper && lower == o.lower; }
    bool operator!=(const PairInterface& o) const { return !(*this == o); }
    bool operator<(const PairInterface& o) const {
        return upper != o.upper ? upper < o.upper : lower < o.lower;
    }
};

using State = std::variant<IntegerInterface, PairInterface>;

inline int state_n(const State& s) {
    return std::holds_alternative<IntegerInterface>(s) ? std::get<IntegerInterface>(s).n
                                                       : std::get<PairInterface>(s).n();
}

inline bool is_bridge(const IntegerInterface& f) {
    if (f.n < 0 || f.heights.size() != static_cast<std::size_t>(2 * f.n + 1)) return false;
    if (f.heights.front() != 0 || f.heights.back() != 0) return false;
    for (int k = 1; k <= 2 * f.n; ++k)
        if (std::abs(f.heights[k] - f.heights[k - 1]) != 1) return false;
    return true;
}

inline bool is_excursion(const IntegerInterface& f) {
    if (!is_bridge(f)) return false;
    for (int v : f.heights)
        if (v < 0) return false;
    return true;
}

inline bool is_valid(const IntegerInterface& f, ModelKind m) {
    if (f.n < 1) return false;
    return m == ModelKind::BridgeWall ? is_excursion(f) : is_bridge(f);
}

inline bool is_valid(const PairInterface& p) {
    if (p.upper.n < 1 || p.upper.n != p.lower.n) return false;
    if (!is_bridge(p.upper) || !is_bridge(p.lower)) return false;
    for (int k = 0; k <= 2 * p.n(); ++k)
        if (p.upper.heights[k] < p.lower.heights[k]) return false;
    return true;
}

inline bool is_valid(const State& s, ModelKind m) {
    if (m == ModelKind::Pair) {
        auto* p = std::get_if<PairInterface>(&s);
        return p && is_valid(*p);
    }
    auto* f = std::get_if<IntegerInterface>(&s);
    return f && is_valid(*f, m);
}

inline void require_valid(const State& s, ModelKind m) {
    if (!is_valid(s, m)) throw PreconditionError(std::string("state is not valid for model ") + to_string(m));
}

// ---------------------------------------------------------------- profiles

struct AsymmetryProfile {
    std::function<double(double)> sigma;
    double holder_constant = 0.0;
    std::string name = "const:0";

    double operator()(double x) const { return sigma(x); }

    static AsymmetryProfile constant(double c) {
        std::ostringstream s;
        s.precision(17);
        s << "const:" << c;
        return {[c](double) { return c; }, 0.0, s.str()};
    }

    // a + b x
    static AsymmetryProfile linear(double a, double b) {
        std::ostringstream s;
        s.precision(17);
        s << "linear:" << a << ',' << b;
        return {[a, b](double x) { return a + b * x; }, std::abs(b), s.str()};
    }

    // amp sin(2 pi freq x)
    static AsymmetryProfile sinusoidal(double amp, double freq) {
        std::ostringstream s;
        s.precision(17);
        s << "sin:" << amp << ',' << freq;
        const double w = 2.0 * M_PI * freq;
        return {[amp, w](double x) { return amp * std::sin(w * x); }, std::abs(amp * w), s.str()};
    }

    // value[i] on [breaks[i-1], breaks[i]); breaks strictly inside (0,1)
    static AsymmetryProfile piecewise(std::vector<double> breaks, std::vector<double> values) {
        if (values.size() != breaks.size() + 1) throw InvalidProfileError("piecewise: need one more value than breaks");
        std::ostringstream s;
        s.precision(17);
        s << "piecewise:";
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) s << ',' << breaks[i - 1] << ',';
            s << values[i];
        }
        auto f = [breaks, values](double x) {
            std::size_t i = 0;
            while (i < breaks.size() && x >= breaks[i]) ++i;
            return values[i];
        };
        return {f, 0.0, s.str()};
    }
};

// "const:c", "linear:a,b", "sin:amp,freq", "piecewise:v0,b1,v1,b2,v2..."
inline AsymmetryProfile parse_profile(const std::string& spec) {
    auto colon = spec.find(':');
    if (colon == std::string::npos) throw InvalidProfileError("sigma spec needs name:params, got '" + spec + "'");
    std::string kind = spec.substr(0, colon);
    std::vector<double> a;
    std::stringstream ss(spec.substr(colon + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            a.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw InvalidProfileError("bad number '" + tok + "' in sigma spec");
        }
    }
    for (double v : a)
        if (!std::isfinite(v)) throw InvalidProfileError("non-finite parameter in sigma spec");
    if (kind == "const" && a.size() == 1) return AsymmetryProfile::constant(a[0]);
    if (kind == "linear" && a.size() == 2) return AsymmetryProfile::linear(a[0], a[1]);
    if (kind == "sin" && a.size() == 2) return AsymmetryProfile::sinusoidal(a[0], a[1]);
    if (kind == "piecewise" && a.size() % 2 == 1) {
        std::vector<double> br, val;
        for (std::size_t i = 0; i < a.size(); ++i) (i % 2 ? br : val).push_back(a[i]);
        return AsymmetryProfile::piecewise(br, val);
    }
    throw InvalidProfileError("unrecognised sigma spec '" + spec + "'");
}

// ---------------------------------------------------------------- rates

struct RateTable {
    int n = 0;
    // indexed by site k = 0..2n; entries 0 and 2n are unused and zero
    std::vector<double> p, q;
    std::vector<double> log_ratio;  // log(p/q)

    double total() const { return 4.0 * n * n; }

    static RateTable from_pq(int n, std::vector<double> p, std::vector<double> q) {
        const std::size_t len = 2 * n + 1;
        if (n < 1 || p.size() != len || q.size() != len) throw DimensionError("rate table size mismatch");
        RateTable r{n, std::move(p), std::move(q), std::vector<double>(len, 0.0)};
        const double L2 = r.total();
        for (int k = 1; k < 2 * n; ++k) {
            if (!(r.p[k] > 0 && r.q[k] > 0)) throw PreconditionError("rates must be positive");
            if (std::abs(r.p[k] + r.q[k] - L2) > 1e-12 * L2) throw PreconditionError("p + q must equal (2N)^2");
            r.log_ratio[k] = std::log(r.p[k] / r.q[k]);
        }
        return r;
    }
};

inline double site_x(int n, int k) { return static_cast<double>(k) / (2.0 * n); }

inline RateTable build_rates(const AsymmetryProfile& sigma, int n) {
    if (n < 1) throw ArgumentError("build_rates: n must be >= 1");
    const double L = 2.0 * n;
    const double L2 = L * L;
    const double scale = 4.0 * std::pow(L, -1.5);
    RateTable r;
    r.n = n;
    r.p.assign(2 * n + 1, 0.0);
    r.q.assign(2 * n + 1, 0.0);
    r.log_ratio.assign(2 * n + 1, 0.0);
    for (int k = 1; k < 2 * n; ++k) {
        const double s = sigma(site_x(n, k));
        if (!std::isfinite(s)) throw InvalidProfileError("sigma is not finite at x = " + std::to_string(site_x(n, k)));
        const double th = scale * s;
        r.log_ratio[k] = th;
        r.p[k] = L2 / (1.0 + std::exp(-th));
        r.q[k] = L2 / (1.0 + std::exp(th));
    }
    return r;
}

// ---------------------------------------------------------------- local geometry

inline int discrete_laplacian(const IntegerInterface& f, int k) {
    if (k < 1 || k > 2 * f.n - 1) throw IndexError("discrete_laplacian: site " + std::to_string(k) + " is not interior");
    return f.heights[k + 1] - 2 * f.heights[k] + f.heights[k - 1];
}

// (2N)^{3/2} A_N(h) = sum_k log(p_k/q_k) H_k / 2; the Gibbs log-weight
inline double scaled_area(const IntegerInterface& f, const RateTable& r) {
    if (f.n != r.n) throw DimensionError("interface and rate table have different N");
    double s = 0.0;
    for (int k = 1; k < 2 * f.n; ++k) s += r.log_ratio[k] * f.heights[k];
    return 0.5 * s;
}

inline double scaled_area(const PairInterface& pr, const RateTable& r) {
    if (pr.n() != r.n) throw DimensionError("interface and rate table have different N");
    double s = 0.0;
    for (int k = 1; k < 2 * pr.n(); ++k) s += r.log_ratio[k] * (pr.upper.heights[k] - pr.lower.heights[k]);
    return 0.5 * s;
}

inline double scaled_area(const State& s, const RateTable& r) {
    return std::visit([&](const auto& v) { return scaled_area(v, r); }, s);
}

// A_N(h) = (1/4N) sum_k log(p_k/q_k) h(k/2N)
template <class S>
double weighted_area(const S& s, const RateTable& r) {
    return scaled_area(s, r) * std::pow(2.0 * r.n, -1.5);
}

// ---------------------------------------------------------------- particles

struct ParticleConfiguration {
    std::vector<int> bits;  // eta(1..2N) stored at 0..2N-1

    int size() const { return static_cast<int>(bits.size()); }
    int count() const {
        int c = 0;
        for (int b : bits) c += b;
        return c;
    }
    bool operator==(const ParticleConfiguration& o) const { return bits == o.bits; }

    bool satisfies_wall() const {
        int s = 0;
        for (int k = 0; k < size(); ++k) {
            s += bits[k];
            if (2 * s < k + 1) return false;
        }
        return true;
    }
};

inline ParticleConfiguration to_particles(const IntegerInterface& f) {
    ParticleConfiguration eta;
    eta.bits.resize(2 * f.n);
    for (int k = 1; k <= 2 * f.n; ++k) eta.bits[k - 1] = f.heights[k] - f.heights[k - 1] == 1 ? 1 : 0;
    return eta;
}

inline IntegerInterface from_particles(const ParticleConfiguration& eta) {
    if (eta.size() % 2) throw DimensionError("particle configuration must have even length");
    IntegerInterface f;
    f.n = eta.size() / 2;
    f.heights.assign(eta.size() + 1, 0);
    for (int k = 1; k <= eta.size(); ++k) f.heights[k] = f.heights[k - 1] + (eta.bits[k - 1] ? 1 : -1);
    return f;
}

// ---------------------------------------------------------------- flips

enum class Direction { Up, Down };
enum class RateKind { P, Q };

struct Flip {
    int site;
    int iface;  // 1 = upper / single, 2 = lower
    Direction dir;
    RateKind kind;
    bool operator==(const Flip& o) const {
        return site == o.site && iface == o.iface && dir == o.dir && kind == o.kind;
    }
};

inline double flip_rate(const Flip& f, const RateTable& r) {
    return f.kind == RateKind::P ? r.p[f.site] : r.q[f.site];
}

inline std::vector<Flip> allowed_flips(const IntegerInterface& f, ModelKind m) {
    std::vector<Flip> out;
    for (int k = 1; k < 2 * f.n; ++k) {
        const int d = discrete_laplacian(f, k);
        if (d == 2) out.push_back({k, 1, Direction::Up, RateKind::P});
        if (d == -2 && (m != ModelKind::BridgeWall || f.heights[k] > 1))
            out.push_back({k, 1, Direction::Down, RateKind::Q});
    }
    return out;
}

inline std::vector<Flip> allowed_flips(const PairInterface& pr) {
    std::vector<Flip> out;
    const auto& u = pr.upper;
    const auto& l = pr.lower;
    for (int k = 1; k < 2 * pr.n(); ++k) {
        const int du = discrete_laplacian(u, k);
        const int dl = discrete_laplacian(l, k);
        const bool apart = u.heights[k] > l.heights[k];
        if (du == 2) out.push_back({k, 1, Direction::Up, RateKind::P});
        if (du == -2 && apart) out.push_back({k, 1, Direction::Down, RateKind::Q});
        if (dl == 2 && apart) out.push_back({k, 2, Direction::Up, RateKind::Q});
        if (dl == -2) out.push_back({k, 2, Direction::Down, RateKind::P});
    }
    return out;
}

inline std::vector<Flip> allowed_flips(const State& s, ModelKind m) {
    if (m == ModelKind::Pair) return allowed_flips(std::get<PairInterface>(s));
    return allowed_flips(std::get<IntegerInterface>(s), m);
}

inline void apply_flip_inplace(IntegerInterface& f, int k, Direction d) {
    f.heights[k] += d == Direction::Up ? 2 : -2;
}

inline State apply_flip(State s, const Flip& fl) {
    if (auto* p = std::get_if<PairInterface>(&s)) {
        apply_flip_inplace(fl.iface == 1 ? p->upper : p->lower, fl.site, fl.dir);
    } else {
        apply_flip_inplace(std::get<IntegerInterface>(s), fl.site, fl.dir);
    }
    return s;
}

// ---------------------------------------------------------------- text format

inline std::string heights_string(const IntegerInterface& f) {
    std::string s;
    for (std::size_t k = 0; k < f.heights.size(); ++k) {
        if (k) s += ' ';
        s += std::to_string(f.heights[k]);
    }
    return s;
}

inline std::string heights_string(const State& s) {
    if (auto* p = std::get_if<PairInterface>(&s)) return heights_string(p->upper) + " | " + heights_string(p->lower);
    return heights_string(std::get<IntegerInterface>(s));
}

inline void write_state(std::ostream& os, const State& s) {
    os << "N " << state_n(s) << '\n';
    if (auto* p = std::get_if<PairInterface>(&s)) {
        os << "upper\n" << heights_string(p->upper) << "\nlower\n" << heights_string(p->lower) << '\n';
    } else {
        os << heights_string(std::get<IntegerInterface>(s)) << '\n';
    }
}

inline State read_state(std::istream& is) {
    std::string tag;
    int n = 0;
    if (!(is >> tag >> n) || tag != "N" || n < 1) throw DataError("state text must start with 'N <n>'");
    auto read_heights = [&]() {
        IntegerInterface f;
        f.n = n;
        f.heights.resize(2 * n + 1);
        for (auto& h : f.heights)
            if (!(is >> h)) throw DataError("truncated height list");
        return f;
    };
    std::string next;
    std::streampos pos = is.tellg();
    if (is >> next && next == "upper") {
        PairInterface p;
        p.upper = read_heights();
        if (!(is >> next) || next != "lower") throw DataError("expected 'lower' block");
        p.lower = read_heights();
        return p;
    }
    is.clear();
    is.seekg(pos);
    return read_heights();
}

}  // namespace wasep
