#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "errors.hpp"
#include "gibbs.hpp"
#include "json.hpp"

namespace wasep {

// ---------------------------------------------------------------- summaries

struct EmpiricalSummary {
    std::string name;
    std::size_t n_samples = 0;
    double mean = 0.0;
    double variance = 0.0;
    std::vector<double> quantiles;  // at the requested levels
    double stderr_ = 0.0;
};

inline double quantile_sorted(const std::vector<double>& s, double q) {
    if (s.empty()) throw ArgumentError("quantile of an empty sample");
    const double pos = q * (s.size() - 1);
    const std::size_t i = static_cast<std::size_t>(std::floor(pos));
    const double a = pos - i;
    return i + 1 < s.size() ? (1 - a) * s[i] + a * s[i + 1] : s[i];
}

inline EmpiricalSummary summarize(const std::string& name, const std::vector<double>& x,
                                  const std::vector<double>& levels = {0.05, 0.25, 0.5, 0.75, 0.95}) {
    if (x.empty()) throw ArgumentError("summarize: empty sample");
    EmpiricalSummary s;
    s.name = name;
    s.n_samples = x.size();
    double m = 0.0, m2 = 0.0;
    std::size_t k = 0;
    for (double v : x) {
        ++k;
        const double d = v - m;
        m += d / k;
        m2 += d * (v - m);
    }
    s.mean = m;
    s.variance = x.size() > 1 ? m2 / (x.size() - 1) : 0.0;
    s.stderr_ = std::sqrt(s.variance / x.size());
    std::vector<double> sorted(x);
    std::sort(sorted.begin(), sorted.end());
    for (double q : levels) s.quantiles.push_back(quantile_sorted(sorted, q));
    return s;
}

// running mean / variance per grid point
class ProfileAccumulator {
public:
    explicit ProfileAccumulator(int size = 0) : mean_(size, 0.0), m2_(size, 0.0) {}
    void add(const std::vector<double>& v) {
        if (mean_.empty()) {
            mean_.assign(v.size(), 0.0);
            m2_.assign(v.size(), 0.0);
        }
        if (v.size() != mean_.size()) throw DimensionError("profile sample has the wrong length");
        ++n_;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double d = v[i] - mean_[i];
            mean_[i] += d / n_;
            m2_[i] += d * (v[i] - mean_[i]);
        }
    }
    void merge(const ProfileAccumulator& o) {
        if (o.n_ == 0) return;
        if (n_ == 0) {
            *this = o;
            return;
        }
        const double n = n_ + o.n_;
        for (std::size_t i = 0; i < mean_.size(); ++i) {
            const double d = o.mean_[i] - mean_[i];
            mean_[i] += d * o.n_ / n;
            m2_[i] += o.m2_[i] + d * d * n_ * o.n_ / n;
        }
        n_ += o.n_;
    }
    std::size_t count() const { return n_; }
    const std::vector<double>& mean() const { return mean_; }
    double variance(std::size_t i) const { return n_ > 1 ? m2_[i] / (n_ - 1) : 0.0; }
    double stderr_at(std::size_t i) const { return std::sqrt(variance(i) / n_); }

private:
    std::vector<double> mean_, m2_;
    std::size_t n_ = 0;
};

// ---------------------------------------------------------------- tests

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// Kolmogorov distribution tail P(K > lambda)
inline double kolmogorov_tail(double lambda) {
    if (lambda <= 0) return 1.0;
    if (lambda < 1.18) {
        // small-lambda series of the CDF
        const double c = std::sqrt(2.0 * M_PI) / lambda;
        double s = 0.0;
        for (int j = 1; j <= 20; ++j) {
            const double a = (2 * j - 1) * M_PI / lambda;
            s += std::exp(-a * a / 8.0);
        }
        return std::clamp(1.0 - c * s, 0.0, 1.0);
    }
    double s = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        s += (j % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-300) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

inline TestResult ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ArgumentError("ks_distance: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = a.size(), nb = b.size();
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    TestResult r;
    r.statistic = d;
    r.p_value = kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d);
    return r;
}

inline double chi_square_tail(double x, double df) {
    if (df <= 0) return 1.0;
    if (x <= 0) return 1.0;
    return boost::math::gamma_q(df / 2.0, x / 2.0);
}

struct ChiSquareResult {
    double chi_square = 0.0;
    double p_value = 1.0;
    double total_variation = 0.0;
    int dof = 0;
};

// counts against probabilities over the same bins
inline ChiSquareResult chi_square_test(const std::vector<double>& counts, const std::vector<double>& probs) {
    if (counts.size() != probs.size()) throw DimensionError("chi_square_test: length mismatch");
    double n = 0.0;
    for (double c : counts) n += c;
    if (n <= 0) throw ArgumentError("chi_square_test: no samples");
    ChiSquareResult r;
    int bins = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        r.total_variation += 0.5 * std::abs(counts[i] / n - probs[i]);
        if (probs[i] <= 0) {
            if (counts[i] > 0) r.chi_square = INFINITY;
            continue;
        }
        ++bins;
        const double e = n * probs[i];
        r.chi_square += (counts[i] - e) * (counts[i] - e) / e;
    }
    r.dof = std::max(bins - 1, 0);
    r.p_value = std::isinf(r.chi_square) ? 0.0 : chi_square_tail(r.chi_square, r.dof);
    return r;
}

inline ChiSquareResult empirical_vs_exact(const std::vector<State>& samples, const GibbsMeasure& mu) {
    std::vector<double> counts(mu.size(), 0.0);
    for (const auto& s : samples) counts[mu.enumeration->find(s)] += 1.0;
    return chi_square_test(counts, mu.weights);
}

inline ChiSquareResult empirical_vs_exact_counts(const std::vector<double>& counts, const GibbsMeasure& mu) {
    return chi_square_test(counts, mu.weights);
}

// inverse-CDF draw from an exact measure
inline int sample_index(const std::vector<double>& probs, Rng& rng) {
    double u = rng.uniform();
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (u < probs[i]) return static_cast<int>(i);
        u -= probs[i];
    }
    return static_cast<int>(probs.size()) - 1;
}

struct ProfileFit {
    std::vector<double> mean;
    std::vector<double> stderr_;
    double sup_deviation = 0.0;
    int outside_3se = 0;
    int points = 0;
    double fraction_outside() const { return points ? static_cast<double>(outside_3se) / points : 0.0; }
};

// points with zero spread (pinned boundary values) count as inside when they hit the target
inline ProfileFit profile_fit(const ProfileAccumulator& acc, const std::function<double(double)>& target) {
    if (acc.count() < 100) throw ArgumentError("profile_fit: need an ensemble of at least 100");
    ProfileFit f;
    const std::size_t n = acc.mean().size();
    f.points = static_cast<int>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
        const double m = acc.mean()[i];
        const double se = acc.stderr_at(i);
        const double dev = std::abs(m - target(x));
        f.mean.push_back(m);
        f.stderr_.push_back(se);
        f.sup_deviation = std::max(f.sup_deviation, dev);
        if (dev > 3 * se && dev > 1e-12) ++f.outside_3se;
    }
    return f;
}

// ---------------------------------------------------------------- parallel ensembles

inline unsigned default_workers() {
    unsigned h = std::thread::hardware_concurrency();
    return h ? h : 1;
}

// fn(i) for i in [0,n) on a bounded pool; results are stored by index so the
// merge order does not depend on scheduling
template <class F>
auto parallel_map(std::size_t n, F&& fn, unsigned workers = default_workers()) {
    using R = decltype(fn(std::size_t{0}));
    std::vector<R> out(n);
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w]() {
            for (std::size_t i = w; i < n; i += workers) out[i] = fn(i);
        });
    for (auto& t : pool) t.join();
    return out;
}

// ---------------------------------------------------------------- reports

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

struct Report {
    std::string name;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, double>> values;
    std::vector<std::pair<std::string, bool>> checks;

    std::string config_hash() const { return hex64(fnv1a(config.dump())); }

    void add(const std::string& k, double v) { values.emplace_back(k, v); }
    void check(const std::string& k, bool ok) { checks.emplace_back(k, ok); }
    bool passed() const {
        for (auto& c : checks)
            if (!c.second) return false;
        return true;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["name"] = name;
        j["config"] = config;
        j["config_hash"] = config_hash();
        j["seed"] = seed;
        for (auto& [k, v] : values) j["values"][k] = v;
        for (auto& [k, v] : checks) j["checks"][k] = v;
        j["passed"] = passed();
        return j;
    }

    void write_text(std::ostream& os) const {
        os << name << "  (config " << config_hash() << ", seed " << seed << ")\n";
        std::size_t w = 8;
        for (auto& kv : values) w = std::max(w, kv.first.size());
        for (auto& kv : checks) w = std::max(w, kv.first.size());
        os << std::setprecision(10);
        for (auto& [k, v] : values) os << "  " << std::left << std::setw(static_cast<int>(w)) << k << "  " << v << '\n';
        for (auto& [k, v] : checks)
            os << "  " << std::left << std::setw(static_cast<int>(w)) << k << "  " << (v ? "PASS" : "FAIL") << '\n';
    }
};

}  // namespace wasep
