// wasep: batch driver for simulations, exact comparisons and the acceptance suite
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wasep/acceptance.hpp"

namespace fs = std::filesystem;
using namespace wasep;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Config {
    std::string kind;
    std::string model = "bridge";
    int n = 8;
    std::string sigma = "const:0";
    double t_end = 1.0;
    std::vector<double> snapshots;
    std::vector<std::uint64_t> seeds = {1};
    std::string initial = "stationary";
    double events = 1e6;
    int samples = 1000;
    double a = 1.0;
    std::string potential = "v";
    double epsilon = 0.1;
    int m = 128;
    double dt = 2e-3;
    std::string only = "all";
    unsigned workers = default_workers();
    std::string out;
};

// every setting that influences outputs, as strings, in a fixed order
std::map<std::string, std::string> echo(const Config& c) {
    auto join = [](const auto& v) {
        std::ostringstream os;
        os << std::setprecision(17);
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
        return os.str();
    };
    auto num = [](double x) {
        std::ostringstream os;
        os << std::setprecision(17) << x;
        return os.str();
    };
    return {{"kind", c.kind},
            {"model", c.model},
            {"n", std::to_string(c.n)},
            {"sigma", c.sigma},
            {"t-end", num(c.t_end)},
            {"snapshots", join(c.snapshots)},
            {"seeds", join(c.seeds)},
            {"initial", c.initial},
            {"events", num(c.events)},
            {"samples", std::to_string(c.samples)},
            {"a", num(c.a)},
            {"potential", c.potential},
            {"epsilon", num(c.epsilon)},
            {"m", std::to_string(c.m)},
            {"dt", num(c.dt)},
            {"only", c.only}};
}

std::string config_hash(const Config& c) {
    std::string s;
    for (const auto& [k, v] : echo(c)) s += k + "=" + v + "\n";
    return hex64(fnv1a(s));
}

class Output {
public:
    explicit Output(fs::path final) : final_(std::move(final)) {
        if (fs::exists(final_) && !fs::exists(final_ / "manifest.json"))
            throw ConfigError("output directory " + final_.string() + " exists and was not written by wasep");
        tmp_ = final_;
        tmp_ += ".partial";
        fs::remove_all(tmp_);
        fs::create_directories(tmp_);
    }
    ~Output() {
        if (!committed_) {
            std::error_code ec;
            fs::remove_all(tmp_, ec);
        }
    }
    std::ofstream open(const std::string& name) const {
        std::ofstream f(tmp_ / name);
        if (!f) throw ConfigError("cannot write " + (tmp_ / name).string());
        return f;
    }
    void commit() {
        fs::remove_all(final_);
        fs::rename(tmp_, final_);
        committed_ = true;
    }
    const fs::path& path() const { return final_; }

private:
    fs::path final_, tmp_;
    bool committed_ = false;
};

State initial_state(const Config& c, ModelKind m, const RateTable& r, std::uint64_t seed) {
    const std::string& s = c.initial;
    if (s == "stationary") {
        Rng rng(derive_seed(seed, 1));
        return GibbsSampler(m, r).sample(rng);
    }
    if (s == "uniform") return uniform_sample(m, c.n, derive_seed(seed, 1));
    if (s == "zigzag" || s == "flat") {
        auto z = IntegerInterface::zigzag(c.n);
        if (m == ModelKind::Pair) return PairInterface{z, z};
        return z;
    }
    if (s.rfind("file:", 0) == 0) {
        std::ifstream f(s.substr(5));
        if (!f) throw ConfigError("cannot read initial state " + s.substr(5));
        State st = read_state(f);
        if (state_n(st) != c.n) throw ConfigError("initial state file has a different N");
        return st;
    }
    throw ConfigError("unknown initial '" + s + "' (stationary, uniform, zigzag, file:PATH)");
}

void check_config(const Config& c) {
    if (c.n < 1) throw ConfigError("n must be >= 1");
    if (c.seeds.empty()) throw ConfigError("at least one seed is required");
    if (!(c.t_end >= 0)) throw ConfigError("t-end must be >= 0");
    if (c.samples < 1) throw ConfigError("samples must be >= 1");
}

// ---------------------------------------------------------------- experiments

int run_simulate(const Config& c, Output& out, json& res) {
    const ModelKind m = parse_model(c.model);
    auto r = build_rates(parse_profile(c.sigma), c.n);
    check_snapshot_times(c.snapshots, c.t_end);
    std::vector<std::uint64_t> seeds = c.seeds;
    std::sort(seeds.begin(), seeds.end());
    auto runs = parallel_map(
        seeds.size(),
        [&](std::size_t i) { return simulate(m, initial_state(c, m, r, seeds[i]), r, c.t_end, c.snapshots, seeds[i]); },
        c.workers);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const std::string tag = "seed" + std::to_string(seeds[i]);
        const auto& s = runs[i];
        auto ev = out.open("events_" + tag + ".csv");
        write_events_csv(ev, s.traj);
        auto sn = out.open("snapshots_" + tag + ".csv");
        write_snapshots_csv(sn, s.traj.snapshots);
        if (m != ModelKind::Bridge) {
            auto z = out.open("zeta_" + tag + ".csv");
            write_zeta_csv(z, s.zeta);
        }
        if (m == ModelKind::Pair) {
            auto z = out.open("zeta2_" + tag + ".csv");
            write_zeta_csv(z, s.zeta2);
        }
        auto init = out.open("initial_" + tag + ".txt");
        write_state(init, s.traj.initial);
        json j;
        j["seed"] = seeds[i];
        j["events"] = s.traj.events.size();
        j["zeta_mass"] = s.zeta.total_mass();
        if (m == ModelKind::Pair) j["zeta2_mass"] = s.zeta2.total_mass();
        if (m != ModelKind::Bridge) {
            auto rep = m == ModelKind::Pair ? support_check(s.traj, s.zeta, &s.zeta2) : support_check(s.traj, s.zeta);
            j["support_violations"] = rep.violations.size();
        }
        res["runs"].push_back(j);
    }
    return 0;
}

int run_stationary(const Config& c, Output& out, json& res) {
    const ModelKind m = parse_model(c.model);
    if (m == ModelKind::Pair) throw ConfigError("stationary profiles are for single-interface models");
    auto r = build_rates(parse_profile(c.sigma), c.n);
    GibbsSampler gs(m, r);
    const std::uint64_t seed = c.seeds.front();
    auto samples = parallel_map(
        c.samples,
        [&](std::size_t i) {
            Rng rng(derive_seed(seed, i));
            return std::get<IntegerInterface>(gs.sample(rng)).scaled();
        },
        c.workers);
    ProfileAccumulator acc;
    for (const auto& s : samples) acc.add(s);
    std::vector<double> mean, var;
    gs.site_moments(mean, var);
    auto f = out.open("profile.csv");
    f << "k,x,mean,stderr,exact_mean,exact_variance\n" << std::setprecision(17);
    int outside = 0;
    for (int k = 0; k <= 2 * c.n; ++k) {
        const double se = acc.stderr_at(k);
        const double dev = std::abs(acc.mean()[k] - mean[k]);
        if (dev > 3 * se && dev > 1e-12) ++outside;
        f << k << ',' << site_x(c.n, k) << ',' << acc.mean()[k] << ',' << se << ',' << mean[k] << ',' << var[k] << '\n';
    }
    res["samples"] = c.samples;
    res["points_outside_3se"] = outside;
    res["fraction_outside_3se"] = static_cast<double>(outside) / (2 * c.n + 1);
    res["log_partition"] = gs.log_partition();
    return static_cast<double>(outside) / (2 * c.n + 1) <= 0.01 ? 0 : 1;
}

int run_compare_invariant(const Config& c, Output& out, json& res) {
    const ModelKind m = parse_model(c.model);
    auto r = build_rates(parse_profile(c.sigma), c.n);
    auto e = enumerate_states(m, c.n);
    auto mu = gibbs_measure(e, r);
    const double L = 2.0 * c.n;
    const double spacing = 10.0 / (L * L * (1.0 - std::cos(M_PI / L)));
    Engine eng(m, e.states[0], r);
    eng.set_recording(false, false);
    Rng rng(c.seeds.front());
    std::vector<double> counts(e.size(), 0.0);
    double t = spacing;
    eng.run(t, rng);
    while (eng.event_count() < static_cast<std::uint64_t>(c.events)) {
        t += spacing;
        eng.run(t, rng);
        counts[e.find(eng.state())] += 1;
    }
    auto cs = empirical_vs_exact_counts(counts, mu);
    auto f = out.open("frequencies.csv");
    f << "state_id,serialized_heights,empirical,exact\n" << std::setprecision(17);
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    for (int i = 0; i < e.size(); ++i) {
        std::ostringstream st;
        write_state(st, e.states[i]);
        std::string s = st.str();
        std::replace(s.begin(), s.end(), '\n', ' ');
        f << i << ",\"" << s << "\"," << counts[i] / total << ',' << mu.weights[i] << '\n';
    }
    res["samples"] = total;
    res["events"] = eng.event_count();
    res["spacing"] = spacing;
    res["chi_square"] = cs.chi_square;
    res["dof"] = cs.dof;
    res["p_value"] = cs.p_value;
    res["total_variation"] = cs.total_variation;
    return cs.p_value > 0.001 ? 0 : 1;
}

int run_compare_spde(const Config& c, Output& out, json& res) {
    auto prof = parse_profile(c.sigma);
    auto r = build_rates(prof, c.n);
    GibbsSampler gs(ModelKind::Bridge, r);
    const std::uint64_t seed = c.seeds.front();
    const int n = c.n;
    const double s = 1.0 / std::sqrt(2.0 * n);
    auto disc = parallel_map(
        c.samples,
        [&](std::size_t i) {
            Rng rng(derive_seed(seed, 2 * i));
            Engine eng(ModelKind::Bridge, gs.sample(rng), r);
            eng.set_recording(false, false);
            eng.run(c.t_end, rng);
            return eng.heights(1)[n] * s + (2 * rng.uniform() - 1) * s;
        },
        c.workers);
    auto cont = parallel_map(
        c.samples,
        [&](std::size_t i) {
            Rng rng(derive_seed(seed, 2 * i + 1));
            SpdeConfig sc;
            sc.m = 2 * n;
            sc.dt = c.dt;
            sc.T = c.t_end;
            sc.sigma = prof;
            sc.seed = rng();
            sc.initial = she_stationary_sample(sc.m, prof, rng);
            return she_integrate(sc).final_state.values[n];
        },
        c.workers);
    auto f = out.open("samples.csv");
    f << "index,discrete,spde\n" << std::setprecision(17);
    for (int i = 0; i < c.samples; ++i) f << i << ',' << disc[i] << ',' << cont[i] << '\n';
    auto ks = ks_distance(disc, cont);
    res["ks_statistic"] = ks.statistic;
    res["p_value"] = ks.p_value;
    res["discrete_mean"] = summarize("d", disc).mean;
    res["spde_mean"] = summarize("c", cont).mean;
    return ks.p_value > 0.001 ? 0 : 1;
}

int run_eigen(const Config& c, Output& out, json& res) {
    const ModelKind m = parse_model(c.model);
    auto r = build_rates(parse_profile(c.sigma), c.n);
    auto e = enumerate_states(m, c.n);
    auto mu = gibbs_measure(e, r);
    auto g = generator_matrix(e, r);
    std::vector<double> V(e.size());
    if (c.potential == "v") {
        if (m == ModelKind::Pair) throw ConfigError("potential v needs a single-interface model");
        for (int i = 0; i < e.size(); ++i)
            V[i] = v_statistic(to_particles(std::get<IntegerInterface>(e.states[i])), c.epsilon,
                               LocalFunctional::disagreement());
    } else if (c.potential == "random") {
        Rng rng(c.seeds.front());
        for (auto& v : V) v = 2 * rng.uniform() - 1;
    } else {
        throw ConfigError("potential must be v or random");
    }
    auto gf = out.open("generator.csv");
    write_generator_csv(gf, g);
    auto ev = principal_eigen(g, mu.weights, V, c.a);
    res["dimension"] = e.size();
    res["principal_eigenvalue"] = ev.value;
    if (e.size() <= 200) res["variational_supremum"] = variational_supremum(mu, r, V, c.a);
    return 0;
}

int run_enumerate(const Config& c, Output& out, json& res) {
    const ModelKind m = parse_model(c.model);
    auto r = build_rates(parse_profile(c.sigma), c.n);
    auto e = enumerate_states(m, c.n);
    auto mu = gibbs_measure(e, r);
    auto f = out.open("gibbs.csv");
    write_gibbs_csv(f, mu);
    res["states"] = e.size();
    res["closed_form_count"] = state_count(m, c.n);
    res["log_partition"] = mu.log_partition;
    res["detailed_balance_violation"] = detailed_balance_check(generator_matrix(e, r), mu);
    return 0;
}

int run_acceptance(const Config& c, Output& out, json& res) {
    acceptance::Options opt;
    opt.seed = c.seeds.front();
    opt.workers = c.workers;
    bool all = true;
    for (int id : acceptance::parse_selection(c.only)) {
        auto o = acceptance::run_one(acceptance::criteria()[id - 1], opt);
        acceptance::print_line(std::cout, o);
        std::cout.flush();
        res["criteria"].push_back(acceptance::to_json(o));
        all &= o.passed;
    }
    auto f = out.open("acceptance.json");
    f << res["criteria"].dump(2) << '\n';
    return all ? 0 : 1;
}

std::vector<std::string> manifest_args(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read manifest " + path);
    json j;
    try {
        j = json::parse(f);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed manifest: ") + e.what());
    }
    std::vector<std::string> args;
    for (auto& [k, v] : j.at("config").items()) {
        const std::string s = v.get<std::string>();
        if (k == "kind") continue;
        if (s.empty()) continue;
        args.push_back("--" + k);
        args.push_back(s);
    }
    args.insert(args.begin(), j.at("config").at("kind").get<std::string>());
    return args;
}

void build_app(CLI::App& app, Config& c, std::string& manifest) {
    app.set_config("--config", "", "key=value file; command-line flags take precedence");
    app.add_option("kind", c.kind, "experiment")
        ->check(CLI::IsMember({"simulate", "stationary", "compare-invariant", "compare-spde", "eigen", "enumerate",
                               "acceptance"}));
    app.add_option("--from-manifest", manifest, "re-run the configuration recorded in a manifest");
    app.add_option("--model", c.model, "bridge | bridge-wall | pair");
    app.add_option("--n", c.n, "half-length N");
    app.add_option("--sigma", c.sigma, "const:c | linear:a,b | sin:amp,freq | piecewise:v0,b1,v1,...");
    app.add_option("--t-end", c.t_end, "time horizon");
    app.add_option("--snapshots", c.snapshots, "snapshot times")->delimiter(',');
    app.add_option("--seed,--seeds", c.seeds, "seed list")->delimiter(',');
    app.add_option("--initial", c.initial, "stationary | uniform | zigzag | file:PATH");
    app.add_option("--events", c.events, "events for compare-invariant");
    app.add_option("--samples", c.samples, "ensemble size");
    app.add_option("--a", c.a, "potential strength for eigen");
    app.add_option("--potential", c.potential, "v | random");
    app.add_option("--epsilon", c.epsilon, "block scale of V");
    app.add_option("--m", c.m, "SPDE grid size");
    app.add_option("--dt", c.dt, "SPDE time step");
    app.add_option("--only", c.only, "acceptance criteria to run");
    app.add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", c.out, "output directory (default $WASEP_OUTPUT_ROOT/<kind>-<hash>)");
}

}  // namespace

int main(int argc, char** argv) {
    Config c;
    std::string manifest;
    {
        CLI::App app{"WASEP interface simulations and checks"};
        build_app(app, c, manifest);
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            const int rc = app.exit(e);
            return rc == 0 ? 0 : 2;
        }
    }
    try {
        if (!manifest.empty()) {
            // manifest first, then the flags given now
            auto margs = manifest_args(manifest);
            std::vector<std::string> args = {argv[0]};
            args.insert(args.end(), margs.begin(), margs.end());
            for (int i = 1; i < argc; ++i) {
                const std::string a = argv[i];
                if (a == "--from-manifest") {
                    ++i;
                    continue;
                }
                if (a.rfind("--from-manifest=", 0) == 0) continue;
                args.push_back(a);
            }
            std::vector<char*> av;
            for (auto& s : args) av.push_back(s.data());
            c = Config{};
            std::string ignored;
            CLI::App app{"WASEP interface simulations and checks"};
            build_app(app, c, ignored);
            try {
                app.parse(static_cast<int>(av.size()), av.data());
            } catch (const CLI::ParseError& e) {
                app.exit(e);
                return 2;
            }
        }
        if (c.kind.empty()) {
            std::cerr << "an experiment kind is required (simulate, stationary, compare-invariant, compare-spde, eigen, "
                         "enumerate, acceptance)\n";
            return 2;
        }
        check_config(c);
        fs::path dir;
        if (!c.out.empty()) {
            dir = c.out;
        } else {
            const char* root = std::getenv("WASEP_OUTPUT_ROOT");
            dir = fs::path(root && *root ? root : "wasep-out") / (c.kind + "-" + config_hash(c));
        }
        Output out(dir);
        json res = json::object();
        const auto t0 = std::chrono::steady_clock::now();
        int rc = 0;
        if (c.kind == "simulate") rc = run_simulate(c, out, res);
        else if (c.kind == "stationary") rc = run_stationary(c, out, res);
        else if (c.kind == "compare-invariant") rc = run_compare_invariant(c, out, res);
        else if (c.kind == "compare-spde") rc = run_compare_spde(c, out, res);
        else if (c.kind == "eigen") rc = run_eigen(c, out, res);
        else if (c.kind == "enumerate") rc = run_enumerate(c, out, res);
        else rc = run_acceptance(c, out, res);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        auto rf = out.open("report.json");
        rf << res.dump(2) << '\n';
        json m;
        m["config"] = echo(c);
        m["config_hash"] = config_hash(c);
        m["versions"] = {{"wasep", kVersion}, {"rng", rng_version}, {"compiler", __VERSION__}};
        m["wall_clock_seconds"] = secs;
        m["finished_at"] = static_cast<std::int64_t>(std::time(nullptr));
        m["status"] = rc == 0 ? "pass" : "check-failure";
        auto mf = out.open("manifest.json");
        mf << m.dump(2) << '\n';
        mf.close();
        rf.close();
        out.commit();
        if (c.kind != "acceptance") std::cout << res.dump(2) << '\n';
        std::cerr << "outputs in " << out.path().string() << '\n';
        return rc;
    } catch (const wasep::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
