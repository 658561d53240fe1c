#include "rotor/experiments.hpp"

#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>  // vendored nlohmann::json single header

#include "rotor/contour.hpp"
#include "rotor/version.hpp"

namespace rotor {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string format(const char* fmt, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    return buf;
}

// --- config parsing -------------------------------------------------------

const json* find(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

// Reject unknown keys so a typo ("stps") can't silently fall back to defaults.
void check_known(const json& j, std::initializer_list<const char*> keys,
                 const std::string& prefix) {
    for (const auto& [key, val] : j.items()) {
        bool known = false;
        for (const char* k : keys) known = known || key == k;
        if (!known) {
            throw ConfigError(prefix.empty() ? key : prefix + "." + key, "unknown field");
        }
    }
}

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t defv, const std::string& path) {
    const json* v = find(j, key);
    if (!v) return defv;
    if (!v->is_number_unsigned() && !v->is_number_integer()) {
        throw ConfigError(path, "expected a nonnegative integer");
    }
    if (v->is_number_integer() && v->get<std::int64_t>() < 0) {
        throw ConfigError(path, "expected a nonnegative integer");
    }
    return v->get<std::uint64_t>();
}

int get_int(const json& j, const char* key, int defv, const std::string& path) {
    const json* v = find(j, key);
    if (!v) return defv;
    if (!v->is_number_integer() && !v->is_number_unsigned()) {
        throw ConfigError(path, "expected an integer");
    }
    return v->get<int>();
}

bool get_bool(const json& j, const char* key, bool defv, const std::string& path) {
    const json* v = find(j, key);
    if (!v) return defv;
    if (!v->is_boolean()) throw ConfigError(path, "expected true or false");
    return v->get<bool>();
}

std::string get_str(const json& j, const char* key, const std::string& defv, const std::string& path) {
    const json* v = find(j, key);
    if (!v) return defv;
    if (!v->is_string()) throw ConfigError(path, "expected a string");
    return v->get<std::string>();
}

std::vector<double> get_prob_vector(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError(path, "expected an array of probabilities");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError(path, "expected numeric entries");
        out.push_back(e.get<double>());
    }
    return out;
}

int parse_count_key(const std::string& key, const std::string& path) {
    try {
        std::size_t pos = 0;
        const int k = std::stoi(key, &pos);
        if (pos != key.size() || k < 0) throw std::invalid_argument(key);
        return k;
    } catch (const std::exception&) {
        throw ConfigError(path, "keys must be nonnegative integers, got '" + key + "'");
    }
}

EnvironmentSpec parse_env(const json& j) {
    if (!j.is_object()) throw ConfigError("environment", "expected an object");
    EnvironmentSpec spec;
    const std::string kind = get_str(j, "kind", "regular", "environment.kind");
    if (kind == "regular") {
        check_known(j, {"kind", "d", "rotor"}, "environment");
        spec.kind = EnvironmentSpec::Kind::Regular;
        const int d = get_int(j, "d", 0, "environment.d");
        if (d < 1 || d > kMaxDegree) {
            throw ConfigError("environment.d", "regular trees need d in 1.." + std::to_string(kMaxDegree));
        }
        const json* rotor = find(j, "rotor");
        try {
            if (!rotor || (rotor->is_string() && rotor->get<std::string>() == "uniform")) {
                spec.rotor_law = RotorLaw::uniform(d);
            } else {
                spec.rotor_law = RotorLaw(d, get_prob_vector(*rotor, "environment.rotor"));
            }
        } catch (const InvalidLaw& e) {
            throw ConfigError("environment.rotor", e.what());
        }
    } else if (kind == "gw" || kind == "galton_watson") {
        check_known(j, {"kind", "offspring", "rotors"}, "environment");
        spec.kind = EnvironmentSpec::Kind::GaltonWatson;
        const json* off = find(j, "offspring");
        if (!off || !off->is_object()) {
            throw ConfigError("environment.offspring",
                              "galton-watson environments need an offspring law object {\"k\": p_k}");
        }
        std::map<int, double> probs;
        for (const auto& [key, val] : off->items()) {
            const int k = parse_count_key(key, "environment.offspring");
            if (!val.is_number()) throw ConfigError("environment.offspring", "probabilities must be numbers");
            probs[k] = val.get<double>();
        }
        try {
            spec.offspring = OffspringLaw(std::move(probs));
        } catch (const InvalidLaw& e) {
            throw ConfigError("environment.offspring", e.what());
        }
        const json* rows = find(j, "rotors");
        try {
            if (!rows || (rows->is_string() && rows->get<std::string>() == "uniform")) {
                spec.rotors = RotorMatrix::uniform_for(*spec.offspring);
            } else if (rows->is_object()) {
                std::map<int, std::vector<double>> parsed;
                for (const auto& [key, val] : rows->items()) {
                    const int k = parse_count_key(key, "environment.rotors");
                    parsed[k] = get_prob_vector(val, "environment.rotors." + key);
                }
                spec.rotors = RotorMatrix(std::move(parsed));
            } else {
                throw ConfigError("environment.rotors", "expected \"uniform\" or an object of rows");
            }
            // Fail early if some supported offspring count has no row.
            for (auto [k, pk] : spec.offspring->support()) (void)spec.rotors->row(k);
        } catch (const InvalidLaw& e) {
            throw ConfigError("environment.rotors", e.what());
        } catch (const MissingRow& e) {
            throw ConfigError("environment.rotors", e.what());
        }
    } else {
        throw ConfigError("environment.kind", "expected \"regular\" or \"gw\", got \"" + kind + "\"");
    }
    return spec;
}

json canonical_json(const ExperimentConfig& cfg) {
    json e;
    if (cfg.env.kind == EnvironmentSpec::Kind::Regular) {
        e["kind"] = "regular";
        e["d"] = cfg.env.rotor_law->degree();
        e["rotor"] = std::vector<double>(cfg.env.rotor_law->probs().begin(),
                                         cfg.env.rotor_law->probs().end());
    } else {
        e["kind"] = "gw";
        json off = json::object();
        for (auto [k, pk] : cfg.env.offspring->support()) off[std::to_string(k)] = pk;
        e["offspring"] = off;
        json rows = json::object();
        for (const auto& [k, row] : cfg.env.rotors->rows()) rows[std::to_string(k)] = row;
        e["rotors"] = rows;
    }
    json j;
    j["environment"] = e;
    j["walk"] = cfg.walk == WalkKind::Rotor ? "rotor" : "srw";
    j["mode"] = cfg.by_returns ? "returns" : "steps";
    j["steps"] = cfg.steps;
    j["returns"] = cfg.k_returns;
    j["step_cap"] = cfg.step_cap;
    j["stride"] = cfg.sample_stride;
    j["replicas"] = cfg.replicas;
    j["seed"] = cfg.seed;
    j["node_budget"] = cfg.node_budget;
    j["contour"] = {{"k", cfg.contour_k},
                    {"level", cfg.contour_level},
                    {"empirical", cfg.contour_empirical},
                    {"empirical_k", cfg.contour_empirical_k}};
    j["sweep"] = {{"family", cfg.sweep_family}, {"grid", cfg.sweep_grid}};
    return j;
}

std::string hash_hex(const ExperimentConfig& cfg) {
    const std::string dump = canonical_json(cfg).dump();
    return format("%016" PRIx64, fnv1a({dump.data(), dump.size()}));
}

// --- identity checks -------------------------------------------------------

std::uint64_t recount_frontier(const NodeStore& store) {
    std::uint64_t count = 0;
    for (std::uint32_t i = 0; i < store.size(); ++i) {
        const Node& nd = store.node_at(i);
        if (nd.first_visit == kNeverVisited) continue;
        for (std::uint16_t s = 0; s < nd.child_count; ++s) {
            const std::uint32_t c = store.child(i, s);
            if (c == kNoNode || !store.visited(c)) ++count;
        }
    }
    return count;
}

struct IdentityCounts {
    std::uint64_t checked = 0;
    std::uint64_t tau_fail = 0;
    std::uint64_t leaf_fail = 0;
};

// tau_k - tau_{k-1} = 2 |R_{tau_k}| and the frontier identities, in exact
// integer arithmetic.
IdentityCounts check_return_identities(const TrajectoryStats& st, std::optional<int> regular_d) {
    IdentityCounts c;
    std::uint64_t prev = 0;
    for (const ReturnEvent& ev : st.returns) {
        ++c.checked;
        if (ev.tau - prev != 2 * ev.range) ++c.tau_fail;
        bool leaf_ok = ev.frontier == 1 + ev.child_sum - ev.range;
        if (regular_d) {
            leaf_ok = leaf_ok &&
                      ev.frontier == 1 + static_cast<std::uint64_t>(*regular_d - 1) * ev.range;
        }
        if (!leaf_ok) ++c.leaf_fail;
        prev = ev.tau;
    }
    return c;
}

void mean_stderr(const std::vector<double>& xs, double& mean, double& se) {
    mean = 0.0;
    se = 0.0;
    if (xs.empty()) {
        mean = kNaN;
        se = kNaN;
        return;
    }
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) return;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0) / static_cast<double>(xs.size()));
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);  // binary: identical bytes on every platform
    if (!f) throw Error("cannot open output file " + p.string());
    return f;
}

}  // namespace

// --- environment specs ------------------------------------------------------

std::string EnvironmentSpec::describe() const {
    // Build a throwaway environment so the string matches run reports exactly.
    return make_environment(*this, RandomSource{0, 0}, 4).describe();
}

Environment make_environment(const EnvironmentSpec& spec, RandomSource src,
                              std::uint64_t node_budget) {
    if (spec.kind == EnvironmentSpec::Kind::Regular) {
        return Environment::regular(*spec.rotor_law, src, node_budget);
    }
    return Environment::galton_watson(*spec.offspring, *spec.rotors, src, node_budget);
}

Constants spec_constants(const EnvironmentSpec& spec) {
    if (spec.kind == EnvironmentSpec::Kind::Regular) {
        return range_constant(*spec.rotor_law);
    }
    return range_constant(*spec.offspring, *spec.rotors);
}

bool spec_has_uniform_rotors(const EnvironmentSpec& spec) {
    if (spec.kind != EnvironmentSpec::Kind::GaltonWatson) return false;
    for (const auto& [k, row] : spec.rotors->rows()) {
        const double u = 1.0 / (k + 1);
        for (double v : row) {
            if (std::abs(v - u) > kProbTol) return false;
        }
    }
    return true;
}

// --- config ------------------------------------------------------------------

ExperimentConfig parse_config_text(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("<document>", e.what());
    }
    if (!j.is_object()) throw ConfigError("<document>", "top level must be an object");
    check_known(j,
                {"environment", "walk", "mode", "steps", "returns", "step_cap", "stride",
                 "replicas", "seed", "node_budget", "threads", "strict", "out", "contour",
                 "sweep"},
                "");

    ExperimentConfig cfg;
    const json* env = find(j, "environment");
    if (!env) throw ConfigError("environment", "missing");
    cfg.env = parse_env(*env);

    const std::string walk = get_str(j, "walk", "rotor", "walk");
    if (walk == "rotor") {
        cfg.walk = WalkKind::Rotor;
    } else if (walk == "srw") {
        cfg.walk = WalkKind::Srw;
    } else {
        throw ConfigError("walk", "expected \"rotor\" or \"srw\"");
    }

    const std::string mode = get_str(j, "mode", "steps", "mode");
    if (mode == "steps") {
        cfg.by_returns = false;
    } else if (mode == "returns") {
        cfg.by_returns = true;
    } else {
        throw ConfigError("mode", "expected \"steps\" or \"returns\"");
    }

    cfg.steps = get_u64(j, "steps", cfg.steps, "steps");
    if (cfg.steps == 0) throw ConfigError("steps", "must be positive");
    cfg.k_returns = get_u64(j, "returns", cfg.k_returns, "returns");
    if (cfg.k_returns == 0) throw ConfigError("returns", "must be positive");
    cfg.step_cap = get_u64(j, "step_cap", cfg.step_cap, "step_cap");
    if (cfg.step_cap == 0) throw ConfigError("step_cap", "must be positive");
    cfg.sample_stride = get_u64(j, "stride", cfg.sample_stride, "stride");
    const std::uint64_t reps = get_u64(j, "replicas", cfg.replicas, "replicas");
    if (reps == 0 || reps > 0xFFFFFFFFull) throw ConfigError("replicas", "must be in 1..2^32-1");
    cfg.replicas = static_cast<std::uint32_t>(reps);
    cfg.seed = get_u64(j, "seed", cfg.seed, "seed");
    cfg.node_budget = get_u64(j, "node_budget", cfg.node_budget, "node_budget");
    if (cfg.node_budget == 0) throw ConfigError("node_budget", "must be positive");
    const std::uint64_t thr = get_u64(j, "threads", 0, "threads");
    if (thr > 1024) throw ConfigError("threads", "must be in 0..1024");
    cfg.threads = static_cast<unsigned>(thr);
    cfg.strict = get_bool(j, "strict", false, "strict");
    cfg.out_dir = get_str(j, "out", cfg.out_dir, "out");

    if (const json* c = find(j, "contour")) {
        if (!c->is_object()) throw ConfigError("contour", "expected an object");
        check_known(*c, {"k", "level", "empirical", "empirical_k"}, "contour");
        cfg.contour_k = get_int(*c, "k", cfg.contour_k, "contour.k");
        if (cfg.contour_k < 1 || cfg.contour_k > 64) throw ConfigError("contour.k", "must be in 1..64");
        cfg.contour_level = get_int(*c, "level", cfg.contour_level, "contour.level");
        if (cfg.contour_level < 0 || cfg.contour_level > 30) {
            throw ConfigError("contour.level", "must be in 0..30");
        }
        const std::uint64_t emp = get_u64(*c, "empirical", 0, "contour.empirical");
        if (emp > 0xFFFFFFFFull) throw ConfigError("contour.empirical", "too large");
        cfg.contour_empirical = static_cast<std::uint32_t>(emp);
        cfg.contour_empirical_k = get_int(*c, "empirical_k", 1, "contour.empirical_k");
        if (cfg.contour_empirical_k < 1) throw ConfigError("contour.empirical_k", "must be positive");
    }

    if (const json* s = find(j, "sweep")) {
        if (!s->is_object()) throw ConfigError("sweep", "expected an object");
        check_known(*s, {"family", "grid"}, "sweep");
        cfg.sweep_family = get_int(*s, "family", cfg.sweep_family, "sweep.family");
        if (cfg.sweep_family < 2 || cfg.sweep_family > kMaxDegree) {
            throw ConfigError("sweep.family", "must be at least 2");
        }
        if (const json* g = find(*s, "grid")) {
            cfg.sweep_grid = get_prob_vector(*g, "sweep.grid");
            for (double p : cfg.sweep_grid) {
                if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("sweep.grid", "entries must lie in [0,1]");
            }
        }
    }
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("<file>", "cannot read config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    const std::string dump = canonical_json(cfg).dump();
    return fnv1a({dump.data(), dump.size()});
}

unsigned resolve_threads(unsigned requested) {
    if (requested) return requested;
    if (const char* s = std::getenv("ROTORWALK_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(s, &end, 10);
        if (end != s && *end == '\0' && v >= 1 && v <= 1024) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

void parallel_for(std::uint32_t count, unsigned threads,
                  const std::function<void(std::uint32_t)>& fn) {
    if (count == 0) return;
    const unsigned t = std::min<unsigned>(std::max(threads, 1u), count);
    if (t <= 1) {
        for (std::uint32_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::uint32_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    auto work = [&] {
        for (;;) {
            const std::uint32_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (unsigned i = 0; i < t; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

// --- constants command --------------------------------------------------------

ConstantsReport constants_report(const ExperimentConfig& cfg) {
    const Constants c = spec_constants(cfg.env);
    const std::string env_desc = cfg.env.describe();

    json j;
    j["tool"] = "rotorwalk";
    j["version"] = kVersion;
    j["command"] = "constants";
    j["config_hash"] = hash_hex(cfg);
    j["environment"] = env_desc;
    j["regime"] = regime_name(c.regime);
    j["m"] = c.m;
    j["mu"] = c.mu;
    j["alpha"] = c.alpha;
    j["ell"] = c.ell;

    std::string text;
    text += "environment: " + env_desc + "\n";
    text += format("regime: %s (m = %.12g, mu = %.12g)\n", regime_name(c.regime), c.m, c.mu);
    text += format("alpha (range constant): %.12g\n", c.alpha);
    text += format("ell (speed): %.12g\n", c.ell);

    if (c.regime != Regime::PositiveRecurrent) {
        const double resid = 2.0 * c.alpha - c.ell - 1.0;
        j["einstein_residual"] = resid;
        text += format("einstein relation 2*alpha - ell - 1 = %.3g\n", resid);
    }
    if (c.transient) {
        const TransientIngredients& t = *c.transient;
        j["q"] = t.q;
        j["fprime_q"] = t.fprime_q;
        j["trap_mean"] = t.trap_mean;
        j["ray_right_mean"] = t.ray_right_mean;
        text += format("q = %.12g, f'(q) = %.12g, trap mean = %.12g, ray-right mean = %.12g\n",
                       t.q, t.fprime_q, t.trap_mean, t.ray_right_mean);
    }
    if (c.diagnostics) {
        const FormulaDiagnostics& dg = *c.diagnostics;
        json d;
        d["alpha_closed_form"] = dg.alpha_closed_form;
        d["ell_closed_form"] = dg.ell_closed_form;
        d["alpha_gap"] = c.alpha - dg.alpha_closed_form;
        d["ell_gap"] = c.ell - dg.ell_closed_form;
        d["trap_offspring_mean"] = dg.trap_offspring_mean;
        d["trap_offspring_mean_scaled"] = dg.trap_offspring_mean_scaled;
        if (dg.alpha_uniform_series) d["alpha_uniform_series"] = *dg.alpha_uniform_series;
        j["diagnostics"] = d;
        text += format("closed-form cross-check: alpha = %.12g (gap %.6g), ell = %.12g (gap %.6g)\n",
                       dg.alpha_closed_form, c.alpha - dg.alpha_closed_form,
                       dg.ell_closed_form, c.ell - dg.ell_closed_form);
        if (dg.alpha_uniform_series) {
            text += format("uniform-series cross-check: alpha = %.12g (gap %.6g)\n",
                           *dg.alpha_uniform_series, c.alpha - *dg.alpha_uniform_series);
        }
        if (std::abs(c.alpha - dg.alpha_closed_form) > 1e-9 ||
            (dg.alpha_uniform_series && std::abs(c.alpha - *dg.alpha_uniform_series) > 1e-9)) {
            text += "note: the closed-form variants disagree with the excursion-decomposition "
                    "values for this law; both are emitted so the gap stays visible\n";
        }
    }

    if (cfg.env.kind == EnvironmentSpec::Kind::Regular) {
        const int d = cfg.env.rotor_law->degree();
        const double srw = (d - 1.0) / d;
        j["srw_alpha"] = srw;
        text += format("srw range constant (d-1)/d: %.12g\n", srw);
        if (c.regime == Regime::PositiveRecurrent && d >= 2) {
            const LeafProcess lp = leaf_process_mean(*cfg.env.rotor_law);
            j["leaf_process"] = {{"nu", lp.nu}, {"alpha", lp.alpha}};
            text += format("leaf process: nu = %.12g, alpha = %.12g\n", lp.nu, lp.alpha);
        }
    } else {
        if (c.regime == Regime::PositiveRecurrent) {
            const double lambda = gw_leaf_process_mean(*cfg.env.offspring, *cfg.env.rotors);
            j["leaf_process"] = {{"lambda", lambda}};
            text += format("leaf process: lambda = %.12g\n", lambda);
        }
        if (spec_has_uniform_rotors(cfg.env)) {
            const double hint = (c.mu - 1.0) / c.mu;
            const bool valid = c.mu <= 2.0 + kProbTol;
            j["uniform_rotor_alpha"] = {{"value", hint}, {"valid", valid}};
            if (valid) {
                text += format("uniform-rotor shortcut (mu-1)/mu = %.12g (gap %.6g)\n", hint,
                               c.alpha - hint);
            } else {
                text += format("uniform-rotor shortcut (mu-1)/mu = %.12g -- NOT applicable: "
                               "it requires mu <= 2, and mu = %.12g\n", hint, c.mu);
            }
        }
    }

    return {text, j.dump(2) + "\n"};
}

// --- simulate command -----------------------------------------------------------

SimulateResult simulate(const ExperimentConfig& cfg) {
    const std::uint64_t stride =
        cfg.sample_stride ? cfg.sample_stride : std::max<std::uint64_t>(1, cfg.steps / 200);
    const unsigned threads = resolve_threads(cfg.threads);

    std::vector<TrajectoryStats> stats(cfg.replicas);
    std::vector<ReplicaSummary> reps(cfg.replicas);
    std::vector<IdentityCounts> ids(cfg.replicas);

    parallel_for(cfg.replicas, threads, [&](std::uint32_t i) {
        ReplicaSummary rs;
        rs.index = i;
        try {
            Environment env = make_environment(cfg.env, {cfg.seed, i}, cfg.node_budget);
            Walker w;
            TrajectoryStats st =
                cfg.by_returns
                    ? run_until_returns(env, w, cfg.k_returns, cfg.step_cap, cfg.walk)
                    : run_steps(env, w, cfg.steps, stride, cfg.walk);
            rs.n = st.final_n;
            rs.range = st.final_range;
            rs.depth = st.final_depth;
            rs.range_rate = st.final_n ? static_cast<double>(st.final_range) / static_cast<double>(st.final_n) : 0.0;
            rs.speed = st.final_n ? static_cast<double>(st.final_depth) / static_cast<double>(st.final_n) : 0.0;
            rs.returns = st.returns.size();
            rs.truncated = st.truncated;
            if (cfg.walk == WalkKind::Rotor) {
                ids[i] = check_return_identities(st, env.forward_degree());
                const bool recount_ok = recount_frontier(env.store()) == env.frontier();
                rs.identities_ok = ids[i].tau_fail + ids[i].leaf_fail == 0 && recount_ok;
                if (!recount_ok) ++ids[i].leaf_fail;
            }
            stats[i] = std::move(st);
        } catch (const MemoryBudgetExceeded& e) {
            rs.error = e.what();
        }
        reps[i] = std::move(rs);
    });

    SimulateResult res;
    res.replicas = reps;
    std::vector<double> rates, speeds;
    for (const ReplicaSummary& rs : reps) {
        if (!rs.error.empty()) {
            res.any_failed = true;
            continue;
        }
        rates.push_back(rs.range_rate);
        speeds.push_back(rs.speed);
        res.any_truncated = res.any_truncated || rs.truncated;
    }
    mean_stderr(rates, res.mean_range_rate, res.stderr_range_rate);
    mean_stderr(speeds, res.mean_speed, res.stderr_speed);
    for (const IdentityCounts& c : ids) {
        res.returns_checked += c.checked;
        res.identity_failures += c.tau_fail + c.leaf_fail;
    }

    // All output is written serially, in replica order, after the runs: byte
    // identical regardless of the worker count.
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    for (std::uint32_t i = 0; i < cfg.replicas; ++i) {
        auto f = open_out(dir / format("replica_%03u.csv", i));
        if (cfg.by_returns) {
            f << "k,tau,range,frontier,child_sum\n";
            std::uint64_t k = 0;
            for (const ReturnEvent& ev : stats[i].returns) {
                f << format("%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%" PRIu64 "\n",
                            ++k, ev.tau, ev.range, ev.frontier, ev.child_sum);
            }
        } else {
            f << "n,range,depth\n";
            for (const Sample& s : stats[i].samples) {
                f << format("%" PRIu64 ",%" PRIu64 ",%" PRId64 "\n", s.n, s.range, s.depth);
            }
        }
    }

    json j;
    j["tool"] = "rotorwalk";
    j["version"] = kVersion;
    j["command"] = "simulate";
    j["config_hash"] = hash_hex(cfg);
    j["environment"] = cfg.env.describe();
    j["walk"] = cfg.walk == WalkKind::Rotor ? "rotor" : "srw";
    j["mode"] = cfg.by_returns ? "returns" : "steps";
    if (cfg.by_returns) {
        j["returns"] = cfg.k_returns;
        j["step_cap"] = cfg.step_cap;
    } else {
        j["steps"] = cfg.steps;
        j["stride"] = stride;
    }
    j["replicas"] = cfg.replicas;
    j["seed"] = cfg.seed;
    j["node_budget"] = cfg.node_budget;
    j["aggregate"] = {{"range_rate", {{"mean", res.mean_range_rate}, {"stderr", res.stderr_range_rate}}},
                      {"speed", {{"mean", res.mean_speed}, {"stderr", res.stderr_speed}}},
                      {"replicas_used", rates.size()}};
    j["identities"] = {{"returns_checked", res.returns_checked},
                       {"failures", res.identity_failures}};
    json detail = json::array();
    for (const ReplicaSummary& rs : reps) {
        json r;
        r["index"] = rs.index;
        if (rs.error.empty()) {
            r["n"] = rs.n;
            r["range"] = rs.range;
            r["depth"] = rs.depth;
            r["range_rate"] = rs.range_rate;
            r["speed"] = rs.speed;
            r["returns"] = rs.returns;
            r["identities_ok"] = rs.identities_ok;
            r["truncated"] = rs.truncated;
        } else {
            r["error"] = rs.error;
        }
        detail.push_back(r);
    }
    j["replicas_detail"] = detail;

    const std::filesystem::path summary = dir / "summary.json";
    open_out(summary) << j.dump(2) << "\n";
    res.summary_path = summary.string();
    return res;
}

// --- table command ----------------------------------------------------------------

std::vector<TableRow> table_rows(int d_min, int d_max) {
    if (d_min < 2 || d_max < d_min) throw Error("table: need 2 <= d_min <= d_max");
    std::vector<TableRow> rows;
    for (int d = d_min; d <= d_max; ++d) {
        const Constants c = range_constant(RotorLaw::uniform(d));
        rows.push_back({d, c.alpha, (d - 1.0) / d});
    }
    return rows;
}

std::string table_text(int d_min, int d_max) {
    std::string out = "  d   rotor    srw\n";
    for (const TableRow& r : table_rows(d_min, d_max)) {
        out += format("%3d   %.3f   %.3f\n", r.d, r.alpha, r.srw_alpha);
    }
    return out;
}

// --- gw-sweep command ---------------------------------------------------------------

SweepResult gw_sweep(const ExperimentConfig& cfg) {
    std::vector<double> grid = cfg.sweep_grid;
    if (grid.empty()) {
        for (int i = 0; i <= 9; ++i) grid.push_back(i / 10.0);
    }
    const int fam = cfg.sweep_family;
    const unsigned threads = resolve_threads(cfg.threads);

    SweepResult res;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const double p = grid[gi];
        SweepPoint pt;
        pt.family = fam;
        pt.p = p;
        pt.alpha_analytic = kNaN;
        pt.rotor_mc = pt.rotor_se = pt.srw_mc = pt.srw_se = kNaN;
        if (p == 0.0) pt.note = "regular_endpoint";

        std::map<int, double> probs;
        if (p > 0.0) probs[1] = p;
        if (p < 1.0) probs[fam] = 1.0 - p;
        try {
            const OffspringLaw off(std::move(probs));
            const RotorMatrix rows = RotorMatrix::uniform_for(off);
            pt.mu = off.mean();
            pt.m = gw_good_child_law(off, rows).mean();
            pt.regime = regime_name(classify(pt.m));
            try {
                pt.alpha_analytic = range_constant(off, rows).alpha;
            } catch (const DegenerateEnvironment& e) {
                pt.note = pt.note.empty() ? e.what() : pt.note + "; " + e.what();
            }

            // Monte Carlo, rotor then srw, each replica on its own stream.
            const auto mc = [&](WalkKind kind, double& mean, double& se) {
                std::vector<double> rates(cfg.replicas);
                parallel_for(cfg.replicas, threads, [&](std::uint32_t i) {
                    const std::uint64_t stream = (static_cast<std::uint64_t>(gi) << 33) |
                                                 (kind == WalkKind::Srw ? (1ull << 32) : 0) | i;
                    Environment env = Environment::galton_watson(off, rows, {cfg.seed, stream},
                                                                 cfg.node_budget);
                    Walker w;
                    const TrajectoryStats st = run_steps(env, w, cfg.steps, 0, kind);
                    rates[i] = static_cast<double>(st.final_range) / static_cast<double>(st.final_n);
                });
                mean_stderr(rates, mean, se);
            };
            try {
                mc(WalkKind::Rotor, pt.rotor_mc, pt.rotor_se);
                mc(WalkKind::Srw, pt.srw_mc, pt.srw_se);
            } catch (const Error& e) {
                pt.note = pt.note.empty() ? std::string("mc failed: ") + e.what()
                                          : pt.note + "; mc failed: " + e.what();
            }
        } catch (const Error& e) {
            pt.note = pt.note.empty() ? e.what() : pt.note + "; " + e.what();
        }
        res.points.push_back(std::move(pt));
    }

    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    const std::filesystem::path csv = dir / format("gw_sweep_family%d.csv", fam);
    auto f = open_out(csv);
    f << "family,p,mu,m,regime,alpha_analytic,rotor_mc,rotor_se,srw_mc,srw_se,note\n";
    for (const SweepPoint& pt : res.points) {
        f << format("%d,%.10g,%.10g,%.10g,%s,%.10g,%.10g,%.10g,%.10g,%.10g,%s\n", pt.family, pt.p,
                    pt.mu, pt.m, pt.regime.c_str(), pt.alpha_analytic, pt.rotor_mc, pt.rotor_se,
                    pt.srw_mc, pt.srw_se, pt.note.c_str());
    }
    res.csv_path = csv.string();
    return res;
}

// --- contour command ----------------------------------------------------------------

ContourResult contour_run(const ExperimentConfig& cfg) {
    if (cfg.env.kind != EnvironmentSpec::Kind::Regular) {
        throw ConfigError("environment", "the contour command needs a regular tree environment");
    }
    const RotorLaw& law = *cfg.env.rotor_law;
    const int d = law.degree();
    const int k = cfg.contour_k;
    const int level = cfg.contour_level;
    const CumulativeLaw claw(law);
    const Regime regime = classify(good_child_law(law).mean());

    ContourResult res;
    res.formal = regime == Regime::Transient;

    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);

    const std::vector<ContourGrid> grids = expected_contour_grids(claw, k, level);
    for (int j = 1; j <= k; ++j) {
        const ContourGrid& g = grids[static_cast<std::size_t>(j - 1)];
        const std::filesystem::path raw = dir / format("contour_g%d.csv", j);
        const std::filesystem::path norm = dir / format("contour_g%d_norm.csv", j);
        auto fr = open_out(raw);
        auto fn = open_out(norm);
        fr << "cell_index,x_left,value\n";
        fn << "cell_index,x_left,value\n";
        for (std::uint64_t c = 0; c < g.cells(); ++c) {
            fr << format("%" PRIu64 ",%.17g,%.17g\n", c, g.x_left(c), g.values[c]);
            fn << format("%" PRIu64 ",%.17g,%.17g\n", c, g.x_left(c), g.values[c] / j);
        }
        res.files.push_back(raw.string());
        res.files.push_back(norm.string());
    }

    json j;
    j["tool"] = "rotorwalk";
    j["version"] = kVersion;
    j["command"] = "contour";
    j["config_hash"] = hash_hex(cfg);
    j["environment"] = cfg.env.describe();
    j["d"] = d;
    j["k"] = k;
    j["level"] = level;
    j["regime"] = regime_name(regime);
    j["formal"] = res.formal;

    if (cfg.contour_empirical > 0) {
        if (regime == Regime::Transient) {
            throw ConfigError("contour.empirical",
                              "the empirical contour tracks sink-return excursions and needs a "
                              "recurrent law");
        }
        const int ek = cfg.contour_empirical_k;
        const std::uint32_t n = cfg.contour_empirical;
        const std::uint64_t cells = grids.front().cells();
        const unsigned threads = resolve_threads(cfg.threads);

        std::vector<std::vector<double>> measured(n);
        std::vector<std::uint8_t> trunc(n, 0);
        parallel_for(n, threads, [&](std::uint32_t i) {
            Environment env = make_environment(cfg.env, {cfg.seed, i}, cfg.node_budget);
            Walker w;
            const TrajectoryStats st =
                run_until_returns(env, w, static_cast<std::uint64_t>(ek), cfg.step_cap);
            trunc[i] = st.truncated ? 1 : 0;
            measured[i] = contour_of_range(env.store(), d, level).values;
        });

        std::vector<double> mean(cells, 0.0), se(cells, 0.0);
        for (std::uint32_t i = 0; i < n; ++i) {
            for (std::uint64_t c = 0; c < cells; ++c) mean[c] += measured[i][c];
            res.truncated += trunc[i];
        }
        for (std::uint64_t c = 0; c < cells; ++c) mean[c] /= n;
        if (n >= 2) {
            for (std::uint32_t i = 0; i < n; ++i) {
                for (std::uint64_t c = 0; c < cells; ++c) {
                    const double dlt = measured[i][c] - mean[c];
                    se[c] += dlt * dlt;
                }
            }
            for (std::uint64_t c = 0; c < cells; ++c) {
                se[c] = std::sqrt(se[c] / (n - 1.0) / static_cast<double>(n));
            }
        }
        res.excursions = n;

        const std::filesystem::path emp = dir / format("contour_empirical_k%d.csv", ek);
        auto f = open_out(emp);
        f << "cell_index,x_left,mean,stderr\n";
        for (std::uint64_t c = 0; c < cells; ++c) {
            f << format("%" PRIu64 ",%.17g,%.17g,%.17g\n", c,
                        static_cast<double>(c) / static_cast<double>(cells), mean[c], se[c]);
        }
        res.files.push_back(emp.string());
        j["empirical"] = {{"k", ek},
                          {"excursions", n},
                          {"truncated", res.truncated},
                          {"step_cap", cfg.step_cap}};
    }

    json files = json::array();
    for (const std::string& s : res.files) files.push_back(s);
    j["files"] = files;
    const std::filesystem::path summary = dir / "contour_summary.json";
    open_out(summary) << j.dump(2) << "\n";
    res.files.push_back(summary.string());
    return res;
}

// --- audit command -----------------------------------------------------------------

AuditReport audit(const ExperimentConfig& cfg) {
    if (cfg.walk != WalkKind::Rotor) {
        throw ConfigError("walk", "the identity audit applies to rotor walks; set walk=rotor");
    }
    AuditReport rep;
    rep.replicas = cfg.replicas;
    std::string detail;

    for (std::uint32_t i = 0; i < cfg.replicas; ++i) {
        Environment env = make_environment(cfg.env, {cfg.seed, i}, cfg.node_budget);
        Walker w;
        std::uint64_t prev_tau = 0;
        for (std::uint64_t kidx = 1; kidx <= cfg.k_returns; ++kidx) {
            if (w.steps >= cfg.step_cap) {
                rep.any_truncated = true;
                break;
            }
            // One return at a time so the frontier can be recounted at each tau_k.
            const TrajectoryStats st = run_until_returns(env, w, 1, cfg.step_cap - w.steps);
            if (st.truncated) {
                rep.any_truncated = true;
                break;
            }
            const ReturnEvent ev = st.returns.front();
            ++rep.returns_checked;
            if (ev.tau - prev_tau != 2 * ev.range) {
                ++rep.tau_failures;
                detail += format("replica %u return %" PRIu64
                                 ": tau increment %" PRIu64 " != 2*range %" PRIu64 "\n",
                                 i, kidx, ev.tau - prev_tau, 2 * ev.range);
            }
            bool leaf_ok = ev.frontier == 1 + ev.child_sum - ev.range;
            if (const std::optional<int> d = env.forward_degree()) {
                leaf_ok = leaf_ok &&
                          ev.frontier == 1 + static_cast<std::uint64_t>(*d - 1) * ev.range;
            }
            if (!leaf_ok) {
                ++rep.leaf_failures;
                detail += format("replica %u return %" PRIu64 ": frontier %" PRIu64
                                 " violates the leaf identity (range %" PRIu64
                                 ", child_sum %" PRIu64 ")\n",
                                 i, kidx, ev.frontier, ev.range, ev.child_sum);
            }
            if (recount_frontier(env.store()) != ev.frontier) {
                ++rep.recount_failures;
                detail += format("replica %u return %" PRIu64 ": frontier recount mismatch\n", i, kidx);
            }
            prev_tau = ev.tau;
        }
    }

    rep.text = format("identity audit: %u replicas, %" PRIu64 " returns checked\n", rep.replicas,
                      rep.returns_checked);
    rep.text += format("tau identity failures: %" PRIu64 "\n", rep.tau_failures);
    rep.text += format("leaf identity failures: %" PRIu64 "\n", rep.leaf_failures);
    rep.text += format("frontier recount failures: %" PRIu64 "\n", rep.recount_failures);
    if (rep.any_truncated) rep.text += "warning: some replicas hit the step cap\n";
    rep.text += detail;
    rep.text += rep.ok() ? "all identities hold exactly\n" : "IDENTITY VIOLATIONS FOUND\n";
    return rep;
}

}  // namespace rotor
