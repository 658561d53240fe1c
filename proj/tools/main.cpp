// rotorwalk: simulation and analytic cross-checks for rotor walks on trees.

#include <cinttypes>
#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rotor/experiments.hpp"
#include "rotor/version.hpp"

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed, steps, replicas, stride, step_cap, node_budget, returns;
    std::optional<unsigned> threads;
    std::optional<std::string> out;
    bool strict = false;

    // command-specific
    std::optional<int> family;
    std::optional<int> contour_k, contour_level, contour_empirical_k;
    std::optional<std::uint64_t> contour_empirical;
};

void add_common(CLI::App* sc, Overrides& o) {
    sc->add_option("-c,--config", o.config_path, "JSON experiment config")
        ->required()
        ->check(CLI::ExistingFile);
    sc->add_option("--seed", o.seed, "base seed; replica i runs on stream i");
    sc->add_option("--steps", o.steps, "steps per replica");
    sc->add_option("--replicas", o.replicas, "number of independent replicas");
    sc->add_option("--returns", o.returns, "sink returns per replica (returns mode)");
    sc->add_option("--stride", o.stride, "sampling stride; 0 means steps/200");
    sc->add_option("--step-cap", o.step_cap, "hard step cap for return-driven runs");
    sc->add_option("--node-budget", o.node_budget, "max materialized vertices per environment");
    sc->add_option("--threads", o.threads, "worker threads; 0 picks a default")
        ->envname("ROTORWALK_THREADS");
    sc->add_option("-o,--out", o.out, "output directory");
    sc->add_flag("--strict", o.strict, "exit 3 when runs were truncated or ran out of budget");
}

rotor::ExperimentConfig load(const Overrides& o) {
    rotor::ExperimentConfig cfg = rotor::load_config_file(o.config_path);
    if (o.seed) cfg.seed = *o.seed;
    if (o.steps) cfg.steps = *o.steps;
    if (o.replicas) cfg.replicas = static_cast<std::uint32_t>(*o.replicas);
    if (o.returns) cfg.k_returns = *o.returns;
    if (o.stride) cfg.sample_stride = *o.stride;
    if (o.step_cap) cfg.step_cap = *o.step_cap;
    if (o.node_budget) cfg.node_budget = *o.node_budget;
    if (o.threads) cfg.threads = *o.threads;
    if (o.out) cfg.out_dir = *o.out;
    if (o.strict) cfg.strict = true;
    if (o.family) cfg.sweep_family = *o.family;
    if (o.contour_k) cfg.contour_k = *o.contour_k;
    if (o.contour_level) cfg.contour_level = *o.contour_level;
    if (o.contour_empirical) cfg.contour_empirical = static_cast<std::uint32_t>(*o.contour_empirical);
    if (o.contour_empirical_k) cfg.contour_empirical_k = *o.contour_empirical_k;
    return cfg;
}

int run_constants(const Overrides& o, bool as_json) {
    const auto cfg = load(o);
    const rotor::ConstantsReport rep = rotor::constants_report(cfg);
    std::fputs(as_json ? rep.json_text.c_str() : rep.text.c_str(), stdout);
    return 0;
}

int run_simulate(const Overrides& o) {
    const auto cfg = load(o);
    const rotor::SimulateResult res = rotor::simulate(cfg);
    std::printf("range rate: %.6f +- %.6f (stderr, %zu replicas)\n", res.mean_range_rate,
                res.stderr_range_rate, res.replicas.size());
    std::printf("speed:      %.6f +- %.6f\n", res.mean_speed, res.stderr_speed);
    std::printf("identities: %" PRIu64 " returns checked, %" PRIu64 " failures\n",
                res.returns_checked, res.identity_failures);
    std::printf("summary: %s\n", res.summary_path.c_str());
    if (res.identity_failures > 0) {
        std::fprintf(stderr, "error: exact identities violated; see %s\n", res.summary_path.c_str());
        return 1;
    }
    if (res.any_failed || res.any_truncated) {
        std::fprintf(stderr, "warning: %s\n",
                     res.any_failed ? "some replicas exhausted the node budget"
                                    : "some replicas hit the step cap");
        if (cfg.strict) return 3;
    }
    return 0;
}

int run_table(int dmin, int dmax) {
    std::fputs(rotor::table_text(dmin, dmax).c_str(), stdout);
    return 0;
}

int run_sweep(const Overrides& o) {
    const auto cfg = load(o);
    const rotor::SweepResult res = rotor::gw_sweep(cfg);
    std::printf("wrote %zu sweep points to %s\n", res.points.size(), res.csv_path.c_str());
    bool failed = false;
    for (const rotor::SweepPoint& pt : res.points) {
        if (!pt.note.empty() && pt.note != "regular_endpoint") {
            std::printf("  p=%.4g: %s\n", pt.p, pt.note.c_str());
            if (pt.note.find("failed") != std::string::npos) failed = true;
        }
    }
    return failed && cfg.strict ? 3 : 0;
}

int run_contour(const Overrides& o) {
    const auto cfg = load(o);
    const rotor::ContourResult res = rotor::contour_run(cfg);
    for (const std::string& f : res.files) std::printf("wrote %s\n", f.c_str());
    if (res.formal) {
        std::printf("note: transient law; the analytic curves are formal solutions of the "
                    "recursion and may contain inf\n");
    }
    if (res.truncated > 0) {
        std::fprintf(stderr, "warning: %u of %u excursions hit the step cap\n", res.truncated,
                     res.excursions);
        if (cfg.strict) return 3;
    }
    return 0;
}

int run_audit(const Overrides& o) {
    const auto cfg = load(o);
    const rotor::AuditReport rep = rotor::audit(cfg);
    std::fputs(rep.text.c_str(), stdout);
    if (!rep.ok()) return 1;
    return rep.any_truncated && cfg.strict ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rotor walks on regular and Galton-Watson trees: Monte Carlo simulation "
                 "cross-checked against analytic range/speed constants"};
    app.set_version_flag("--version", rotor::kVersion);
    app.require_subcommand(1);

    Overrides o;
    bool constants_json = false;
    int dmin = 2, dmax = 10;

    CLI::App* constants =
        app.add_subcommand("constants", "analytic constants and formula cross-checks");
    add_common(constants, o);
    constants->add_flag("--json", constants_json, "emit the JSON report");

    CLI::App* simulate =
        app.add_subcommand("simulate", "run replicated walks; write trajectory CSVs + summary.json");
    add_common(simulate, o);

    CLI::App* table =
        app.add_subcommand("table", "range constants for uniform rotors on regular trees");
    table->add_option("--dmin", dmin, "smallest forward degree")->check(CLI::Range(2, 10000));
    table->add_option("--dmax", dmax, "largest forward degree")->check(CLI::Range(2, 10000));

    CLI::App* sweep = app.add_subcommand(
        "gw-sweep", "interpolation family between regular trees and half-lines: analytic vs MC");
    add_common(sweep, o);
    sweep->add_option("--family", o.family, "offspring count of the non-degenerate branch");

    CLI::App* contour =
        app.add_subcommand("contour", "expected contour curves of the visited cluster");
    add_common(contour, o);
    contour->add_option("--k", o.contour_k, "number of excursions");
    contour->add_option("--level", o.contour_level, "grid resolution: d^level cells");
    contour->add_option("--empirical", o.contour_empirical,
                        "also measure this many excursion contours");
    contour->add_option("--empirical-k", o.contour_empirical_k,
                        "excursion count for the empirical contour");

    CLI::App* audit = app.add_subcommand("audit", "exact excursion/frontier identity audit");
    add_common(audit, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // 2: usage/config problems
    }

    try {
        if (constants->parsed()) return run_constants(o, constants_json);
        if (simulate->parsed()) return run_simulate(o);
        if (table->parsed()) return run_table(dmin, dmax);
        if (sweep->parsed()) return run_sweep(o);
        if (contour->parsed()) return run_contour(o);
        if (audit->parsed()) return run_audit(o);
    } catch (const rotor::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const rotor::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
