#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rotor/analytics.hpp"
#include "rotor/distributions.hpp"
#include "rotor/tree_engine.hpp"

namespace rotor {

/// Which random environment an experiment runs on.
struct EnvironmentSpec {
    enum class Kind { Regular, GaltonWatson };
    Kind kind = Kind::Regular;
    std::optional<RotorLaw> rotor_law;      // regular trees
    std::optional<OffspringLaw> offspring;  // Galton-Watson trees
    std::optional<RotorMatrix> rotors;      // good-children rows, one per offspring count

    std::string describe() const;
};

Environment make_environment(const EnvironmentSpec& spec, RandomSource src,
                             std::uint64_t node_budget);

/// Analytic constants for whichever environment the spec describes.
Constants spec_constants(const EnvironmentSpec& spec);

/// True when every rotor row of a Galton-Watson spec is uniform (the
/// (mu-1)/mu shortcut for the range constant applies when additionally mu <= 2).
bool spec_has_uniform_rotors(const EnvironmentSpec& spec);

struct ExperimentConfig {
    EnvironmentSpec env;
    WalkKind walk = WalkKind::Rotor;
    bool by_returns = false;  // run to the k-th sink return instead of a fixed step count
    std::uint64_t steps = 1'000'000;
    std::uint64_t k_returns = 8;
    std::uint64_t step_cap = 100'000'000;
    std::uint64_t sample_stride = 0;  // 0: steps/200
    std::uint32_t replicas = 1;
    std::uint64_t seed = 0;
    std::uint64_t node_budget = kDefaultNodeBudget;
    unsigned threads = 0;  // 0: ROTORWALK_THREADS, then hardware concurrency
    bool strict = false;
    std::string out_dir = "out";

    // contour command
    int contour_k = 4;
    int contour_level = 8;
    std::uint32_t contour_empirical = 0;  // excursion count; 0 = analytic curves only
    int contour_empirical_k = 1;

    // gw-sweep command
    int sweep_family = 2;
    std::vector<double> sweep_grid;  // interpolation parameters p; empty: 0.0..0.9 step 0.1
};

/// Parse a JSON config document.  Unknown or ill-typed fields raise
/// ConfigError naming the offending field; syntax errors carry the parser's
/// line/column message.
ExperimentConfig parse_config_text(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

/// FNV-1a fingerprint of the experiment-defining fields (environment, walk,
/// mode, sizes, seed) -- execution details like thread count and output
/// directory do not contribute.
std::uint64_t config_hash(const ExperimentConfig& cfg);

unsigned resolve_threads(unsigned requested);

/// Run fn(0..count-1) on up to `threads` workers.  Results must be written to
/// per-index slots; scheduling order never affects outputs.
void parallel_for(std::uint32_t count, unsigned threads,
                  const std::function<void(std::uint32_t)>& fn);

// --- commands ---

struct ConstantsReport {
    std::string text;
    std::string json_text;
};
ConstantsReport constants_report(const ExperimentConfig& cfg);

struct ReplicaSummary {
    std::uint32_t index = 0;
    std::uint64_t n = 0;
    std::uint64_t range = 0;
    std::int64_t depth = 0;
    double range_rate = 0.0;
    double speed = 0.0;
    std::uint64_t returns = 0;
    bool identities_ok = true;
    bool truncated = false;
    std::string error;  // nonempty when the replica aborted (e.g. node budget)
};

struct SimulateResult {
    std::vector<ReplicaSummary> replicas;
    double mean_range_rate = 0.0;
    double stderr_range_rate = 0.0;
    double mean_speed = 0.0;
    double stderr_speed = 0.0;
    std::uint64_t returns_checked = 0;
    std::uint64_t identity_failures = 0;
    bool any_truncated = false;
    bool any_failed = false;
    std::string summary_path;
};

/// Run the configured walk over `replicas` independent environments (streams
/// seed/0..seed/replicas-1), write one trajectory CSV per replica plus
/// summary.json into out_dir, and return the aggregates.
SimulateResult simulate(const ExperimentConfig& cfg);

struct TableRow {
    int d;
    double alpha;      // rotor walk range constant, uniform rotors
    double srw_alpha;  // simple random walk range constant (d-1)/d
};
std::vector<TableRow> table_rows(int d_min = 2, int d_max = 10);
std::string table_text(int d_min = 2, int d_max = 10);

struct SweepPoint {
    int family = 0;
    double p = 0.0;
    double mu = 0.0;
    double m = 0.0;
    std::string regime;
    double alpha_analytic = 0.0;  // NaN when the point is degenerate
    double rotor_mc = 0.0;
    double rotor_se = 0.0;
    double srw_mc = 0.0;
    double srw_se = 0.0;
    std::string note;
};
struct SweepResult {
    std::vector<SweepPoint> points;
    std::string csv_path;
};

/// Interpolation family `sweep_family` = i: offspring 1 with probability p,
/// i with probability 1-p, uniform rotors.  p = 0 is the regular tree T_i,
/// flagged as the endpoint row.  Degenerate grid points are flagged and
/// skipped, never fatal.
SweepResult gw_sweep(const ExperimentConfig& cfg);

struct ContourResult {
    bool formal = false;  // analytic curves evaluated under a transient law
    std::uint32_t excursions = 0;
    std::uint32_t truncated = 0;
    std::vector<std::string> files;
};

/// Analytic contour curves g_1..g_k on the level-L grid (plus normalized
/// copies), and optionally the empirical mean contour of sink-return
/// excursions with per-cell standard errors.  Regular environments only.
ContourResult contour_run(const ExperimentConfig& cfg);

struct AuditReport {
    std::uint32_t replicas = 0;
    std::uint64_t returns_checked = 0;
    std::uint64_t tau_failures = 0;
    std::uint64_t leaf_failures = 0;
    std::uint64_t recount_failures = 0;
    bool any_truncated = false;
    std::string text;

    bool ok() const { return tau_failures + leaf_failures + recount_failures == 0; }
};

/// Exact-identity audit: runs rotor walks return by return and checks, with
/// zero tolerance, the excursion-length identity tau_k - tau_{k-1} = 2|R_k|,
/// the frontier identities, and an independent frontier recount.
AuditReport audit(const ExperimentConfig& cfg);

}  // namespace rotor
