#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rotor/distributions.hpp"
#include "rotor/errors.hpp"
#include "rotor/rng.hpp"

namespace rotor {

inline constexpr std::uint32_t kNoNode = 0xFFFFFFFFu;
inline constexpr std::uint64_t kNeverVisited = 0xFFFFFFFFFFFFFFFFull;

/// Default cap on materialized nodes per environment (~2 GiB of node storage).
inline constexpr std::uint64_t kDefaultNodeBudget = 64'000'000;

/// One materialized tree vertex.  `rotor` is the live value advanced by the
/// walk; `init_rotor` keeps the sampled value for environment statistics.
struct Node {
    std::uint32_t parent = kNoNode;
    std::uint32_t child_base = 0;
    std::uint64_t first_visit = kNeverVisited;
    std::uint32_t depth = 0;
    std::uint16_t child_count = 0;
    std::uint16_t rotor = 0;
    std::uint16_t init_rotor = 0;
};

/// Growable arena of nodes plus a flat child-slot pool.  Children hold
/// kNoNode until materialized.  Indices stay valid across growth; references
/// into the arena do not survive create_* calls.
class NodeStore {
public:
    explicit NodeStore(std::uint64_t node_budget = kDefaultNodeBudget);

    std::uint32_t create_root(std::uint16_t child_count, std::uint16_t rotor);
    std::uint32_t create_child(std::uint32_t parent, std::uint16_t slot,
                               std::uint16_t child_count, std::uint16_t rotor,
                               std::uint64_t first_visit);
    void mark_visited(std::uint32_t idx, std::uint64_t time) {
        nodes_[idx].first_visit = time;
    }

    std::uint32_t child(std::uint32_t idx, std::uint16_t slot) const {
        return slots_[nodes_[idx].child_base + slot];
    }
    Node& node_at(std::uint32_t idx) { return nodes_[idx]; }
    const Node& node_at(std::uint32_t idx) const { return nodes_[idx]; }
    bool visited(std::uint32_t idx) const {
        return nodes_[idx].first_visit != kNeverVisited;
    }
    std::size_t size() const { return nodes_.size(); }
    std::uint64_t budget() const { return budget_; }

private:
    std::uint32_t allocate(std::uint32_t parent, std::uint32_t depth,
                           std::uint16_t child_count, std::uint16_t rotor,
                           std::uint64_t first_visit);

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> slots_;
    std::uint64_t budget_;
};

/// Walk state.  Walks start at the sink (the extra vertex below the root), so
/// the first step always enters the root and excursion identities hold from
/// the first return on.
struct Walker {
    bool at_sink = true;
    std::uint32_t node = kNoNode;
    std::int64_t depth = -1;  // -1 at the sink, 0 at the root
    std::uint64_t steps = 0;
};

enum class WalkKind { Rotor, Srw };

/// A random rotor environment on a regular or Galton-Watson tree, generated
/// lazily: a vertex samples its offspring count and rotor the first time the
/// walk enters it.  The same RandomSource always regenerates the same tree
/// and the same trajectory, bit for bit.
class Environment {
public:
    static Environment regular(const RotorLaw& law, RandomSource src,
                               std::uint64_t node_budget = kDefaultNodeBudget);
    static Environment galton_watson(const OffspringLaw& offspring, const RotorMatrix& rotors,
                                     RandomSource src,
                                     std::uint64_t node_budget = kDefaultNodeBudget);

    /// One rotor-walk step: bump the current vertex's rotor, then move where
    /// it points (0 = parent, j >= 1 = j-th child).
    void step(Walker& w);

    /// One simple-random-walk step on the same (lazily materialized) tree:
    /// uniform over the child_count+1 neighbors.  Rotors are left untouched.
    void srw_step(Walker& w);

    std::uint64_t range() const { return range_; }          // distinct visited vertices (sink excluded)
    std::uint64_t frontier() const { return frontier_; }    // unvisited children of visited vertices
    std::uint64_t child_sum() const { return child_sum_; }  // total offspring of visited vertices

    const NodeStore& store() const { return store_; }
    NodeStore& store() { return store_; }
    std::optional<int> forward_degree() const { return regular_d_; }
    RandomSource source() const { return src_; }
    const std::string& describe() const { return descriptor_; }

private:
    Environment(RandomSource src, std::uint64_t node_budget);

    void enter_root(Walker& w);
    void move_to_parent(Walker& w, std::uint32_t cur);
    std::uint32_t materialize_child(std::uint32_t parent, std::uint16_t slot, std::uint64_t time);
    void sample_node(std::uint16_t& child_count, std::uint16_t& rotor);

    NodeStore store_;
    Xoshiro256 rng_;
    RandomSource src_;
    std::string descriptor_;

    // regular environments
    std::optional<int> regular_d_;
    std::optional<AliasTable> rotor_alias_;

    // Galton-Watson environments
    std::vector<int> offspring_values_;
    std::optional<AliasTable> offspring_alias_;
    std::map<int, AliasTable> good_count_alias_;  // row k samples the number of good children

    bool root_visited_ = false;
    std::uint64_t range_ = 0;
    std::uint64_t frontier_ = 0;
    std::uint64_t child_sum_ = 0;
};

struct Sample {
    std::uint64_t n;
    std::uint64_t range;
    std::int64_t depth;
};

/// Snapshot taken every time the walk steps back into the sink.
struct ReturnEvent {
    std::uint64_t tau;        // step count at the return
    std::uint64_t range;      // |R_tau|
    std::uint64_t frontier;   // leaves of the visited cluster, |partial_o R_tau|
    std::uint64_t child_sum;  // sum of offspring counts over R_tau
};

struct TrajectoryStats {
    std::vector<Sample> samples;
    std::vector<ReturnEvent> returns;
    std::uint64_t final_n = 0;
    std::uint64_t final_range = 0;
    std::int64_t final_depth = 0;
    bool truncated = false;  // run_until_returns hit its step cap first
    RandomSource source;
    std::string environment;
};

/// Run exactly n_steps steps, recording (n, |R_n|, |X_n|) every sample_stride
/// steps (0 = finals only) plus at the end, and every sink return on the way.
TrajectoryStats run_steps(Environment& env, Walker& w, std::uint64_t n_steps,
                          std::uint64_t sample_stride, WalkKind kind = WalkKind::Rotor);

/// Run until the k-th sink return, or until step_cap steps (truncated = true).
TrajectoryStats run_until_returns(Environment& env, Walker& w, std::uint64_t k_returns,
                                  std::uint64_t step_cap, WalkKind kind = WalkKind::Rotor);

/// Histogram of good-children counts (child_count - init_rotor) over all
/// visited vertices.  Throws InsufficientSample below 1000 vertices.
std::map<int, std::uint64_t> good_children_census(const Environment& env);

}  // namespace rotor
