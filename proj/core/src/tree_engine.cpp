#include "rotor/tree_engine.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

namespace rotor {

NodeStore::NodeStore(std::uint64_t node_budget) : budget_(node_budget) {}

std::uint32_t NodeStore::allocate(std::uint32_t parent, std::uint32_t depth,
                                  std::uint16_t child_count, std::uint16_t rotor,
                                  std::uint64_t first_visit) {
    if (nodes_.size() >= budget_ || nodes_.size() >= kNoNode - 1) {
        throw MemoryBudgetExceeded("node budget of " + std::to_string(budget_) +
                                   " vertices exhausted");
    }
    if (rotor > child_count) throw InvalidLaw("node rotor exceeds child count");
    const auto idx = static_cast<std::uint32_t>(nodes_.size());
    Node nd;
    nd.parent = parent;
    nd.child_base = static_cast<std::uint32_t>(slots_.size());
    nd.first_visit = first_visit;
    nd.depth = depth;
    nd.child_count = child_count;
    nd.rotor = rotor;
    nd.init_rotor = rotor;
    nodes_.push_back(nd);
    slots_.insert(slots_.end(), child_count, kNoNode);
    return idx;
}

std::uint32_t NodeStore::create_root(std::uint16_t child_count, std::uint16_t rotor) {
    if (!nodes_.empty()) throw Error("node store already has a root");
    return allocate(kNoNode, 0, child_count, rotor, kNeverVisited);
}

std::uint32_t NodeStore::create_child(std::uint32_t parent, std::uint16_t slot,
                                      std::uint16_t child_count, std::uint16_t rotor,
                                      std::uint64_t first_visit) {
    if (parent >= nodes_.size()) throw Error("create_child: no such parent");
    if (slot >= nodes_[parent].child_count) throw Error("create_child: slot out of range");
    if (slots_[nodes_[parent].child_base + slot] != kNoNode) {
        throw Error("create_child: slot already materialized");
    }
    const std::uint32_t depth = nodes_[parent].depth + 1;
    const std::uint32_t idx = allocate(parent, depth, child_count, rotor, first_visit);
    // allocate() may have grown nodes_; re-index the parent afterwards.
    slots_[nodes_[parent].child_base + slot] = idx;
    return idx;
}

Environment::Environment(RandomSource src, std::uint64_t node_budget)
    : store_(node_budget), rng_(src), src_(src) {}

Environment Environment::regular(const RotorLaw& law, RandomSource src,
                                 std::uint64_t node_budget) {
    Environment env(src, node_budget);
    env.regular_d_ = law.degree();
    env.rotor_alias_.emplace(law.probs());

    char buf[64];
    std::snprintf(buf, sizeof buf, "regular(d=%d, rotor=[", law.degree());
    std::string desc = buf;
    for (int j = 0; j <= law.degree(); ++j) {
        std::snprintf(buf, sizeof buf, j ? ",%.12g" : "%.12g", law.prob(j));
        desc += buf;
    }
    desc += "])";
    env.descriptor_ = std::move(desc);

    std::uint16_t cc, rot;
    env.sample_node(cc, rot);
    env.store_.create_root(cc, rot);
    return env;
}

Environment Environment::galton_watson(const OffspringLaw& offspring, const RotorMatrix& rotors,
                                       RandomSource src, std::uint64_t node_budget) {
    if (offspring.has_zero_offspring()) {
        throw DegenerateEnvironment("galton-watson environment: offspring law has mass at 0; "
                                    "trees must be infinite");
    }
    Environment env(src, node_budget);
    std::vector<double> weights;
    for (auto [k, pk] : offspring.support()) {
        env.offspring_values_.push_back(k);
        weights.push_back(pk);
        env.good_count_alias_.emplace(k, AliasTable(rotors.row(k)));
    }
    env.offspring_alias_.emplace(weights);

    char buf[64];
    std::string desc = "gw(offspring={";
    bool first = true;
    for (auto [k, pk] : offspring.support()) {
        std::snprintf(buf, sizeof buf, first ? "%d:%.12g" : ",%d:%.12g", k, pk);
        desc += buf;
        first = false;
    }
    bool uniform_rows = true;
    for (const auto& [k, row] : rotors.rows()) {
        for (double v : row) {
            if (std::abs(v - 1.0 / (k + 1)) > kProbTol) uniform_rows = false;
        }
    }
    desc += uniform_rows ? "}, rotors=uniform)" : "}, rotors=custom)";
    env.descriptor_ = std::move(desc);

    std::uint16_t cc, rot;
    env.sample_node(cc, rot);
    env.store_.create_root(cc, rot);
    return env;
}

void Environment::sample_node(std::uint16_t& child_count, std::uint16_t& rotor) {
    if (regular_d_) {
        child_count = static_cast<std::uint16_t>(*regular_d_);
        rotor = static_cast<std::uint16_t>(rotor_alias_->sample(rng_));
        return;
    }
    const int k = offspring_values_[offspring_alias_->sample(rng_)];
    child_count = static_cast<std::uint16_t>(k);
    // Row k samples the number of good children l; the rotor value is k - l.
    const auto good = static_cast<std::uint16_t>(good_count_alias_.at(k).sample(rng_));
    rotor = static_cast<std::uint16_t>(child_count - good);
}

std::uint32_t Environment::materialize_child(std::uint32_t parent, std::uint16_t slot,
                                             std::uint64_t time) {
    std::uint16_t cc, rot;
    sample_node(cc, rot);
    const std::uint32_t idx = store_.create_child(parent, slot, cc, rot, time);
    ++range_;
    child_sum_ += cc;
    frontier_ += cc;
    --frontier_;  // the new vertex just left the frontier itself
    return idx;
}

void Environment::enter_root(Walker& w) {
    if (!root_visited_) {
        root_visited_ = true;
        store_.mark_visited(0, w.steps);
        const std::uint16_t cc = store_.node_at(0).child_count;
        ++range_;
        child_sum_ += cc;
        frontier_ += cc;  // the root's parent is the sink, never on the frontier
    }
    w.at_sink = false;
    w.node = 0;
    w.depth = 0;
}

void Environment::move_to_parent(Walker& w, std::uint32_t cur) {
    const std::uint32_t p = store_.node_at(cur).parent;
    if (p == kNoNode) {
        w.at_sink = true;
        w.node = kNoNode;
        w.depth = -1;
    } else {
        w.node = p;
        --w.depth;
    }
}

void Environment::step(Walker& w) {
    ++w.steps;
    if (w.at_sink) {
        enter_root(w);  // the sink has a single neighbor
        return;
    }
    const std::uint32_t cur = w.node;
    const std::uint16_t cc = store_.node_at(cur).child_count;
    std::uint16_t r = static_cast<std::uint16_t>(store_.node_at(cur).rotor + 1);
    if (r > cc) r = 0;
    store_.node_at(cur).rotor = r;
    if (r == 0) {
        move_to_parent(w, cur);
        return;
    }
    const auto slot = static_cast<std::uint16_t>(r - 1);
    std::uint32_t c = store_.child(cur, slot);
    if (c == kNoNode) c = materialize_child(cur, slot, w.steps);
    w.node = c;
    ++w.depth;
}

void Environment::srw_step(Walker& w) {
    ++w.steps;
    if (w.at_sink) {
        enter_root(w);
        return;
    }
    const std::uint32_t cur = w.node;
    const std::uint16_t cc = store_.node_at(cur).child_count;
    const std::uint32_t pick = rng_.next_below(static_cast<std::uint32_t>(cc) + 1);
    if (pick == 0) {
        move_to_parent(w, cur);
        return;
    }
    const auto slot = static_cast<std::uint16_t>(pick - 1);
    std::uint32_t c = store_.child(cur, slot);
    if (c == kNoNode) c = materialize_child(cur, slot, w.steps);
    w.node = c;
    ++w.depth;
}

namespace {

TrajectoryStats run_impl(Environment& env, Walker& w, WalkKind kind, std::uint64_t max_steps,
                         std::uint64_t sample_stride, std::uint64_t stop_after_returns) {
    TrajectoryStats st;
    st.source = env.source();
    st.environment = env.describe();

    std::uint64_t taken = 0;
    while (taken < max_steps) {
        if (kind == WalkKind::Rotor) {
            env.step(w);
        } else {
            env.srw_step(w);
        }
        ++taken;
        if (w.at_sink) {
            st.returns.push_back({w.steps, env.range(), env.frontier(), env.child_sum()});
            if (stop_after_returns && st.returns.size() >= stop_after_returns) break;
        }
        if (sample_stride && w.steps % sample_stride == 0) {
            st.samples.push_back({w.steps, env.range(), w.depth});
        }
    }
    if (stop_after_returns && st.returns.size() < stop_after_returns) st.truncated = true;

    if (sample_stride && (st.samples.empty() || st.samples.back().n != w.steps)) {
        st.samples.push_back({w.steps, env.range(), w.depth});
    }
    st.final_n = w.steps;
    st.final_range = env.range();
    st.final_depth = w.depth;
    return st;
}

}  // namespace

TrajectoryStats run_steps(Environment& env, Walker& w, std::uint64_t n_steps,
                          std::uint64_t sample_stride, WalkKind kind) {
    return run_impl(env, w, kind, n_steps, sample_stride, 0);
}

TrajectoryStats run_until_returns(Environment& env, Walker& w, std::uint64_t k_returns,
                                  std::uint64_t step_cap, WalkKind kind) {
    return run_impl(env, w, kind, step_cap, 0, k_returns);
}

std::map<int, std::uint64_t> good_children_census(const Environment& env) {
    const NodeStore& store = env.store();
    if (env.range() < 1000) {
        throw InsufficientSample("good-children census needs at least 1000 visited vertices, have " +
                                 std::to_string(env.range()));
    }
    std::map<int, std::uint64_t> hist;
    for (std::uint32_t i = 0; i < store.size(); ++i) {
        const Node& nd = store.node_at(i);
        if (nd.first_visit == kNeverVisited) continue;
        ++hist[nd.child_count - nd.init_rotor];
    }
    return hist;
}

}  // namespace rotor
