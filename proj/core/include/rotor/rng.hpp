#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace rotor {

/// Identifies one independent random stream.  Replica i of an experiment with
/// base seed s runs on {s, i}; equal sources reproduce bit-identical runs.
struct RandomSource {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

/// xoshiro256** seeded through a splitmix64 chain.  A fixed, owned generator
/// keeps every simulation reproducible across platforms and library versions,
/// which the standard <random> distributions do not guarantee.
class Xoshiro256 {
public:
    explicit Xoshiro256(RandomSource src);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double();

    /// Unbiased uniform integer in [0, n), n >= 1 (Lemire's method).
    std::uint32_t next_below(std::uint32_t n);

private:
    std::array<std::uint64_t, 4> state_;
};

/// Walker's alias table (Vose construction): O(n) setup, O(1) sampling from a
/// fixed finite distribution.  Weights need not be normalized.
class AliasTable {
public:
    explicit AliasTable(std::span<const double> weights);

    std::uint32_t sample(Xoshiro256& rng) const;
    std::size_t size() const { return prob_.size(); }

private:
    std::vector<double> prob_;
    std::vector<std::uint32_t> alias_;
};

/// FNV-1a over a byte string; used to fingerprint configurations in reports.
std::uint64_t fnv1a(std::span<const char> bytes);

}  // namespace rotor
