#include "rotor/rng.hpp"

#include <cstddef>

#include "rotor/errors.hpp"

namespace rotor {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace

Xoshiro256::Xoshiro256(RandomSource src) {
    // Mix seed and stream before expanding so that {s,0} and {s,1} share no prefix.
    std::uint64_t x = src.seed ^ (src.stream * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL);
    for (auto& s : state_) s = splitmix64(x);
    // splitmix64 never yields four zero words in a row, but guard anyway:
    // the all-zero state is the one fixed point of xoshiro.
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
}

std::uint64_t Xoshiro256::next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Xoshiro256::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint32_t Xoshiro256::next_below(std::uint32_t n) {
    // Lemire's nearly-divisionless bounded sampling on the high 32 bits.
    std::uint32_t x = static_cast<std::uint32_t>(next_u64() >> 32);
    std::uint64_t m = static_cast<std::uint64_t>(x) * n;
    std::uint32_t l = static_cast<std::uint32_t>(m);
    if (l < n) {
        std::uint32_t t = -n % n;
        while (l < t) {
            x = static_cast<std::uint32_t>(next_u64() >> 32);
            m = static_cast<std::uint64_t>(x) * n;
            l = static_cast<std::uint32_t>(m);
        }
    }
    return static_cast<std::uint32_t>(m >> 32);
}

AliasTable::AliasTable(std::span<const double> weights) {
    const std::size_t n = weights.size();
    if (n == 0) throw InvalidLaw("alias table: empty weight vector");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw InvalidLaw("alias table: negative or NaN weight");
        total += w;
    }
    if (!(total > 0.0)) throw InvalidLaw("alias table: weights sum to zero");

    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    std::vector<double> scaled(n);
    for (std::size_t i = 0; i < n; ++i) scaled[i] = weights[i] * static_cast<double>(n) / total;

    std::vector<std::uint32_t> small, large;
    small.reserve(n);
    large.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
    }
    while (!small.empty() && !large.empty()) {
        const std::uint32_t s = small.back();
        small.pop_back();
        const std::uint32_t g = large.back();
        prob_[s] = scaled[s];
        alias_[s] = g;
        scaled[g] = (scaled[g] + scaled[s]) - 1.0;
        if (scaled[g] < 1.0) {
            large.pop_back();
            small.push_back(g);
        }
    }
    // Residual entries are 1 up to rounding.
    for (std::uint32_t i : large) prob_[i] = 1.0;
    for (std::uint32_t i : small) prob_[i] = 1.0;
}

std::uint32_t AliasTable::sample(Xoshiro256& rng) const {
    const std::uint32_t i = rng.next_below(static_cast<std::uint32_t>(prob_.size()));
    return rng.next_double() < prob_[i] ? i : alias_[i];
}

std::uint64_t fnv1a(std::span<const char> bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace rotor
