#include "rotor/contour.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace rotor {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// c * g with the convention 0 * inf = 0.
double guarded(double c, double g) {
    if (c == 0.0) return 0.0;
    return c * g;
}

double tail_value(const CumulativeLaw& law, int tail, int j) {
    if (j == 0) return 0.0;
    // q[d] = P[rotor = d], q[1] = P[rotor >= 1].
    const double mass = tail == 0 ? law.q[static_cast<std::size_t>(law.d)] : law.q[1];
    if (mass <= 0.0) return kInf;
    return static_cast<double>(j) / mass;
}

std::uint64_t checked_cells(int d, int level, std::uint64_t max_cells) {
    if (d < 2 || level < 0) throw GridTooLarge("contour grid needs d >= 2 and level >= 0");
    std::uint64_t cells = 1;
    for (int i = 0; i < level; ++i) {
        if (cells > max_cells / static_cast<std::uint64_t>(d)) {
            throw GridTooLarge("contour grid with d=" + std::to_string(d) + ", level=" +
                               std::to_string(level) + " exceeds " + std::to_string(max_cells) +
                               " cells");
        }
        cells *= static_cast<std::uint64_t>(d);
    }
    return cells;
}

void check_point(const DadicPoint& x, int d) {
    for (std::uint8_t dig : x.word) {
        if (dig >= d) throw InvalidLaw("dadic point: digit out of alphabet");
    }
    if (x.tail != 0 && x.tail != d - 1) {
        throw InvalidLaw("dadic point: tail digit must be 0 or d-1");
    }
}

// P[f_1(shift_s x) = m] for m = 1..m_max: (prod_{i<m} p_{d-x_i}) q_{d-x_m},
// digits read starting after offset s.
std::vector<double> first_law(const CumulativeLaw& law, const DadicPoint& x, std::size_t s,
                              int m_max) {
    std::vector<double> out(static_cast<std::size_t>(m_max));
    double prod = 1.0;
    for (int m = 1; m <= m_max; ++m) {
        const int dig = x.digit(s + static_cast<std::size_t>(m));
        const std::size_t idx = static_cast<std::size_t>(law.d - dig);
        out[static_cast<std::size_t>(m - 1)] = prod * law.q[idx];
        prod *= law.p[idx];
    }
    return out;
}

}  // namespace

CumulativeLaw::CumulativeLaw(const RotorLaw& law) : d(law.degree()) {
    const std::size_t n = static_cast<std::size_t>(d) + 1;
    p.assign(n, 0.0);
    q.assign(n, 0.0);
    for (std::size_t i = 1; i < n; ++i) p[i] = p[i - 1] + law.prob(static_cast<int>(i) - 1);
    for (std::size_t i = n; i-- > 0;) {
        q[i] = law.prob(static_cast<int>(i));
        if (i + 1 < n) q[i] += q[i + 1];
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(p[i] + q[i] - 1.0) > 1e-12) {
            throw InvalidLaw("cumulative law: p[i] + q[i] drifted from 1");
        }
    }
}

DadicPoint cell_point(int d, int level, std::uint64_t index) {
    DadicPoint x;
    x.word.resize(static_cast<std::size_t>(level));
    for (int i = level; i-- > 0;) {
        x.word[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(index % d);
        index /= static_cast<std::uint64_t>(d);
    }
    x.tail = 0;
    return x;
}

double point_value(const DadicPoint& x, int d) {
    // Horner from the innermost digit; the tail contributes tail/(d-1) * d^-|word|.
    double v = static_cast<double>(x.tail) / static_cast<double>(d - 1);
    for (std::size_t i = x.word.size(); i-- > 0;) {
        v = (v + x.word[i]) / static_cast<double>(d);
    }
    return v;
}

ContourGrid contour_of_range(const NodeStore& store, int d, int level) {
    const std::uint64_t cells = checked_cells(d, level, 1ull << 22);
    ContourGrid grid;
    grid.d = d;
    grid.level = level;
    grid.values.assign(cells, 0.0);

    std::vector<std::uint64_t> pow(static_cast<std::size_t>(level) + 1, 1);
    for (int i = 1; i <= level; ++i) pow[static_cast<std::size_t>(i)] = pow[static_cast<std::size_t>(i - 1)] * static_cast<std::uint64_t>(d);

    for (std::uint64_t c = 0; c < cells; ++c) {
        std::uint32_t node = 0;  // root; the range of a walk always contains it
        std::uint64_t m = 1;
        for (;; ++m) {
            const int dig = m <= static_cast<std::uint64_t>(level)
                                ? static_cast<int>((c / pow[static_cast<std::size_t>(level - static_cast<int>(m))]) % static_cast<std::uint64_t>(d))
                                : 0;
            const int slot = d - 1 - dig;
            if (slot >= store.node_at(node).child_count) break;
            const std::uint32_t child = store.child(node, static_cast<std::uint16_t>(slot));
            if (child == kNoNode || !store.visited(child)) break;
            node = child;
        }
        grid.values[c] = static_cast<double>(m);
    }
    return grid;
}

std::vector<double> excursion_depth_law(const CumulativeLaw& law, const DadicPoint& x,
                                        int k, int m_max) {
    check_point(x, law.d);
    if (k < 1 || m_max < 1) throw InvalidLaw("excursion depth law: need k >= 1, m_max >= 1");

    const std::size_t W = x.word.size();
    // Suffix classes 0..W; every shift at or past the word is the pure tail.
    const auto clamp = [W](std::size_t s) { return s < W ? s : W; };

    std::vector<std::vector<double>> one(W + 1);
    for (std::size_t s = 0; s <= W; ++s) one[s] = first_law(law, x, s, m_max);
    if (k == 1) return one[0];

    // memo[s][j] = law of f_{j+2} started at class s (j = 0 => k = 2).
    std::vector<std::vector<std::vector<double>>> memo(
        W + 1, std::vector<std::vector<double>>(static_cast<std::size_t>(k - 1)));

    const auto solve = [&](auto&& self, std::size_t s, int kk) -> const std::vector<double>& {
        if (kk == 1) return one[s];
        auto& slot = memo[s][static_cast<std::size_t>(kk - 2)];
        if (!slot.empty()) return slot;
        std::vector<double> out(static_cast<std::size_t>(m_max), 0.0);
        const std::vector<double>& a = one[s];
        for (int l = 1; l < m_max; ++l) {
            const double pa = a[static_cast<std::size_t>(l - 1)];
            if (pa == 0.0) continue;
            const std::vector<double>& b = self(self, clamp(s + static_cast<std::size_t>(l)), kk - 1);
            for (int m = l + 1; m <= m_max; ++m) {
                out[static_cast<std::size_t>(m - 1)] += pa * b[static_cast<std::size_t>(m - l - 1)];
            }
        }
        slot = std::move(out);
        return slot;
    };
    return solve(solve, 0, k);
}

double expected_contour(const CumulativeLaw& law, const DadicPoint& x, int k) {
    check_point(x, law.d);
    if (k < 0) throw InvalidLaw("expected contour: k must be nonnegative");

    const std::size_t W = x.word.size();
    std::vector<std::vector<double>> G(W + 1, std::vector<double>(static_cast<std::size_t>(k) + 1, 0.0));
    for (int j = 0; j <= k; ++j) {
        G[W][static_cast<std::size_t>(j)] = tail_value(law, x.tail, j);
    }
    for (std::size_t s = W; s-- > 0;) {
        const int dig = x.word[s];
        const std::size_t idx = static_cast<std::size_t>(law.d - dig);
        const double pp = law.p[idx];
        const double qq = law.q[idx];
        for (int j = 1; j <= k; ++j) {
            const double down = guarded(qq, G[s + 1][static_cast<std::size_t>(j - 1)]);
            const double stay = guarded(pp, G[s + 1][static_cast<std::size_t>(j)]);
            G[s][static_cast<std::size_t>(j)] = std::isinf(down) || std::isinf(stay)
                                                    ? kInf
                                                    : 1.0 + down + stay;
        }
    }
    return G[0][static_cast<std::size_t>(k)];
}

std::vector<ContourGrid> expected_contour_grids(const CumulativeLaw& law, int k, int level,
                                                std::uint64_t max_cells) {
    if (k < 1) throw InvalidLaw("expected contour grids: need k >= 1");
    const std::uint64_t cells = checked_cells(law.d, level, max_cells);
    const std::size_t stride = static_cast<std::size_t>(k) + 1;

    // cur holds (g_0..g_k) per suffix cell, starting from the pure tail 0.
    std::vector<double> cur(stride);
    for (int j = 0; j <= k; ++j) cur[static_cast<std::size_t>(j)] = tail_value(law, 0, j);

    std::uint64_t n = 1;
    std::vector<double> next;
    for (int lev = 1; lev <= level; ++lev) {
        const std::uint64_t sub = n;
        n *= static_cast<std::uint64_t>(law.d);
        next.assign(static_cast<std::size_t>(n) * stride, 0.0);
        for (std::uint64_t idx = 0; idx < n; ++idx) {
            const int dig = static_cast<int>(idx / sub);
            const std::uint64_t rest = idx % sub;
            const double* gs = &cur[static_cast<std::size_t>(rest) * stride];
            double* gn = &next[static_cast<std::size_t>(idx) * stride];
            const std::size_t ci = static_cast<std::size_t>(law.d - dig);
            const double pp = law.p[ci];
            const double qq = law.q[ci];
            gn[0] = 0.0;
            for (int j = 1; j <= k; ++j) {
                const double down = guarded(qq, gs[j - 1]);
                const double stay = guarded(pp, gs[j]);
                gn[j] = std::isinf(down) || std::isinf(stay) ? kInf : 1.0 + down + stay;
            }
        }
        cur.swap(next);
    }

    std::vector<ContourGrid> grids(static_cast<std::size_t>(k));
    for (int j = 1; j <= k; ++j) {
        ContourGrid& g = grids[static_cast<std::size_t>(j - 1)];
        g.d = law.d;
        g.level = level;
        g.values.resize(cells);
        for (std::uint64_t c = 0; c < cells; ++c) {
            g.values[c] = cur[static_cast<std::size_t>(c) * stride + static_cast<std::size_t>(j)];
        }
    }
    return grids;
}

}  // namespace rotor
