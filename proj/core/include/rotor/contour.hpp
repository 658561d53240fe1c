#pragma once

#include <cstdint>
#include <vector>

#include "rotor/distributions.hpp"
#include "rotor/tree_engine.hpp"

namespace rotor {

/// Cumulative rotor probabilities: p[i] = P[rotor < i], q[i] = P[rotor >= i],
/// both computed by direct summation (p forward, q backward) so that
/// p[i] + q[i] = 1 holds to machine precision.
struct CumulativeLaw {
    explicit CumulativeLaw(const RotorLaw& law);

    int d;
    std::vector<double> p;  // index 0..d
    std::vector<double> q;
};

/// Point of [0,1] in base d: a finite word of leading digits followed by a
/// constant tail digit (0 or d-1) repeating forever.  Digit i (1-based) of
/// the expansion x = sum digits_i d^{-i}.
struct DadicPoint {
    std::vector<std::uint8_t> word;
    std::uint8_t tail = 0;

    int digit(std::size_t i) const {  // 1-based
        return i <= word.size() ? word[i - 1] : tail;
    }
};

/// The level-L cell point: index written as L base-d digits, tail 0.
DadicPoint cell_point(int d, int level, std::uint64_t index);

double point_value(const DadicPoint& x, int d);

/// Values of a function of [0,1] on the d^level cells of level `level`,
/// each cell represented by its left endpoint.
struct ContourGrid {
    int d = 0;
    int level = 0;
    std::vector<double> values;

    std::uint64_t cells() const { return values.size(); }
    double x_left(std::uint64_t cell) const {
        return static_cast<double>(cell) / static_cast<double>(values.size());
    }
};

/// Contour of the visited set held in `store`: for each cell x, the depth of
/// the first prefix of x's digit word that leads outside the visited set.
/// Letter k of the alphabet corresponds to child slot d-1-k, so the
/// first-explored child carries the highest letter.
ContourGrid contour_of_range(const NodeStore& store, int d, int level);

/// P[f_k(x) = m] for m = 1..m_max (index m-1).  k = 1 is the closed product
/// formula; k >= 2 convolves independent shifted copies.  The vector sum is
/// 1 - P[f_k(x) > m_max].
std::vector<double> excursion_depth_law(const CumulativeLaw& law, const DadicPoint& x,
                                        int k, int m_max);

/// g_k(x) = E[f_k(x)], by the self-similar recursion over the digit word with
/// the closed-form constant-tail values
///   g_j(tail 0)   = j / P[rotor = d]     (+inf if that mass vanishes)
///   g_j(tail d-1) = j / P[rotor >= 1]    (+inf if rotor == 0 a.s.)
/// Values are finite for recurrent laws; for transient laws the same formal
/// recursion is evaluated and +inf can appear.
double expected_contour(const CumulativeLaw& law, const DadicPoint& x, int k);

/// g_1..g_k on the full level-L grid (returned in that order), sharing one
/// dynamic program over levels.  Throws GridTooLarge above max_cells cells.
std::vector<ContourGrid> expected_contour_grids(const CumulativeLaw& law, int k, int level,
                                                std::uint64_t max_cells = (1ull << 22));

}  // namespace rotor
