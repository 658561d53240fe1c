#include <doctest.h>

#include <cmath>
#include <vector>

#include "rotor/contour.hpp"

using namespace rotor;

TEST_CASE("cumulative law keeps p[i] + q[i] == 1 exactly") {
    const CumulativeLaw c(RotorLaw(3, {0.1, 0.2, 0.3, 0.4}));
    CHECK(c.p[0] == 0.0);
    CHECK(c.q[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(c.p[1] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(c.q[2] == doctest::Approx(0.3 + 0.4).epsilon(1e-15));
    CHECK(c.q[3] == doctest::Approx(0.4).epsilon(1e-15));
    for (int i = 0; i <= 3; ++i) CHECK(c.p[i] + c.q[i] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("d-adic points: digits, values and validation") {
    const DadicPoint x = cell_point(2, 3, 5);  // 5 = 101 in base 2
    REQUIRE(x.word.size() == 3);
    CHECK(x.word[0] == 1);
    CHECK(x.word[1] == 0);
    CHECK(x.word[2] == 1);
    CHECK(x.tail == 0);
    CHECK(x.digit(1) == 1);
    CHECK(x.digit(4) == 0);  // tail
    CHECK(point_value(x, 2) == doctest::Approx(0.625).epsilon(1e-15));

    const DadicPoint one{{}, 1};  // x = 1 on the binary alphabet
    CHECK(point_value(one, 2) == 1.0);
    const DadicPoint third{{}, 1};  // tail 1 on d=3 is invalid (must be 0 or d-1)
    const CumulativeLaw c3(RotorLaw::uniform(3));
    CHECK_THROWS_AS(expected_contour(c3, third, 1), InvalidLaw);
    const DadicPoint bad{{7}, 0};
    CHECK_THROWS_AS(expected_contour(c3, bad, 1), InvalidLaw);
}

TEST_CASE("contour of a hand-built visited set") {
    NodeStore store(16);
    const std::uint32_t root = store.create_root(2, 0);
    store.mark_visited(root, 0);

    SUBCASE("root only: every cell exits at depth 1") {
        const ContourGrid g = contour_of_range(store, 2, 2);
        REQUIRE(g.cells() == 4);
        for (double v : g.values) CHECK(v == 1.0);
    }

    SUBCASE("one visited child on slot 1, reached by letter 0") {
        store.create_child(root, 1, 2, 0, /*first_visit=*/1);
        const ContourGrid g = contour_of_range(store, 2, 1);
        REQUIRE(g.cells() == 2);
        CHECK(g.values[0] == 2.0);  // digit 0 -> slot d-1-0 = 1, visited, then exit
        CHECK(g.values[1] == 1.0);  // digit 1 -> slot 0, missing
        CHECK(g.x_left(1) == 0.5);
    }

    SUBCASE("materialized but unvisited children do not count") {
        store.create_child(root, 1, 2, 0, kNeverVisited);
        const ContourGrid g = contour_of_range(store, 2, 1);
        CHECK(g.values[0] == 1.0);
        CHECK(g.values[1] == 1.0);
    }
}

TEST_CASE("single-excursion depth law at x = 0 is geometric") {
    // uniform rotors on d=2: p_2 = 2/3, q_2 = 1/3, so
    // P[f_1(0) = m] = (2/3)^(m-1) / 3 and E f_1(0) = 3.
    const CumulativeLaw law(RotorLaw::uniform(2));
    const DadicPoint zero{{}, 0};
    const int m_max = 200;
    const std::vector<double> p1 = excursion_depth_law(law, zero, 1, m_max);
    REQUIRE(static_cast<int>(p1.size()) == m_max);
    double expect = 1.0 / 3.0;
    for (int m = 1; m <= 40; ++m) {
        CHECK(p1[static_cast<std::size_t>(m - 1)] == doctest::Approx(expect).epsilon(1e-12));
        expect *= 2.0 / 3.0;
    }
    double total = 0.0, mean = 0.0;
    for (int m = 1; m <= m_max; ++m) {
        total += p1[static_cast<std::size_t>(m - 1)];
        mean += m * p1[static_cast<std::size_t>(m - 1)];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mean == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(expected_contour(law, zero, 1) == doctest::Approx(3.0).epsilon(1e-14));

    // two excursions at x = 0: negative binomial, mean 6
    const std::vector<double> p2 = excursion_depth_law(law, zero, 2, m_max);
    CHECK(p2[0] == 0.0);  // f_2 >= 2
    for (int m = 2; m <= 40; ++m) {
        const double nb = (m - 1) * std::pow(2.0 / 3.0, m - 2) / 9.0;
        CHECK(p2[static_cast<std::size_t>(m - 1)] == doctest::Approx(nb).epsilon(1e-12));
    }
    CHECK(expected_contour(law, zero, 2) == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("depth law and expected contour agree on word points") {
    const CumulativeLaw law(RotorLaw(2, {0.3, 0.4, 0.3}));
    const DadicPoint x{{1, 0, 1, 1, 0, 1}, 0};
    const int m_max = 400;
    for (int k = 1; k <= 3; ++k) {
        const std::vector<double> pk = excursion_depth_law(law, x, k, m_max);
        double total = 0.0, mean = 0.0;
        for (int m = 1; m <= m_max; ++m) {
            total += pk[static_cast<std::size_t>(m - 1)];
            mean += m * pk[static_cast<std::size_t>(m - 1)];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(mean == doctest::Approx(expected_contour(law, x, k)).epsilon(1e-9));
    }
}

TEST_CASE("grid dynamic program: residual identity and pointwise agreement") {
    const CumulativeLaw law(RotorLaw(2, {0.3, 0.4, 0.3}));
    const int k = 3;
    const std::vector<ContourGrid> g4 = expected_contour_grids(law, k, 4);
    const std::vector<ContourGrid> g3 = expected_contour_grids(law, k, 3);
    REQUIRE(g4.size() == 3);
    REQUIRE(g4[0].cells() == 16);

    // one-level refinement: g_j(i.x) = 1 + q_{d-i} g_{j-1}(x) + p_{d-i} g_j(x)
    for (std::uint64_t cell = 0; cell < 16; ++cell) {
        const int i = static_cast<int>(cell / 8);
        const std::uint64_t rest = cell % 8;
        const std::size_t ci = static_cast<std::size_t>(2 - i);
        for (int j = 1; j <= k; ++j) {
            const double prev = j == 1 ? 0.0 : g3[static_cast<std::size_t>(j - 2)].values[rest];
            const double want =
                1.0 + law.q[ci] * prev + law.p[ci] * g3[static_cast<std::size_t>(j - 1)].values[rest];
            CHECK(g4[static_cast<std::size_t>(j - 1)].values[cell] ==
                  doctest::Approx(want).epsilon(1e-12));
        }
    }

    // grid cells match the standalone point evaluator
    for (std::uint64_t cell : {0ull, 3ull, 7ull, 12ull, 15ull}) {
        const DadicPoint x = cell_point(2, 4, cell);
        for (int j = 1; j <= k; ++j) {
            CHECK(g4[static_cast<std::size_t>(j - 1)].values[cell] ==
                  doctest::Approx(expected_contour(law, x, j)).epsilon(1e-12));
        }
    }
}

TEST_CASE("closed-form endpoints of the expected contour") {
    const CumulativeLaw law(RotorLaw::uniform(2));
    // x = 1 (tail digit d-1): g_1 = 1 / P[rotor >= 1] = 1 / (2/3)
    CHECK(expected_contour(law, DadicPoint{{}, 1}, 1) == doctest::Approx(1.5).epsilon(1e-14));
    // g_k(0) = k g_1(0), exactly in this arithmetic
    const double g1 = expected_contour(law, DadicPoint{{}, 0}, 1);
    for (int k = 2; k <= 4; ++k) {
        CHECK(expected_contour(law, DadicPoint{{}, 0}, k) == k * g1);
    }
}

TEST_CASE("transient laws evaluate formally, with +inf and no NaN") {
    // P[rotor = d] = 0 makes g_1(0) infinite.
    const CumulativeLaw law(RotorLaw(2, {0.5, 0.5, 0.0}));
    CHECK(std::isinf(expected_contour(law, DadicPoint{{}, 0}, 1)));
    const std::vector<ContourGrid> grids = expected_contour_grids(law, 2, 3);
    for (const ContourGrid& g : grids) {
        for (double v : g.values) CHECK_FALSE(std::isnan(v));
    }
    CHECK(std::isinf(grids[0].values[0]));
}

TEST_CASE("grid size guard") {
    const CumulativeLaw law(RotorLaw::uniform(2));
    CHECK_THROWS_AS(expected_contour_grids(law, 1, 20, 1024), GridTooLarge);
    CHECK_NOTHROW(expected_contour_grids(law, 1, 10, 1024));
}
