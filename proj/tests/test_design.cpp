#include <doctest.h>

#include <set>

#include "walkcause/design.hpp"

using namespace walkcause;

namespace {

// Eight-profile conjoint layout (attributes LM, BC, RS, OS, GT).
const std::vector<std::vector<std::uint8_t>> kEightProfileDesign = {
    {1, 1, 1, 1, 1}, {1, 1, 1, 0, 0}, {1, 0, 0, 1, 0}, {1, 0, 0, 0, 1},
    {0, 1, 0, 1, 0}, {0, 1, 0, 0, 1}, {0, 0, 1, 1, 1}, {0, 0, 1, 0, 0},
};

// Row-reduction rank over the rationals (small matrices only).
int matrix_rank(std::vector<std::vector<double>> m) {
    const std::size_t rows = m.size(), cols = m[0].size();
    int rank = 0;
    std::size_t lead = 0;
    for (std::size_t r = 0; r < rows && lead < cols; ++lead) {
        std::size_t pivot = r;
        while (pivot < rows && std::abs(m[pivot][lead]) < 1e-9) ++pivot;
        if (pivot == rows) continue;
        std::swap(m[r], m[pivot]);
        for (std::size_t i = 0; i < rows; ++i) {
            if (i == r) continue;
            const double f = m[i][lead] / m[r][lead];
            for (std::size_t c = lead; c < cols; ++c) m[i][c] -= f * m[r][c];
        }
        ++r;
        ++rank;
    }
    return rank;
}

}  // namespace

TEST_CASE("five attributes reproduce the eight-profile matrix exactly") {
    const DesignMatrix d = generate_design(5);
    REQUIRE(d.runs() == 8);
    REQUIRE(d.attributes() == 5);
    for (std::size_t r = 0; r < 8; ++r) {
        CHECK(d.profiles[r] == kEightProfileDesign[r]);
    }
}

TEST_CASE("orthogonality validation: pass case counts each pair combination twice") {
    const DesignMatrix d = generate_design(5);
    const BalanceCheck check = validate_orthogonality(d);
    CHECK(check.passed);
    CHECK(check.unbalanced_columns.empty());
    CHECK(check.violating_pairs.empty());
    // direct recount: all 10 pairs, all 4 combinations, exactly 2 occurrences
    for (std::size_t c1 = 0; c1 < 5; ++c1) {
        for (std::size_t c2 = c1 + 1; c2 < 5; ++c2) {
            int counts[4] = {0, 0, 0, 0};
            for (const auto& row : d.profiles) counts[2 * row[c1] + row[c2]]++;
            for (int k = 0; k < 4; ++k) CHECK(counts[k] == 2);
        }
    }
}

TEST_CASE("orthogonality validation: failure cases") {
    SUBCASE("identical columns") {
        DesignMatrix d;
        for (int i = 0; i < 8; ++i) {
            const std::uint8_t v = i < 4 ? 1 : 0;
            d.profiles.push_back({v, v});
        }
        const BalanceCheck check = validate_orthogonality(d);
        CHECK_FALSE(check.passed);
        REQUIRE(check.violating_pairs.size() == 1);
        CHECK(check.violating_pairs[0] == std::pair<int, int>{1, 2});
    }
    SUBCASE("constant column fails the level-count condition") {
        DesignMatrix d;
        for (int i = 0; i < 8; ++i) {
            d.profiles.push_back({1, static_cast<std::uint8_t>(i % 2)});
        }
        const BalanceCheck check = validate_orthogonality(d);
        CHECK_FALSE(check.passed);
        REQUIRE(check.unbalanced_columns.size() == 1);
        CHECK(check.unbalanced_columns[0] == 1);
    }
}

TEST_CASE("two attributes give the 4-run full factorial") {
    const DesignMatrix d = generate_design(2);
    REQUIRE(d.runs() == 4);
    std::set<std::vector<std::uint8_t>> rows(d.profiles.begin(), d.profiles.end());
    const std::set<std::vector<std::uint8_t>> expected = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    CHECK(rows == expected);
}

TEST_CASE("three attributes: 4-run design, every column has two ones") {
    const DesignMatrix d = generate_design(3);
    REQUIRE(d.runs() == 4);
    REQUIRE(d.attributes() == 3);
    // brute-force balance oracle: count ones per column and per pair-combo
    for (std::size_t c = 0; c < 3; ++c) {
        int ones = 0;
        for (const auto& row : d.profiles) ones += row[c];
        CHECK(ones == 2);
    }
    for (std::size_t c1 = 0; c1 < 3; ++c1) {
        for (std::size_t c2 = c1 + 1; c2 < 3; ++c2) {
            int counts[4] = {0, 0, 0, 0};
            for (const auto& row : d.profiles) counts[2 * row[c1] + row[c2]]++;
            for (int k = 0; k < 4; ++k) CHECK(counts[k] == 1);
        }
    }
}

TEST_CASE("every supported size validates, has unique rows and estimable main effects") {
    for (int a = 2; a <= 6; ++a) {
        const DesignMatrix d = generate_design(a);
        CHECK(validate_orthogonality(d).passed);
        std::set<std::vector<std::uint8_t>> rows(d.profiles.begin(), d.profiles.end());
        CHECK(rows.size() == d.runs());
        // [1 | profiles] must have full column rank a+1
        std::vector<std::vector<double>> m;
        for (const auto& row : d.profiles) {
            std::vector<double> r{1.0};
            for (auto v : row) r.push_back(v);
            m.push_back(std::move(r));
        }
        CHECK(matrix_rank(m) == a + 1);
        // deterministic output
        const DesignMatrix d2 = generate_design(a);
        CHECK(d2.profiles == d.profiles);
    }
}

TEST_CASE("unsupported sizes are rejected") {
    CHECK_THROWS_AS(generate_design(1), UnsupportedSize);
    CHECK_THROWS_AS(generate_design(7), UnsupportedSize);
}

TEST_CASE("design csv emission") {
    const DesignMatrix d = generate_design(2);
    const std::string csv = design_to_csv(d, {"A", "B"});
    CHECK(csv.substr(0, 5) == "A,B\r\n");
    CHECK_THROWS_AS(design_to_csv(d, {"A"}), Error);
}
