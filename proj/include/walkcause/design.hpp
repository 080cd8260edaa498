#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "walkcause/common.hpp"
#include "walkcause/csv.hpp"

namespace walkcause {

// ---------------------------------------------------------------------------
// Two-level orthogonal fractional-factorial designs for conjoint experiments.
// ---------------------------------------------------------------------------

struct DesignMatrix {
    std::vector<std::vector<std::uint8_t>> profiles;  // rows = profiles, cols = attributes

    std::size_t runs() const { return profiles.size(); }
    std::size_t attributes() const { return profiles.empty() ? 0 : profiles.front().size(); }
};

struct BalanceCheck {
    bool passed = true;
    std::vector<int> unbalanced_columns;              // columns violating the r/2 count
    std::vector<std::pair<int, int>> violating_pairs; // 1-based column pairs
};

/// Generates a 2^ceil(log2(a+1))-run two-level orthogonal array for a
/// attributes (2..6). Base columns form a full factorial; the remaining
/// columns are XNOR combinations of base columns. Rows are ordered by the
/// base bits as descending binary numbers, which for a=5 reproduces the
/// canonical eight-profile conjoint layout column-for-column.
inline DesignMatrix generate_design(int num_attributes) {
    if (num_attributes < 2 || num_attributes > 6) {
        throw UnsupportedSize("generate_design supports 2..6 attributes, got " +
                              std::to_string(num_attributes));
    }
    int base = 1;
    while ((1 << base) < num_attributes + 1) ++base;
    const int runs = 1 << base;

    // Column recipes as base-column subsets; a column's value is the XNOR of
    // its base bits (equivalently the +/-1 product).
    static const std::vector<std::vector<std::vector<int>>> recipes = {
        /* a=2 */ {{1}, {2}},
        /* a=3 */ {{1}, {2}, {1, 2}},
        /* a=4 */ {{1}, {2}, {1, 2}, {3}},
        /* a=5 */ {{1}, {2}, {1, 2}, {3}, {1, 2, 3}},
        /* a=6 */ {{1}, {2}, {1, 2}, {3}, {1, 2, 3}, {1, 3}},
    };
    const auto& recipe = recipes[static_cast<std::size_t>(num_attributes - 2)];

    DesignMatrix design;
    design.profiles.reserve(static_cast<std::size_t>(runs));
    for (int row = runs - 1; row >= 0; --row) {  // descending binary order of base bits
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(base));
        for (int b = 0; b < base; ++b) {
            bits[static_cast<std::size_t>(b)] =
                static_cast<std::uint8_t>((row >> (base - 1 - b)) & 1);
        }
        std::vector<std::uint8_t> profile;
        profile.reserve(recipe.size());
        for (const auto& cols : recipe) {
            // +/-1 product of the base columns: 1 iff an even number of 0 bits.
            int v = 1;
            for (int c : cols) {
                if (bits[static_cast<std::size_t>(c - 1)] == 0) v ^= 1;
            }
            profile.push_back(static_cast<std::uint8_t>(v));
        }
        design.profiles.push_back(std::move(profile));
    }
    return design;
}

/// Pairwise orthogonality check: every column must hold r/2 ones and every
/// column pair must realize each of the four level combinations exactly r/4
/// times. Violations are reported, not thrown.
inline BalanceCheck validate_orthogonality(const DesignMatrix& design) {
    BalanceCheck check;
    const std::size_t r = design.runs();
    const std::size_t a = design.attributes();
    if (r == 0 || a == 0) {
        check.passed = false;
        return check;
    }
    for (std::size_t c = 0; c < a; ++c) {
        std::size_t ones = 0;
        for (std::size_t i = 0; i < r; ++i) ones += design.profiles[i][c];
        if (2 * ones != r) {
            check.passed = false;
            check.unbalanced_columns.push_back(static_cast<int>(c + 1));
        }
    }
    for (std::size_t c1 = 0; c1 < a; ++c1) {
        for (std::size_t c2 = c1 + 1; c2 < a; ++c2) {
            std::size_t counts[4] = {0, 0, 0, 0};
            for (std::size_t i = 0; i < r; ++i) {
                counts[2 * design.profiles[i][c1] + design.profiles[i][c2]] += 1;
            }
            const bool ok = counts[0] == r / 4 && counts[1] == r / 4 &&
                            counts[2] == r / 4 && counts[3] == r / 4 && r % 4 == 0;
            if (!ok) {
                check.passed = false;
                check.violating_pairs.emplace_back(static_cast<int>(c1 + 1),
                                                   static_cast<int>(c2 + 1));
            }
        }
    }
    return check;
}

inline std::string design_to_csv(const DesignMatrix& design,
                                 const std::vector<std::string>& attribute_names) {
    if (attribute_names.size() != design.attributes()) {
        throw Error("attribute name count does not match design width");
    }
    CsvWriter w;
    w.row(attribute_names);
    for (const auto& profile : design.profiles) {
        std::vector<std::string> row;
        row.reserve(profile.size());
        for (std::uint8_t v : profile) row.push_back(v ? "1" : "0");
        w.row(row);
    }
    return w.str();
}

}  // namespace walkcause
