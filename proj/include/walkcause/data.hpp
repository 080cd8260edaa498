#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "walkcause/common.hpp"
#include "walkcause/csv.hpp"

namespace walkcause {

// ---------------------------------------------------------------------------
// Likert scale and the min-max transform used throughout the estimators.
//
// The transform divides by max_value (not max-min), so its range for a 1-7
// scale is [0, 6/7]; the inverse y*.max + min is the exact algebraic inverse.
// ---------------------------------------------------------------------------

struct LikertScale {
    int min_value = 1;
    int max_value = 7;

    void validate() const {
        if (!(min_value < max_value)) {
            throw Error("LikertScale requires min_value < max_value");
        }
        if (max_value <= 0) {
            throw Error("LikertScale requires max_value > 0 (the transform divides by it)");
        }
    }

    int span() const { return max_value - min_value; }

    bool operator==(const LikertScale&) const = default;
};

inline double to_probability_scale(double y, const LikertScale& scale) {
    if (y < scale.min_value || y > scale.max_value) {
        throw OutOfScale("value " + format_double(y) + " outside Likert scale [" +
                         std::to_string(scale.min_value) + "," +
                         std::to_string(scale.max_value) + "]");
    }
    return (y - scale.min_value) / static_cast<double>(scale.max_value);
}

inline double from_probability_scale(double y_star, const LikertScale& scale) {
    return y_star * scale.max_value + scale.min_value;
}

// ---------------------------------------------------------------------------
// Dataset abstraction shared by survey and simulated data.
// ---------------------------------------------------------------------------

enum class CovariateType { numeric, categorical };

struct CovariateColumn {
    std::string name;
    CovariateType type = CovariateType::numeric;
    std::vector<double> values;       // numeric columns
    std::vector<std::int32_t> codes;  // categorical columns: index into levels
    std::vector<std::string> levels;

    std::size_t size() const {
        return type == CovariateType::numeric ? values.size() : codes.size();
    }

    const std::string& label(std::size_t row) const {
        return levels[static_cast<std::size_t>(codes[row])];
    }

    bool operator==(const CovariateColumn&) const = default;
};

struct ObservationTable {
    LikertScale scale;
    std::vector<CovariateColumn> covariates;
    std::vector<std::string> treatment_names;
    std::vector<std::vector<std::uint8_t>> treatments;  // column-major, H columns
    std::string outcome_name = "Y";
    std::vector<double> outcome;
    std::string respondent_id_name;             // empty if absent
    std::vector<std::string> respondent_ids;    // carried through, unused

    std::size_t n() const { return outcome.size(); }
    std::size_t treatment_count() const { return treatments.size(); }

    void validate() const {
        scale.validate();
        if (outcome.empty()) throw EmptyDataset("dataset has no rows");
        std::set<std::string> names;
        for (const auto& c : covariates) {
            if (!names.insert(c.name).second) throw Error("duplicate column name: " + c.name);
            if (c.size() != n()) throw Error("covariate length mismatch: " + c.name);
        }
        for (const auto& t : treatment_names) {
            if (!names.insert(t).second) throw Error("duplicate column name: " + t);
        }
        if (!names.insert(outcome_name).second) {
            throw Error("duplicate column name: " + outcome_name);
        }
        if (treatments.size() != treatment_names.size()) {
            throw Error("treatment column/name count mismatch");
        }
        for (std::size_t j = 0; j < treatments.size(); ++j) {
            if (treatments[j].size() != n()) {
                throw Error("treatment length mismatch: " + treatment_names[j]);
            }
            for (std::uint8_t v : treatments[j]) {
                if (v != 0 && v != 1) {
                    throw NonBinaryTreatment("treatment " + treatment_names[j] +
                                             " has a cell outside {0,1}");
                }
            }
        }
        for (double y : outcome) {
            if (!(y >= scale.min_value && y <= scale.max_value)) {
                throw OutcomeOutOfScale("outcome " + format_double(y) +
                                        " outside Likert bounds");
            }
        }
        if (!respondent_ids.empty() && respondent_ids.size() != n()) {
            throw Error("respondent id length mismatch");
        }
    }

    bool operator==(const ObservationTable&) const = default;
};

/// Row subset/resample (indices may repeat; order defines the new row order).
inline ObservationTable subset_rows(const ObservationTable& table,
                                    const std::vector<std::size_t>& idx) {
    ObservationTable out;
    out.scale = table.scale;
    out.treatment_names = table.treatment_names;
    out.outcome_name = table.outcome_name;
    out.respondent_id_name = table.respondent_id_name;
    out.covariates.reserve(table.covariates.size());
    for (const auto& c : table.covariates) {
        CovariateColumn col;
        col.name = c.name;
        col.type = c.type;
        col.levels = c.levels;
        if (c.type == CovariateType::numeric) {
            col.values.reserve(idx.size());
            for (std::size_t i : idx) col.values.push_back(c.values[i]);
        } else {
            col.codes.reserve(idx.size());
            for (std::size_t i : idx) col.codes.push_back(c.codes[i]);
        }
        out.covariates.push_back(std::move(col));
    }
    out.treatments.resize(table.treatments.size());
    for (std::size_t j = 0; j < table.treatments.size(); ++j) {
        out.treatments[j].reserve(idx.size());
        for (std::size_t i : idx) out.treatments[j].push_back(table.treatments[j][i]);
    }
    out.outcome.reserve(idx.size());
    for (std::size_t i : idx) out.outcome.push_back(table.outcome[i]);
    if (!table.respondent_ids.empty()) {
        out.respondent_ids.reserve(idx.size());
        for (std::size_t i : idx) out.respondent_ids.push_back(table.respondent_ids[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Schema-driven CSV ingestion. Categorical covariates are declared, never
// inferred.
// ---------------------------------------------------------------------------

struct DatasetSchema {
    struct Covariate {
        std::string name;
        CovariateType type = CovariateType::numeric;
    };
    std::vector<Covariate> covariates;
    std::vector<std::string> treatments;
    std::string outcome_name;
    int outcome_min = 1;
    int outcome_max = 7;
    std::string respondent_id;  // optional, empty if absent

    static DatasetSchema from_json(const nlohmann::json& j) {
        DatasetSchema s;
        for (const auto& c : j.at("covariates")) {
            Covariate cov;
            cov.name = c.at("name").get<std::string>();
            const std::string t = c.at("type").get<std::string>();
            if (t == "numeric") {
                cov.type = CovariateType::numeric;
            } else if (t == "categorical") {
                cov.type = CovariateType::categorical;
            } else {
                throw ParseError("unknown covariate type: " + t);
            }
            s.covariates.push_back(std::move(cov));
        }
        s.treatments = j.at("treatments").get<std::vector<std::string>>();
        const auto& o = j.at("outcome");
        s.outcome_name = o.at("name").get<std::string>();
        s.outcome_min = o.at("min").get<int>();
        s.outcome_max = o.at("max").get<int>();
        if (j.contains("respondent_id")) s.respondent_id = j.at("respondent_id").get<std::string>();
        return s;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["covariates"] = nlohmann::json::array();
        for (const auto& c : covariates) {
            j["covariates"].push_back(
                {{"name", c.name},
                 {"type", c.type == CovariateType::numeric ? "numeric" : "categorical"}});
        }
        j["treatments"] = treatments;
        j["outcome"] = {{"name", outcome_name}, {"min", outcome_min}, {"max", outcome_max}};
        if (!respondent_id.empty()) j["respondent_id"] = respondent_id;
        return j;
    }
};

inline ObservationTable load_csv_text(const std::string& text, const DatasetSchema& schema) {
    const auto rows = parse_csv(text);
    if (rows.empty()) throw EmptyDataset("CSV has no header row");
    const auto& header = rows.front();
    std::map<std::string, std::size_t> col_index;
    for (std::size_t i = 0; i < header.size(); ++i) col_index[header[i]] = i;
    auto require = [&](const std::string& name) -> std::size_t {
        const auto it = col_index.find(name);
        if (it == col_index.end()) throw MissingColumn("column not found: " + name);
        return it->second;
    };

    ObservationTable table;
    table.scale = LikertScale{schema.outcome_min, schema.outcome_max};
    table.scale.validate();
    table.outcome_name = schema.outcome_name;
    table.treatment_names = schema.treatments;

    std::vector<std::size_t> cov_idx;
    for (const auto& c : schema.covariates) {
        cov_idx.push_back(require(c.name));
        CovariateColumn col;
        col.name = c.name;
        col.type = c.type;
        table.covariates.push_back(std::move(col));
    }
    std::vector<std::size_t> treat_idx;
    for (const auto& t : schema.treatments) treat_idx.push_back(require(t));
    const std::size_t outcome_idx = require(schema.outcome_name);
    std::optional<std::size_t> rid_idx;
    if (!schema.respondent_id.empty()) {
        rid_idx = require(schema.respondent_id);
        table.respondent_id_name = schema.respondent_id;
    }

    const std::size_t n = rows.size() - 1;
    if (n == 0) throw EmptyDataset("CSV has a header but no data rows");
    table.treatments.assign(schema.treatments.size(), {});
    std::vector<std::map<std::string, std::int32_t>> level_of(schema.covariates.size());

    for (std::size_t r = 1; r <= n; ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size()) {
            throw ParseError("row " + std::to_string(r) + " has " +
                             std::to_string(row.size()) + " fields, expected " +
                             std::to_string(header.size()));
        }
        for (std::size_t c = 0; c < schema.covariates.size(); ++c) {
            auto& col = table.covariates[c];
            const std::string& cell = row[cov_idx[c]];
            if (col.type == CovariateType::numeric) {
                col.values.push_back(parse_double(cell));
            } else {
                auto [it, inserted] =
                    level_of[c].try_emplace(cell, static_cast<std::int32_t>(col.levels.size()));
                if (inserted) col.levels.push_back(cell);
                col.codes.push_back(it->second);
            }
        }
        for (std::size_t t = 0; t < treat_idx.size(); ++t) {
            const double v = parse_double(row[treat_idx[t]]);
            if (v != 0.0 && v != 1.0) {
                throw NonBinaryTreatment("treatment " + schema.treatments[t] + " row " +
                                         std::to_string(r) + " value '" + row[treat_idx[t]] +
                                         "' not in {0,1}");
            }
            table.treatments[t].push_back(static_cast<std::uint8_t>(v));
        }
        const double y = parse_double(row[outcome_idx]);
        if (!(y >= table.scale.min_value && y <= table.scale.max_value)) {
            throw OutcomeOutOfScale("outcome " + row[outcome_idx] + " at row " +
                                    std::to_string(r) + " outside [" +
                                    std::to_string(table.scale.min_value) + "," +
                                    std::to_string(table.scale.max_value) + "]");
        }
        table.outcome.push_back(y);
        if (rid_idx) table.respondent_ids.push_back(row[*rid_idx]);
    }
    table.validate();
    return table;
}

inline ObservationTable load_csv(const std::string& path, const DatasetSchema& schema) {
    return load_csv_text(read_file(path), schema);
}

inline std::string save_csv_text(const ObservationTable& table) {
    CsvWriter w;
    std::vector<std::string> header;
    if (!table.respondent_id_name.empty()) header.push_back(table.respondent_id_name);
    for (const auto& c : table.covariates) header.push_back(c.name);
    for (const auto& t : table.treatment_names) header.push_back(t);
    header.push_back(table.outcome_name);
    w.row(header);
    for (std::size_t i = 0; i < table.n(); ++i) {
        std::vector<std::string> row;
        row.reserve(header.size());
        if (!table.respondent_id_name.empty()) row.push_back(table.respondent_ids[i]);
        for (const auto& c : table.covariates) {
            row.push_back(c.type == CovariateType::numeric ? format_double(c.values[i])
                                                           : c.label(i));
        }
        for (const auto& t : table.treatments) row.push_back(t[i] ? "1" : "0");
        row.push_back(format_double(table.outcome[i]));
        w.row(row);
    }
    return w.str();
}

inline void save_csv(const ObservationTable& table, const std::string& path) {
    write_file(path, save_csv_text(table));
}

/// Schema matching save_csv output, for round trips.
inline DatasetSchema schema_of(const ObservationTable& table) {
    DatasetSchema s;
    for (const auto& c : table.covariates) s.covariates.push_back({c.name, c.type});
    s.treatments = table.treatment_names;
    s.outcome_name = table.outcome_name;
    s.outcome_min = table.scale.min_value;
    s.outcome_max = table.scale.max_value;
    s.respondent_id = table.respondent_id_name;
    return s;
}

// ---------------------------------------------------------------------------
// Scenarios: a non-empty subset of treatments whose joint intervention is
// targeted; the rest keep their observed assignment.
// ---------------------------------------------------------------------------

struct ScenarioSpec {
    std::vector<int> active;  // 1-based treatment indices, ascending

    void validate(std::size_t treatment_count) const {
        if (active.empty()) throw Error("scenario has no active treatments");
        std::set<int> seen;
        for (int a : active) {
            if (a < 1 || a > static_cast<int>(treatment_count)) {
                throw Error("scenario index out of range: " + std::to_string(a));
            }
            if (!seen.insert(a).second) throw Error("duplicate scenario index");
        }
    }

    std::string label(const std::vector<std::string>& treatment_names) const {
        std::string s;
        for (std::size_t i = 0; i < active.size(); ++i) {
            if (i) s += "+";
            s += treatment_names[static_cast<std::size_t>(active[i] - 1)];
        }
        return s;
    }

    bool operator==(const ScenarioSpec&) const = default;
};

/// All non-empty subsets of {1..H}, ordered by (subset size, lexicographic) —
/// 31 scenarios for H=5, singletons first, the full set last.
inline std::vector<ScenarioSpec> enumerate_scenarios(int treatment_count) {
    if (treatment_count < 1) throw Error("treatment count must be >= 1");
    std::vector<ScenarioSpec> out;
    const int h = treatment_count;
    for (int size = 1; size <= h; ++size) {
        std::vector<int> combo(static_cast<std::size_t>(size));
        for (int i = 0; i < size; ++i) combo[static_cast<std::size_t>(i)] = i + 1;
        for (;;) {
            out.push_back(ScenarioSpec{combo});
            int i = size - 1;
            while (i >= 0 && combo[static_cast<std::size_t>(i)] == h - (size - 1 - i)) --i;
            if (i < 0) break;
            ++combo[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < size; ++j) {
                combo[static_cast<std::size_t>(j)] = combo[static_cast<std::size_t>(j - 1)] + 1;
            }
        }
    }
    return out;
}

enum class Exposure : std::uint8_t { exposed, control, ineligible };

struct ExposureAssignment {
    std::vector<Exposure> label;
    std::size_t n_exposed = 0;
    std::size_t n_control = 0;
    std::size_t n_ineligible = 0;
};

/// Labels each unit by its observed pattern on the scenario's active
/// treatments: all ones -> exposed, all zeros -> control, mixed -> ineligible.
inline ExposureAssignment composite_exposure(const ObservationTable& table,
                                             const ScenarioSpec& scenario) {
    scenario.validate(table.treatment_count());
    ExposureAssignment out;
    out.label.resize(table.n());
    for (std::size_t i = 0; i < table.n(); ++i) {
        bool all_one = true;
        bool all_zero = true;
        for (int a : scenario.active) {
            const std::uint8_t v = table.treatments[static_cast<std::size_t>(a - 1)][i];
            all_one = all_one && v == 1;
            all_zero = all_zero && v == 0;
        }
        if (all_one) {
            out.label[i] = Exposure::exposed;
            ++out.n_exposed;
        } else if (all_zero) {
            out.label[i] = Exposure::control;
            ++out.n_control;
        } else {
            out.label[i] = Exposure::ineligible;
            ++out.n_ineligible;
        }
    }
    if (out.n_exposed == 0 || out.n_control == 0) {
        throw DegenerateScenario("scenario " + scenario.label(table.treatment_names) +
                                 " has " + std::to_string(out.n_exposed) + " exposed and " +
                                 std::to_string(out.n_control) + " control units");
    }
    return out;
}

}  // namespace walkcause
