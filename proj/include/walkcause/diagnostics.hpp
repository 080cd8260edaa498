#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "walkcause/data.hpp"

namespace walkcause {

// ---------------------------------------------------------------------------
// Covariate balance (absolute standardized mean differences) and positivity
// reporting — the Love-plot machinery.
// ---------------------------------------------------------------------------

struct BalanceRow {
    std::string covariate;
    double asmd_unadjusted = 0.0;
    double asmd_weighted = 0.0;
    bool zero_variance = false;
};

struct BalanceReport {
    ScenarioSpec scenario;
    std::string weighting;  // e.g. "iptw" or "none"
    int n_interventions = 0;
    std::vector<BalanceRow> rows;
};

namespace detail {

// Expanded numeric view of the covariates: numeric columns as-is, categorical
// columns as one indicator per level ("name=level").
inline std::vector<std::pair<std::string, std::vector<double>>> expand_covariates(
    const ObservationTable& table) {
    std::vector<std::pair<std::string, std::vector<double>>> out;
    for (const auto& c : table.covariates) {
        if (c.type == CovariateType::numeric) {
            out.emplace_back(c.name, c.values);
        } else {
            for (std::size_t lv = 0; lv < c.levels.size(); ++lv) {
                std::vector<double> ind(table.n(), 0.0);
                for (std::size_t i = 0; i < table.n(); ++i) {
                    if (c.codes[i] == static_cast<std::int32_t>(lv)) ind[i] = 1.0;
                }
                out.emplace_back(c.name + "=" + c.levels[lv], std::move(ind));
            }
        }
    }
    return out;
}

struct AsmdValue {
    double value = 0.0;
    bool zero_variance = false;
};

// |weighted mean(exposed) - weighted mean(control)| / sqrt((s2_e + s2_c)/2),
// with the group variances always computed unweighted.
inline AsmdValue asmd_one(const std::vector<double>& x, const ExposureAssignment& exposure,
                          const std::vector<double>& weights) {
    double wsum1 = 0.0, wsum0 = 0.0, wx1 = 0.0, wx0 = 0.0;
    double s1 = 0.0, s0 = 0.0;
    std::size_t n1 = 0, n0 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        if (exposure.label[i] == Exposure::exposed) {
            wx1 += w * x[i];
            wsum1 += w;
            s1 += x[i];
            ++n1;
        } else if (exposure.label[i] == Exposure::control) {
            wx0 += w * x[i];
            wsum0 += w;
            s0 += x[i];
            ++n0;
        }
    }
    const double m1u = s1 / static_cast<double>(n1);
    const double m0u = s0 / static_cast<double>(n0);
    double v1 = 0.0, v0 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (exposure.label[i] == Exposure::exposed) v1 += (x[i] - m1u) * (x[i] - m1u);
        if (exposure.label[i] == Exposure::control) v0 += (x[i] - m0u) * (x[i] - m0u);
    }
    v1 /= std::max<double>(1.0, static_cast<double>(n1 - 1));
    v0 /= std::max<double>(1.0, static_cast<double>(n0 - 1));
    AsmdValue out;
    const double denom = std::sqrt((v1 + v0) / 2.0);
    if (denom < 1e-12) {
        out.zero_variance = true;
        out.value = 0.0;
        return out;
    }
    out.value = std::abs(wx1 / wsum1 - wx0 / wsum0) / denom;
    return out;
}

}  // namespace detail

/// Per-covariate ASMD between exposed and control units. Pass empty weights
/// for the unadjusted statistic.
inline std::vector<BalanceRow> asmd(const ObservationTable& table,
                                    const ExposureAssignment& exposure,
                                    const std::vector<double>& weights = {}) {
    if (exposure.n_exposed < 2 || exposure.n_control < 2) {
        throw DegenerateScenario("ASMD needs at least 2 exposed and 2 control units");
    }
    std::vector<BalanceRow> rows;
    for (const auto& [name, values] : detail::expand_covariates(table)) {
        const detail::AsmdValue v = detail::asmd_one(values, exposure, weights);
        BalanceRow r;
        r.covariate = name;
        r.asmd_unadjusted = v.value;
        r.asmd_weighted = v.value;
        r.zero_variance = v.zero_variance;
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Unadjusted and weighted ASMD side by side (the Love-plot rows).
inline BalanceReport balance_report(const ObservationTable& table, const ScenarioSpec& scenario,
                                    const ExposureAssignment& exposure,
                                    const std::vector<double>& weights,
                                    const std::string& weighting_name) {
    BalanceReport report;
    report.scenario = scenario;
    report.weighting = weighting_name;
    report.n_interventions = static_cast<int>(scenario.active.size());
    const std::vector<BalanceRow> unadj = asmd(table, exposure);
    const std::vector<BalanceRow> adj = asmd(table, exposure, weights);
    for (std::size_t i = 0; i < unadj.size(); ++i) {
        BalanceRow r = unadj[i];
        r.asmd_weighted = adj[i].asmd_weighted;
        r.zero_variance = unadj[i].zero_variance || adj[i].zero_variance;
        report.rows.push_back(std::move(r));
    }
    return report;
}

/// Inverse-probability weights for the eligible units of a scenario:
/// 1/e for exposed, 1/(1-e) for controls, 0 for ineligible.
inline std::vector<double> iptw_weights(const ExposureAssignment& exposure,
                                        const std::vector<double>& propensity) {
    std::vector<double> w(exposure.label.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (exposure.label[i] == Exposure::exposed) {
            w[i] = 1.0 / propensity[i];
        } else if (exposure.label[i] == Exposure::control) {
            w[i] = 1.0 / (1.0 - propensity[i]);
        }
    }
    return w;
}

struct PositivityReport {
    std::vector<double> deciles;  // 0%,10%,...,100% quantiles of e over eligible units
    std::size_t n_eligible = 0;
    std::size_t n_clipped_lo = 0;
    std::size_t n_clipped_hi = 0;
    double fraction_clipped = 0.0;
    bool flag = false;  // more than 5% clipped
};

inline PositivityReport positivity_report(const std::vector<double>& propensity, double clip_lo,
                                          double clip_hi) {
    PositivityReport rep;
    std::vector<double> e;
    for (double v : propensity) {
        if (std::isfinite(v)) e.push_back(v);
    }
    rep.n_eligible = e.size();
    if (e.empty()) return rep;
    std::sort(e.begin(), e.end());
    for (int d = 0; d <= 10; ++d) {
        const std::size_t pos = std::min(
            e.size() - 1, static_cast<std::size_t>(static_cast<double>(d) / 10.0 *
                                                   static_cast<double>(e.size() - 1) + 0.5));
        rep.deciles.push_back(e[pos]);
    }
    for (double v : e) {
        if (v <= clip_lo) ++rep.n_clipped_lo;
        if (v >= clip_hi) ++rep.n_clipped_hi;
    }
    rep.fraction_clipped =
        static_cast<double>(rep.n_clipped_lo + rep.n_clipped_hi) / static_cast<double>(e.size());
    rep.flag = rep.fraction_clipped > 0.05;
    return rep;
}

inline std::string balance_to_csv(const BalanceReport& report,
                                  const std::vector<std::string>& treatment_names) {
    CsvWriter w;
    w.row({"covariate", "asmd_unadjusted", "asmd_weighted", "zero_variance", "scenario",
           "n_interventions", "weighting"});
    const std::string scenario_label = report.scenario.label(treatment_names);
    for (const auto& r : report.rows) {
        w.row({r.covariate, format_double(r.asmd_unadjusted), format_double(r.asmd_weighted),
               r.zero_variance ? "true" : "false", scenario_label,
               std::to_string(report.n_interventions), report.weighting});
    }
    return w.str();
}

}  // namespace walkcause
