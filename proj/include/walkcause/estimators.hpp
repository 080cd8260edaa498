#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "walkcause/data.hpp"
#include "walkcause/nuisance.hpp"

namespace walkcause {

// ---------------------------------------------------------------------------
// The five effect estimators (raw difference, g-formula, IPTW, propensity
// matching, TMLE) plus the scenario sweep that produces the per-combination
// CATE report.
// ---------------------------------------------------------------------------

enum class EstimatorKind { raw_difference, g_formula, iptw, psm, tmle };

inline std::string estimator_name(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::raw_difference: return "raw_difference";
        case EstimatorKind::g_formula: return "g_formula";
        case EstimatorKind::iptw: return "iptw";
        case EstimatorKind::psm: return "psm";
        case EstimatorKind::tmle: return "tmle";
    }
    return "?";
}

inline EstimatorKind estimator_from_name(const std::string& s) {
    if (s == "raw_difference" || s == "raw") return EstimatorKind::raw_difference;
    if (s == "g_formula" || s == "gformula") return EstimatorKind::g_formula;
    if (s == "iptw") return EstimatorKind::iptw;
    if (s == "psm") return EstimatorKind::psm;
    if (s == "tmle") return EstimatorKind::tmle;
    throw ParseError("unknown estimator: " + s);
}

struct CateEstimate {
    ScenarioSpec scenario;
    std::string estimator;
    double psi_star = 0.0;     // effect on the transformed scale
    double psi_likert = 0.0;   // psi_star * max_value
    double psi_percent = 0.0;  // 100 * psi_likert / (max - min)
    double se_percent = std::numeric_limits<double>::quiet_NaN();
    double ci_lo = std::numeric_limits<double>::quiet_NaN();
    double ci_hi = std::numeric_limits<double>::quiet_NaN();
    bool significant = false;
    std::size_t n_exposed = 0;
    std::size_t n_control = 0;
    std::size_t n_ineligible = 0;
    std::size_t n_dropped = 0;  // psm: exposed units without a match in caliper
};

namespace detail {

inline CateEstimate make_estimate_star(const ScenarioSpec& scenario, EstimatorKind kind,
                                       double psi_star, double se_star,
                                       const LikertScale& scale,
                                       const ExposureAssignment& exposure) {
    CateEstimate e;
    e.scenario = scenario;
    e.estimator = estimator_name(kind);
    e.psi_star = psi_star;
    e.psi_likert = psi_star * scale.max_value;
    e.psi_percent = 100.0 * e.psi_likert / scale.span();
    const double se_likert = se_star * scale.max_value;
    e.se_percent = 100.0 * se_likert / scale.span();
    e.ci_lo = e.psi_percent - 1.96 * e.se_percent;
    e.ci_hi = e.psi_percent + 1.96 * e.se_percent;
    e.significant = std::isfinite(e.ci_lo) && std::isfinite(e.ci_hi) &&
                    (e.ci_lo > 0.0 || e.ci_hi < 0.0);
    e.n_exposed = exposure.n_exposed;
    e.n_control = exposure.n_control;
    e.n_ineligible = exposure.n_ineligible;
    return e;
}

inline CateEstimate make_estimate_likert(const ScenarioSpec& scenario, EstimatorKind kind,
                                         double psi_likert, double se_likert,
                                         const LikertScale& scale,
                                         const ExposureAssignment& exposure) {
    return make_estimate_star(scenario, kind, psi_likert / scale.max_value,
                              se_likert / scale.max_value, scale, exposure);
}

inline std::uint64_t scenario_hash(const ScenarioSpec& s) {
    std::uint64_t h = 0x5ce9a410ull;
    for (int a : s.active) h = hash_combine(h, static_cast<std::uint64_t>(a));
    return h;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Raw difference of group means on the Likert scale.
// ---------------------------------------------------------------------------

inline CateEstimate raw_difference(const ObservationTable& table, const ScenarioSpec& scenario,
                                   const ExposureAssignment& exposure) {
    double sum1 = 0.0, sum0 = 0.0;
    for (std::size_t i = 0; i < table.n(); ++i) {
        if (exposure.label[i] == Exposure::exposed) sum1 += table.outcome[i];
        if (exposure.label[i] == Exposure::control) sum0 += table.outcome[i];
    }
    const double n1 = static_cast<double>(exposure.n_exposed);
    const double n0 = static_cast<double>(exposure.n_control);
    const double mu1 = sum1 / n1;
    const double mu0 = sum0 / n0;
    double ss1 = 0.0, ss0 = 0.0;
    for (std::size_t i = 0; i < table.n(); ++i) {
        if (exposure.label[i] == Exposure::exposed) {
            ss1 += (table.outcome[i] - mu1) * (table.outcome[i] - mu1);
        } else if (exposure.label[i] == Exposure::control) {
            ss0 += (table.outcome[i] - mu0) * (table.outcome[i] - mu0);
        }
    }
    double se = std::numeric_limits<double>::quiet_NaN();
    if (n1 + n0 > 2.5) {
        const double pooled = (ss1 + ss0) / (n1 + n0 - 2.0);
        se = std::sqrt(pooled * (1.0 / n1 + 1.0 / n0));
    }
    return detail::make_estimate_likert(scenario, EstimatorKind::raw_difference, mu1 - mu0, se,
                                        table.scale, exposure);
}

inline CateEstimate raw_difference(const ObservationTable& table, const ScenarioSpec& scenario) {
    return raw_difference(table, scenario, composite_exposure(table, scenario));
}

// ---------------------------------------------------------------------------
// G-formula: plug-in mean of the counterfactual predictions over all units,
// standard error by nonparametric bootstrap with outcome-model refits.
// ---------------------------------------------------------------------------

struct GFormulaOptions {
    bool with_se = true;
    int bootstrap_b = 200;
    std::uint64_t seed = 0;
};

inline CateEstimate g_formula(const ObservationTable& table, const ScenarioSpec& scenario,
                              const NuisanceEstimates& nuisance, const EstimationConfig& config,
                              const GFormulaOptions& opts = {}) {
    const std::size_t n = table.n();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += nuisance.q0_exposed[i] - nuisance.q0_control[i];
    const double psi_star = sum / static_cast<double>(n);

    double se_star = std::numeric_limits<double>::quiet_NaN();
    if (opts.with_se) {
        std::vector<double> boot;
        boot.reserve(static_cast<std::size_t>(opts.bootstrap_b));
        const std::uint64_t sc = detail::scenario_hash(scenario);
        // Resample refits use a single fit; cross-fitting inside the bootstrap
        // would multiply the cost without changing the resampling variance.
        EstimationConfig refit_config = config;
        refit_config.cross_fit_folds = 0;
        for (int b = 0; b < opts.bootstrap_b; ++b) {
            CounterRng rng(seed_key({opts.seed, sc, 0x6f00ull, static_cast<std::uint64_t>(b)}));
            std::vector<std::size_t> idx(n);
            for (std::size_t i = 0; i < n; ++i) idx[i] = rng.next_below(n);
            try {
                const ObservationTable resampled = subset_rows(table, idx);
                const OutcomeModel om = fit_outcome(resampled, refit_config);
                const CounterfactualPredictions q0 =
                    counterfactual_predictions(om, resampled, scenario);
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) s += q0.q0_exposed[i] - q0.q0_control[i];
                boot.push_back(s / static_cast<double>(n));
            } catch (const Error&) {
                // degenerate resample; skipped
            }
        }
        if (boot.size() >= 2) se_star = sample_sd(boot);
    }
    return detail::make_estimate_star(scenario, EstimatorKind::g_formula, psi_star, se_star,
                                      table.scale, nuisance.exposure);
}

// ---------------------------------------------------------------------------
// IPTW: Hajek estimator with weights 1/e and 1/(1-e), normalized per arm;
// standard error from the influence-function sandwich (propensity treated as
// known).
// ---------------------------------------------------------------------------

inline CateEstimate iptw(const ObservationTable& table, const ScenarioSpec& scenario,
                         const NuisanceEstimates& nuisance, bool with_se = true) {
    double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
    std::size_t n_el = 0;
    for (std::size_t i = 0; i < table.n(); ++i) {
        if (nuisance.exposure.label[i] == Exposure::exposed) {
            const double w = 1.0 / nuisance.propensity[i];
            num1 += w * table.outcome[i];
            den1 += w;
            ++n_el;
        } else if (nuisance.exposure.label[i] == Exposure::control) {
            const double w = 1.0 / (1.0 - nuisance.propensity[i]);
            num0 += w * table.outcome[i];
            den0 += w;
            ++n_el;
        }
    }
    const double mu1 = num1 / den1;
    const double mu0 = num0 / den0;
    double se = std::numeric_limits<double>::quiet_NaN();
    if (with_se) {
        const double mw1 = den1 / static_cast<double>(n_el);
        const double mw0 = den0 / static_cast<double>(n_el);
        std::vector<double> ic;
        ic.reserve(n_el);
        for (std::size_t i = 0; i < table.n(); ++i) {
            if (nuisance.exposure.label[i] == Exposure::exposed) {
                ic.push_back((table.outcome[i] - mu1) / (nuisance.propensity[i] * mw1));
            } else if (nuisance.exposure.label[i] == Exposure::control) {
                ic.push_back(-(table.outcome[i] - mu0) / ((1.0 - nuisance.propensity[i]) * mw0));
            }
        }
        se = sample_sd(ic) / std::sqrt(static_cast<double>(n_el));
    }
    return detail::make_estimate_likert(scenario, EstimatorKind::iptw, mu1 - mu0, se,
                                        table.scale, nuisance.exposure);
}

// ---------------------------------------------------------------------------
// Propensity score matching: 1-nearest-neighbor on |e_i - e_j|, default with
// replacement and caliper 0.05; ties broken by lowest unit index.
// ---------------------------------------------------------------------------

struct PsmOptions {
    bool replacement = true;
    double caliper = 0.05;
    bool with_se = true;
    int bootstrap_b = 200;
    std::uint64_t seed = 0;
};

namespace detail {

struct MatchUnit {
    double e;
    double y;
    std::size_t index;  // original unit index, used for deterministic ties
};

struct MatchOutcome {
    double estimate = std::numeric_limits<double>::quiet_NaN();
    std::size_t n_pairs = 0;
    std::size_t n_dropped = 0;
};

// Controls must be sorted by (e, index). Scans outward from the insertion
// point; among equal distances the lowest original index wins.
inline MatchOutcome match_pairs(const std::vector<MatchUnit>& exposed,
                                std::vector<MatchUnit> controls, bool replacement,
                                double caliper) {
    MatchOutcome out;
    std::sort(controls.begin(), controls.end(), [](const MatchUnit& a, const MatchUnit& b) {
        return a.e < b.e || (a.e == b.e && a.index < b.index);
    });
    std::vector<bool> used(controls.size(), false);
    double diff_sum = 0.0;
    for (const auto& x : exposed) {
        const auto cmp = [](const MatchUnit& u, double v) { return u.e < v; };
        const std::ptrdiff_t pos =
            std::lower_bound(controls.begin(), controls.end(), x.e, cmp) - controls.begin();
        double best_d = std::numeric_limits<double>::infinity();
        std::ptrdiff_t best = -1;
        for (std::ptrdiff_t l = pos - 1; l >= 0; --l) {
            if (!replacement && used[static_cast<std::size_t>(l)]) continue;
            const double d = x.e - controls[static_cast<std::size_t>(l)].e;
            if (d > best_d) break;
            if (d < best_d ||
                (d == best_d && controls[static_cast<std::size_t>(l)].index <
                                    controls[static_cast<std::size_t>(best)].index)) {
                best_d = d;
                best = l;
            }
        }
        for (std::ptrdiff_t r = pos; r < static_cast<std::ptrdiff_t>(controls.size()); ++r) {
            if (!replacement && used[static_cast<std::size_t>(r)]) continue;
            const double d = controls[static_cast<std::size_t>(r)].e - x.e;
            if (d > best_d) break;
            if (d < best_d ||
                (d == best_d && (best < 0 || controls[static_cast<std::size_t>(r)].index <
                                                 controls[static_cast<std::size_t>(best)].index))) {
                best_d = d;
                best = r;
            }
        }
        if (best < 0 || best_d > caliper) {
            ++out.n_dropped;
            continue;
        }
        diff_sum += x.y - controls[static_cast<std::size_t>(best)].y;
        ++out.n_pairs;
        if (!replacement) used[static_cast<std::size_t>(best)] = true;
    }
    if (out.n_pairs > 0) out.estimate = diff_sum / static_cast<double>(out.n_pairs);
    return out;
}

}  // namespace detail

inline CateEstimate psm(const ObservationTable& table, const ScenarioSpec& scenario,
                        const NuisanceEstimates& nuisance, const PsmOptions& opts = {}) {
    std::vector<detail::MatchUnit> exposed, controls;
    for (std::size_t i = 0; i < table.n(); ++i) {
        if (nuisance.exposure.label[i] == Exposure::exposed) {
            exposed.push_back({nuisance.propensity[i], table.outcome[i], i});
        } else if (nuisance.exposure.label[i] == Exposure::control) {
            controls.push_back({nuisance.propensity[i], table.outcome[i], i});
        }
    }
    const detail::MatchOutcome m =
        detail::match_pairs(exposed, controls, opts.replacement, opts.caliper);
    if (m.n_pairs == 0) {
        throw NoMatches("no matched pairs within caliper " + format_double(opts.caliper) +
                        " for scenario " + scenario.label(table.treatment_names));
    }
    double se = std::numeric_limits<double>::quiet_NaN();
    if (opts.with_se) {
        std::vector<detail::MatchUnit> eligible = exposed;
        eligible.insert(eligible.end(), controls.begin(), controls.end());
        std::vector<bool> is_exposed(eligible.size());
        for (std::size_t t = 0; t < eligible.size(); ++t) is_exposed[t] = t < exposed.size();
        const std::uint64_t sc = detail::scenario_hash(scenario);
        std::vector<double> boot;
        boot.reserve(static_cast<std::size_t>(opts.bootstrap_b));
        for (int b = 0; b < opts.bootstrap_b; ++b) {
            CounterRng rng(seed_key({opts.seed, sc, 0x95e11ull, static_cast<std::uint64_t>(b)}));
            std::vector<detail::MatchUnit> bx, bc;
            for (std::size_t t = 0; t < eligible.size(); ++t) {
                const std::size_t pick = rng.next_below(eligible.size());
                (is_exposed[pick] ? bx : bc).push_back(eligible[pick]);
            }
            if (bx.empty() || bc.empty()) continue;
            const detail::MatchOutcome mb =
                detail::match_pairs(bx, bc, opts.replacement, opts.caliper);
            if (mb.n_pairs > 0) boot.push_back(mb.estimate);
        }
        if (boot.size() >= 2) se = sample_sd(boot);
    }
    CateEstimate est = detail::make_estimate_likert(scenario, EstimatorKind::psm, m.estimate, se,
                                                    table.scale, nuisance.exposure);
    est.n_dropped = m.n_dropped;
    return est;
}

// ---------------------------------------------------------------------------
// TMLE: one-step targeted update on the probability scale, exactly the
// printed linear correction by default, with an optional canonical logistic
// fluctuation. The update applies to eligible units; ineligible units keep
// their plug-in predictions.
// ---------------------------------------------------------------------------

struct TmleOptions {
    bool logistic_fluctuation = false;
    bool with_se = true;
};

/// Targeted prediction for a unit's observed arm under the linear update:
/// Q* = Q0 + (I(exposed) - e) / (e (1 - e)) * (y* - Q0).
inline double tmle_fluctuation(double q0, double e, bool exposed, double y_star) {
    const double factor = ((exposed ? 1.0 : 0.0) - e) / (e * (1.0 - e));
    return q0 + factor * (y_star - q0);
}

inline CateEstimate tmle(const ObservationTable& table, const ScenarioSpec& scenario,
                         const NuisanceEstimates& nuisance, const TmleOptions& opts = {}) {
    const std::size_t n = table.n();
    std::vector<double> ystar(n);
    for (std::size_t i = 0; i < n; ++i) {
        ystar[i] = to_probability_scale(table.outcome[i], table.scale);
    }

    // Per-unit counterfactual contrast Q*(1,X) - Q*(0,X).
    std::vector<double> contrast(n);
    std::vector<double> corr(n, 0.0);

    if (!opts.logistic_fluctuation) {
        for (std::size_t i = 0; i < n; ++i) {
            const double plug = nuisance.q0_exposed[i] - nuisance.q0_control[i];
            if (nuisance.exposure.label[i] == Exposure::ineligible) {
                contrast[i] = plug;
                continue;
            }
            const bool exposed = nuisance.exposure.label[i] == Exposure::exposed;
            const double e = nuisance.propensity[i];
            const double ind = exposed ? 1.0 : 0.0;
            corr[i] = (ind - e) / (e * (1.0 - e)) * (ystar[i] - nuisance.q0_observed[i]);
            contrast[i] = plug + corr[i];
        }
    } else {
        // Canonical logistic fluctuation: solve the score equation for eps on
        // the eligible units, then update both arms on the logit scale.
        auto safe_logit = [](double p) { return logit(clamp_unit(p)); };
        double eps = 0.0;
        for (int iter = 0; iter < 200; ++iter) {
            double score = 0.0, info = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (nuisance.exposure.label[i] == Exposure::ineligible) continue;
                const bool exposed = nuisance.exposure.label[i] == Exposure::exposed;
                const double e = nuisance.propensity[i];
                const double hcl = exposed ? 1.0 / e : -1.0 / (1.0 - e);
                const double q = expit(safe_logit(nuisance.q0_observed[i]) + eps * hcl);
                score += hcl * (ystar[i] - q);
                info += hcl * hcl * q * (1.0 - q);
            }
            if (info < 1e-12) break;
            const double step = score / info;
            eps += step;
            if (std::abs(step) < 1e-12) break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (nuisance.exposure.label[i] == Exposure::ineligible) {
                contrast[i] = nuisance.q0_exposed[i] - nuisance.q0_control[i];
                continue;
            }
            const bool exposed = nuisance.exposure.label[i] == Exposure::exposed;
            const double e = nuisance.propensity[i];
            const double q1 = expit(safe_logit(nuisance.q0_exposed[i]) + eps / e);
            const double q0 = expit(safe_logit(nuisance.q0_control[i]) - eps / (1.0 - e));
            contrast[i] = q1 - q0;
            const double hcl = exposed ? 1.0 / e : -1.0 / (1.0 - e);
            const double qobs = expit(safe_logit(nuisance.q0_observed[i]) + eps * hcl);
            corr[i] = hcl * (ystar[i] - qobs);
        }
    }

    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += contrast[i];
    const double psi_star = sum / static_cast<double>(n);

    double se_star = std::numeric_limits<double>::quiet_NaN();
    if (opts.with_se) {
        std::vector<double> ic;
        ic.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (nuisance.exposure.label[i] == Exposure::ineligible) continue;
            const double plug = nuisance.q0_exposed[i] - nuisance.q0_control[i];
            ic.push_back(corr[i] + plug - psi_star);
        }
        se_star = sample_sd(ic) / std::sqrt(static_cast<double>(ic.size()));
    }
    return detail::make_estimate_star(scenario, EstimatorKind::tmle, psi_star, se_star,
                                      table.scale, nuisance.exposure);
}

// ---------------------------------------------------------------------------
// Interaction decomposition identity: for any per-unit prediction table over
// the four cells of a treatment pair,
//   psi^a(.|b=1) + psi^a(.|b=0) + psi^b(.|a=1) + psi^b(.|a=0) = 2 psi^{a&b}.
// Returns the maximum absolute residual over units.
// ---------------------------------------------------------------------------

inline double interaction_decomposition_check(const std::vector<double>& cell11,
                                              const std::vector<double>& cell10,
                                              const std::vector<double>& cell01,
                                              const std::vector<double>& cell00) {
    const std::size_t n = cell11.size();
    if (cell10.size() != n || cell01.size() != n || cell00.size() != n) {
        throw Error("cell prediction vectors must have equal length");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lhs = (cell11[i] - cell01[i]) + (cell10[i] - cell00[i]) +
                           (cell11[i] - cell10[i]) + (cell01[i] - cell00[i]);
        const double rhs = 2.0 * (cell11[i] - cell00[i]);
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Scenario sweep: every non-empty treatment subset x every requested
// estimator, with per-row error capture, plus the per-treatment aggregation
// of effects by number of interventions.
// ---------------------------------------------------------------------------

struct SweepOptions {
    std::vector<EstimatorKind> estimators = {EstimatorKind::raw_difference,
                                             EstimatorKind::g_formula, EstimatorKind::iptw,
                                             EstimatorKind::psm, EstimatorKind::tmle};
    bool with_se = true;
    int bootstrap_b = 200;
    std::uint64_t seed = 0;
    int workers = 1;
    PsmOptions psm_options;
    TmleOptions tmle_options;
};

struct SweepRow {
    int scenario_id = 0;  // 1-based position in enumeration order
    ScenarioSpec scenario;
    std::string estimator;
    bool ok = false;
    CateEstimate estimate;
    std::string error;
};

struct EffectByCount {
    std::string estimator;
    std::string treatment;
    int n_interventions = 0;
    double mean_psi_percent = 0.0;
    double band_lo = std::numeric_limits<double>::quiet_NaN();
    double band_hi = std::numeric_limits<double>::quiet_NaN();
    int n_scenarios = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<EffectByCount> aggregation;

    bool any_errors() const {
        return std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.ok; });
    }
};

inline SweepResult scenario_sweep(const ObservationTable& table, const EstimationConfig& config,
                                  const SweepOptions& opts = {}) {
    const std::vector<ScenarioSpec> scenarios =
        enumerate_scenarios(static_cast<int>(table.treatment_count()));
    const OutcomeModel outcome_model = fit_outcome(table, config);

    const bool needs_propensity =
        std::any_of(opts.estimators.begin(), opts.estimators.end(), [](EstimatorKind k) {
            return k == EstimatorKind::iptw || k == EstimatorKind::psm ||
                   k == EstimatorKind::tmle;
        });
    const bool needs_outcome =
        std::any_of(opts.estimators.begin(), opts.estimators.end(), [](EstimatorKind k) {
            return k == EstimatorKind::g_formula || k == EstimatorKind::tmle;
        });

    std::vector<std::vector<SweepRow>> slots(scenarios.size());
    parallel_for(scenarios.size(), opts.workers, [&](std::size_t s) {
        const ScenarioSpec& scenario = scenarios[s];
        std::vector<SweepRow>& rows = slots[s];
        auto fail_all = [&](const std::string& msg) {
            for (EstimatorKind k : opts.estimators) {
                SweepRow r;
                r.scenario_id = static_cast<int>(s + 1);
                r.scenario = scenario;
                r.estimator = estimator_name(k);
                r.error = msg;
                rows.push_back(std::move(r));
            }
        };
        ExposureAssignment exposure;
        try {
            exposure = composite_exposure(table, scenario);
        } catch (const Error& e) {
            fail_all(e.what());
            return;
        }
        NuisanceEstimates nuisance;
        nuisance.scenario = scenario;
        nuisance.exposure = exposure;
        nuisance.clip_lo = config.clip_lo;
        nuisance.clip_hi = config.clip_hi;
        std::string outcome_error, propensity_error;
        if (needs_outcome) {
            try {
                CounterfactualPredictions q0 =
                    counterfactual_predictions(outcome_model, table, scenario);
                nuisance.q0_exposed = std::move(q0.q0_exposed);
                nuisance.q0_control = std::move(q0.q0_control);
                nuisance.q0_observed = std::move(q0.q0_observed);
            } catch (const Error& e) {
                outcome_error = e.what();
            }
        }
        if (needs_propensity) {
            try {
                PropensityFit pf = fit_propensity(table, scenario, exposure, config);
                nuisance.propensity = std::move(pf.propensity);
                nuisance.positivity = pf.positivity;
            } catch (const Error& e) {
                propensity_error = e.what();
            }
        }
        for (EstimatorKind k : opts.estimators) {
            SweepRow r;
            r.scenario_id = static_cast<int>(s + 1);
            r.scenario = scenario;
            r.estimator = estimator_name(k);
            try {
                switch (k) {
                    case EstimatorKind::raw_difference:
                        r.estimate = raw_difference(table, scenario, exposure);
                        break;
                    case EstimatorKind::g_formula: {
                        if (!outcome_error.empty()) throw Error(outcome_error);
                        GFormulaOptions go;
                        go.with_se = opts.with_se;
                        go.bootstrap_b = opts.bootstrap_b;
                        go.seed = opts.seed;
                        r.estimate = g_formula(table, scenario, nuisance, config, go);
                        break;
                    }
                    case EstimatorKind::iptw:
                        if (!propensity_error.empty()) throw Error(propensity_error);
                        r.estimate = iptw(table, scenario, nuisance, opts.with_se);
                        break;
                    case EstimatorKind::psm: {
                        if (!propensity_error.empty()) throw Error(propensity_error);
                        PsmOptions po = opts.psm_options;
                        po.with_se = opts.with_se;
                        po.bootstrap_b = opts.bootstrap_b;
                        po.seed = opts.seed;
                        r.estimate = psm(table, scenario, nuisance, po);
                        break;
                    }
                    case EstimatorKind::tmle: {
                        if (!outcome_error.empty()) throw Error(outcome_error);
                        if (!propensity_error.empty()) throw Error(propensity_error);
                        TmleOptions to = opts.tmle_options;
                        to.with_se = opts.with_se;
                        r.estimate = tmle(table, scenario, nuisance, to);
                        break;
                    }
                }
                r.ok = true;
            } catch (const Error& e) {
                r.error = e.what();
            }
            rows.push_back(std::move(r));
        }
    });

    SweepResult result;
    for (auto& rows : slots) {
        for (auto& r : rows) result.rows.push_back(std::move(r));
    }

    // Figure-style aggregation: for each estimator and treatment, the mean
    // effect over scenarios containing that treatment, grouped by |active|.
    const std::size_t h = table.treatment_count();
    for (EstimatorKind k : opts.estimators) {
        const std::string name = estimator_name(k);
        for (std::size_t t = 1; t <= h; ++t) {
            for (std::size_t size = 1; size <= h; ++size) {
                double sum = 0.0, var_sum = 0.0;
                int count = 0;
                bool bands_ok = true;
                for (const SweepRow& r : result.rows) {
                    if (!r.ok || r.estimator != name) continue;
                    if (r.scenario.active.size() != size) continue;
                    if (std::find(r.scenario.active.begin(), r.scenario.active.end(),
                                  static_cast<int>(t)) == r.scenario.active.end()) {
                        continue;
                    }
                    sum += r.estimate.psi_percent;
                    if (std::isfinite(r.estimate.se_percent)) {
                        var_sum += r.estimate.se_percent * r.estimate.se_percent;
                    } else {
                        bands_ok = false;
                    }
                    ++count;
                }
                if (count == 0) continue;
                EffectByCount agg;
                agg.estimator = name;
                agg.treatment = table.treatment_names[t - 1];
                agg.n_interventions = static_cast<int>(size);
                agg.mean_psi_percent = sum / count;
                agg.n_scenarios = count;
                if (bands_ok) {
                    const double se_mean = std::sqrt(var_sum) / count;
                    agg.band_lo = agg.mean_psi_percent - 1.96 * se_mean;
                    agg.band_hi = agg.mean_psi_percent + 1.96 * se_mean;
                }
                result.aggregation.push_back(std::move(agg));
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// CSV emission (Table-3 layout plus diagnostics).
// ---------------------------------------------------------------------------

inline std::string results_to_csv(const SweepResult& result,
                                  const std::vector<std::string>& treatment_names) {
    CsvWriter w;
    w.row({"scenario_id", "active_treatments", "estimator", "psi_percent", "se_percent",
           "ci_lo", "ci_hi", "significant", "n_exposed", "n_control", "n_ineligible",
           "error"});
    auto num = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
    for (const SweepRow& r : result.rows) {
        std::vector<std::string> row;
        row.push_back(std::to_string(r.scenario_id));
        row.push_back(r.scenario.label(treatment_names));
        row.push_back(r.estimator);
        if (r.ok) {
            row.push_back(num(r.estimate.psi_percent));
            row.push_back(num(r.estimate.se_percent));
            row.push_back(num(r.estimate.ci_lo));
            row.push_back(num(r.estimate.ci_hi));
            row.push_back(r.estimate.significant ? "true" : "false");
            row.push_back(std::to_string(r.estimate.n_exposed));
            row.push_back(std::to_string(r.estimate.n_control));
            row.push_back(std::to_string(r.estimate.n_ineligible));
            row.push_back("");
        } else {
            for (int i = 0; i < 8; ++i) row.push_back("");
            row.push_back(r.error);
        }
        w.row(row);
    }
    return w.str();
}

inline std::string effect_by_count_csv(const SweepResult& result) {
    CsvWriter w;
    w.row({"estimator", "treatment", "n_interventions", "mean_psi_percent", "band_lo",
           "band_hi", "n_scenarios"});
    auto num = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
    for (const EffectByCount& a : result.aggregation) {
        w.row({a.estimator, a.treatment, std::to_string(a.n_interventions),
               num(a.mean_psi_percent), num(a.band_lo), num(a.band_hi),
               std::to_string(a.n_scenarios)});
    }
    return w.str();
}

}  // namespace walkcause
