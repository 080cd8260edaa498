#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "walkcause/data.hpp"
#include "walkcause/learners.hpp"

namespace walkcause {

// ---------------------------------------------------------------------------
// Nuisance estimation: outcome regression Q0 on (treatments, covariates) and
// propensity e(X) = P(exposed | X) among eligible units, with positivity
// clipping and optional cross-fitting.
// ---------------------------------------------------------------------------

struct EstimationConfig {
    LearnerSpec outcome_learner;
    LearnerSpec propensity_learner;
    int cross_fit_folds = 5;  // 0 disables cross-fitting
    double clip_lo = 0.01;
    double clip_hi = 0.99;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(clip_lo > 0.0 && clip_lo < clip_hi && clip_hi < 1.0)) {
            throw Error("clip bounds must satisfy 0 < lo < hi < 1");
        }
        if (cross_fit_folds == 1 || cross_fit_folds < 0) {
            throw Error("cross_fit_folds must be 0 or >= 2");
        }
    }

    static EstimationConfig from_json(const nlohmann::json& j) {
        EstimationConfig c;
        if (j.contains("outcome_learner")) {
            c.outcome_learner = LearnerSpec::from_json(j.at("outcome_learner"));
        }
        if (j.contains("propensity_learner")) {
            c.propensity_learner = LearnerSpec::from_json(j.at("propensity_learner"));
        }
        c.cross_fit_folds = j.value("cross_fit_folds", c.cross_fit_folds);
        c.clip_lo = j.value("clip_lo", c.clip_lo);
        c.clip_hi = j.value("clip_hi", c.clip_hi);
        c.seed = j.value("seed", c.seed);
        c.validate();
        return c;
    }

    nlohmann::json to_json() const {
        return {{"outcome_learner", outcome_learner.to_json()},
                {"propensity_learner", propensity_learner.to_json()},
                {"cross_fit_folds", cross_fit_folds},
                {"clip_lo", clip_lo},
                {"clip_hi", clip_hi},
                {"seed", seed}};
    }
};

/// Feature table for the outcome regression: all treatment columns as numeric
/// 0/1 features followed by the covariates.
inline FeatureTable outcome_features(const ObservationTable& table) {
    FeatureTable f;
    f.reserve(table.treatment_count() + table.covariates.size());
    for (std::size_t j = 0; j < table.treatment_count(); ++j) {
        FeatureColumn col;
        col.name = table.treatment_names[j];
        col.numeric.reserve(table.n());
        for (std::uint8_t v : table.treatments[j]) col.numeric.push_back(v);
        f.push_back(std::move(col));
    }
    for (const auto& c : table.covariates) {
        FeatureColumn col;
        col.name = c.name;
        col.categorical = c.type == CovariateType::categorical;
        col.numeric = c.values;
        col.codes = c.codes;
        col.levels = c.levels;
        f.push_back(std::move(col));
    }
    return f;
}

/// Covariate-only features for the propensity model.
inline FeatureTable covariate_features(const ObservationTable& table) {
    FeatureTable f;
    f.reserve(table.covariates.size());
    for (const auto& c : table.covariates) {
        FeatureColumn col;
        col.name = c.name;
        col.categorical = c.type == CovariateType::categorical;
        col.numeric = c.values;
        col.codes = c.codes;
        col.levels = c.levels;
        f.push_back(std::move(col));
    }
    return f;
}

/// A scenario-independent outcome regression of y* on (W, X): one model, or
/// one per fold when cross-fitting.
struct OutcomeModel {
    std::vector<FittedModel> models;
    std::vector<int> fold_of;  // empty when cross-fitting is off
    bool cross_fitted() const { return !fold_of.empty(); }
};

inline OutcomeModel fit_outcome(const ObservationTable& table, const EstimationConfig& config) {
    config.validate();
    const FeatureTable features = outcome_features(table);
    std::vector<double> target;
    target.reserve(table.n());
    for (double y : table.outcome) target.push_back(to_probability_scale(y, table.scale));
    OutcomeModel out;
    if (config.cross_fit_folds >= 2) {
        CrossFitResult cf = cross_fit(features, target, config.outcome_learner,
                                      config.cross_fit_folds, seed_key({config.seed, 0x07c03eull}));
        out.models = std::move(cf.models);
        out.fold_of = std::move(cf.fold_of);
    } else {
        out.models.push_back(fit(features, target, config.outcome_learner));
    }
    return out;
}

struct CounterfactualPredictions {
    std::vector<double> q0_exposed;   // active treatments forced to 1
    std::vector<double> q0_control;   // active treatments forced to 0
    std::vector<double> q0_observed;  // treatments at face value
};

namespace detail {

inline std::vector<double> predict_routed(const OutcomeModel& om, const FeatureTable& features) {
    if (!om.cross_fitted()) return om.models.front().predict(features);
    // Route each row to the model that did not train on it.
    const std::size_t n = feature_rows(features);
    std::vector<double> out(n, 0.0);
    for (std::size_t fold = 0; fold < om.models.size(); ++fold) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i) {
            if (om.fold_of[i] == static_cast<int>(fold)) idx.push_back(i);
        }
        if (idx.empty()) continue;
        const std::vector<double> pred = om.models[fold].predict(subset_features(features, idx));
        for (std::size_t t = 0; t < idx.size(); ++t) out[idx[t]] = pred[t];
    }
    return out;
}

}  // namespace detail

/// Evaluates the outcome model at the scenario's counterfactual settings:
/// only the active treatment columns are overwritten, inactive treatments
/// keep their observed values.
inline CounterfactualPredictions counterfactual_predictions(const OutcomeModel& om,
                                                            const ObservationTable& table,
                                                            const ScenarioSpec& scenario) {
    scenario.validate(table.treatment_count());
    FeatureTable base = outcome_features(table);
    CounterfactualPredictions out;
    out.q0_observed = detail::predict_routed(om, base);
    FeatureTable exposed = base;
    FeatureTable control = base;
    for (int a : scenario.active) {
        auto& e = exposed[static_cast<std::size_t>(a - 1)].numeric;
        auto& c = control[static_cast<std::size_t>(a - 1)].numeric;
        std::fill(e.begin(), e.end(), 1.0);
        std::fill(c.begin(), c.end(), 0.0);
    }
    out.q0_exposed = detail::predict_routed(om, exposed);
    out.q0_control = detail::predict_routed(om, control);
    // Units whose observed pattern already matches an arm must agree exactly.
    for (std::size_t i = 0; i < table.n(); ++i) {
        bool all1 = true, all0 = true;
        for (int a : scenario.active) {
            const std::uint8_t v = table.treatments[static_cast<std::size_t>(a - 1)][i];
            all1 = all1 && v == 1;
            all0 = all0 && v == 0;
        }
        if (all1) out.q0_exposed[i] = out.q0_observed[i];
        if (all0) out.q0_control[i] = out.q0_observed[i];
    }
    return out;
}

struct PositivityInfo {
    std::size_t n_eligible = 0;
    std::size_t n_clipped_lo = 0;
    std::size_t n_clipped_hi = 0;
    double fraction_clipped = 0.0;
    bool warning = false;  // more than 5% of eligible units clipped
};

struct PropensityFit {
    std::vector<double> propensity;  // NaN for ineligible units
    PositivityInfo positivity;
    std::vector<FittedModel> models;
};

/// Fits e(X) = P(exposed | X) on eligible units only and clips into the
/// configured positivity bounds. Needs at least 10 units on each side.
inline PropensityFit fit_propensity(const ObservationTable& table,
                                    const ScenarioSpec& scenario,
                                    const ExposureAssignment& exposure,
                                    const EstimationConfig& config) {
    config.validate();
    if (exposure.n_exposed < 10 || exposure.n_control < 10) {
        throw DegenerateScenario("scenario " + scenario.label(table.treatment_names) +
                                 " has too few units for a propensity model (" +
                                 std::to_string(exposure.n_exposed) + " exposed, " +
                                 std::to_string(exposure.n_control) + " control)");
    }
    std::vector<std::size_t> eligible;
    eligible.reserve(table.n());
    for (std::size_t i = 0; i < table.n(); ++i) {
        if (exposure.label[i] != Exposure::ineligible) eligible.push_back(i);
    }
    const FeatureTable all_features = covariate_features(table);
    const FeatureTable features = subset_features(all_features, eligible);
    std::vector<double> target;
    target.reserve(eligible.size());
    for (std::size_t i : eligible) {
        target.push_back(exposure.label[i] == Exposure::exposed ? 1.0 : 0.0);
    }

    PropensityFit out;
    std::vector<double> raw;
    if (config.cross_fit_folds >= 2) {
        CrossFitResult cf = cross_fit(features, target, config.propensity_learner,
                                      config.cross_fit_folds,
                                      seed_key({config.seed, 0x9c0b35ull}));
        raw = std::move(cf.oof);
        out.models = std::move(cf.models);
    } else {
        FittedModel m = fit(features, target, config.propensity_learner);
        raw = m.predict(features);
        out.models.push_back(std::move(m));
    }

    out.propensity.assign(table.n(), std::numeric_limits<double>::quiet_NaN());
    out.positivity.n_eligible = eligible.size();
    for (std::size_t t = 0; t < eligible.size(); ++t) {
        double e = raw[t];
        if (e < config.clip_lo) {
            e = config.clip_lo;
            ++out.positivity.n_clipped_lo;
        } else if (e > config.clip_hi) {
            e = config.clip_hi;
            ++out.positivity.n_clipped_hi;
        }
        out.propensity[eligible[t]] = e;
    }
    out.positivity.fraction_clipped =
        static_cast<double>(out.positivity.n_clipped_lo + out.positivity.n_clipped_hi) /
        static_cast<double>(out.positivity.n_eligible);
    out.positivity.warning = out.positivity.fraction_clipped > 0.05;
    return out;
}

/// Everything the estimators need for one scenario.
struct NuisanceEstimates {
    ScenarioSpec scenario;
    ExposureAssignment exposure;
    std::vector<double> q0_exposed;
    std::vector<double> q0_control;
    std::vector<double> q0_observed;
    std::vector<double> propensity;  // NaN for ineligible units
    double clip_lo = 0.01;
    double clip_hi = 0.99;
    PositivityInfo positivity;
};

struct OutcomeFit {
    OutcomeModel model;
    CounterfactualPredictions q0;
};

inline OutcomeFit fit_outcome_model(const ObservationTable& table, const ScenarioSpec& scenario,
                                    const EstimationConfig& config) {
    OutcomeFit out;
    out.model = fit_outcome(table, config);
    out.q0 = counterfactual_predictions(out.model, table, scenario);
    return out;
}

inline NuisanceEstimates fit_nuisance(const ObservationTable& table,
                                      const ScenarioSpec& scenario,
                                      const EstimationConfig& config) {
    NuisanceEstimates nu;
    nu.scenario = scenario;
    nu.exposure = composite_exposure(table, scenario);
    const OutcomeFit of = fit_outcome_model(table, scenario, config);
    nu.q0_exposed = of.q0.q0_exposed;
    nu.q0_control = of.q0.q0_control;
    nu.q0_observed = of.q0.q0_observed;
    PropensityFit pf = fit_propensity(table, scenario, nu.exposure, config);
    nu.propensity = std::move(pf.propensity);
    nu.positivity = pf.positivity;
    nu.clip_lo = config.clip_lo;
    nu.clip_hi = config.clip_hi;
    return nu;
}

/// Nuisance assembly when an outcome model has already been fitted for the
/// table (the sweep and the benchmark reuse one outcome fit across scenarios).
inline NuisanceEstimates assemble_nuisance(const ObservationTable& table,
                                           const ScenarioSpec& scenario,
                                           const OutcomeModel& outcome_model,
                                           const EstimationConfig& config) {
    NuisanceEstimates nu;
    nu.scenario = scenario;
    nu.exposure = composite_exposure(table, scenario);
    CounterfactualPredictions q0 = counterfactual_predictions(outcome_model, table, scenario);
    nu.q0_exposed = std::move(q0.q0_exposed);
    nu.q0_control = std::move(q0.q0_control);
    nu.q0_observed = std::move(q0.q0_observed);
    PropensityFit pf = fit_propensity(table, scenario, nu.exposure, config);
    nu.propensity = std::move(pf.propensity);
    nu.positivity = pf.positivity;
    nu.clip_lo = config.clip_lo;
    nu.clip_hi = config.clip_hi;
    return nu;
}

}  // namespace walkcause
