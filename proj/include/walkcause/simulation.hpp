#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "walkcause/data.hpp"
#include "walkcause/estimators.hpp"

namespace walkcause {

// ---------------------------------------------------------------------------
// Synthetic data-generating process with a counterfactual truth oracle, and
// the multi-replicate benchmark comparing the estimators against it.
//
// Covariates X_i ~ N(1,1); each treatment is assigned independently with
//   P(T_j = 1) = alpha * sum(X) + beta * expit(X1+X2+X3)/2 + (1-beta)/2,
// and the response is
//   Y = clip(baseline + sum_j T_j + 0.1 * sum_i X_i + eps, 1, 7)
// with eps ~ N(0, noise_sd). Only the first three covariates confound.
// ---------------------------------------------------------------------------

struct SimulationConfig {
    std::size_t n = 5000;
    int covariate_count = 5;
    int treatment_count = 5;
    double beta = 0.5;  // confound ratio in [0,1]
    double alpha_coeff = 1e-5;
    double treatment_effect = 1.0;
    double covariate_effect = 0.1;
    double noise_sd = 0.1;
    double baseline = 1.0;
    LikertScale scale{1, 7};
    bool discretize = false;  // round outcomes to Likert integers
    std::uint64_t seed = 0;

    void validate() const {
        if (n < 1) throw Error("simulation n must be >= 1");
        if (!(beta >= 0.0 && beta <= 1.0)) throw Error("beta must be in [0,1]");
        if (noise_sd < 0.0) throw Error("noise_sd must be >= 0");
        if (covariate_count < 3) throw Error("DGP needs at least 3 covariates");
        if (treatment_count < 1) throw Error("DGP needs at least 1 treatment");
        scale.validate();
    }

    static SimulationConfig from_json(const nlohmann::json& j) {
        SimulationConfig c;
        c.n = j.value("n", c.n);
        c.covariate_count = j.value("covariate_count", c.covariate_count);
        c.treatment_count = j.value("treatment_count", c.treatment_count);
        c.beta = j.value("beta", c.beta);
        c.alpha_coeff = j.value("alpha_coeff", c.alpha_coeff);
        c.treatment_effect = j.value("treatment_effect", c.treatment_effect);
        c.covariate_effect = j.value("covariate_effect", c.covariate_effect);
        c.noise_sd = j.value("noise_sd", c.noise_sd);
        c.baseline = j.value("baseline", c.baseline);
        c.scale.min_value = j.value("scale_min", c.scale.min_value);
        c.scale.max_value = j.value("scale_max", c.scale.max_value);
        c.discretize = j.value("discretize", c.discretize);
        c.seed = j.value("seed", c.seed);
        c.validate();
        return c;
    }

    nlohmann::json to_json() const {
        return {{"n", n},
                {"covariate_count", covariate_count},
                {"treatment_count", treatment_count},
                {"beta", beta},
                {"alpha_coeff", alpha_coeff},
                {"treatment_effect", treatment_effect},
                {"covariate_effect", covariate_effect},
                {"noise_sd", noise_sd},
                {"baseline", baseline},
                {"scale_min", scale.min_value},
                {"scale_max", scale.max_value},
                {"discretize", discretize},
                {"seed", seed}};
    }
};

inline double assignment_probability(const SimulationConfig& config, double covariate_sum,
                                     double confounder_sum) {
    const double p = config.alpha_coeff * covariate_sum +
                     config.beta * expit(confounder_sum) / 2.0 +
                     (1.0 - config.beta) * 0.5;
    return std::min(1.0, std::max(0.0, p));
}

struct SimulatedDataset {
    ObservationTable table;
    std::vector<double> assignment_prob;  // per-unit P(T_j = 1)
    std::vector<double> noise;            // per-unit eps
};

namespace detail {

// Column streams so generation is order-independent: covariates, treatments
// and noise each draw from their own counter sequence.
enum : std::uint64_t { kCovStream = 0x10, kTreatStream = 0x20, kNoiseStream = 0x30 };

inline double clip(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

}  // namespace detail

inline SimulatedDataset generate_dataset(const SimulationConfig& config, std::uint64_t seed) {
    config.validate();
    const std::size_t n = config.n;
    const int p = config.covariate_count;
    const int h = config.treatment_count;

    SimulatedDataset out;
    out.table.scale = config.scale;
    out.table.outcome_name = "Y";

    std::vector<std::vector<double>> x(static_cast<std::size_t>(p));
    for (int c = 0; c < p; ++c) {
        CounterRng rng(seed_key({seed, detail::kCovStream, static_cast<std::uint64_t>(c)}));
        auto& col = x[static_cast<std::size_t>(c)];
        col.resize(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = rng.next_normal(1.0, 1.0);
    }
    out.assignment_prob.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double covariate_sum = 0.0;
        for (int c = 0; c < p; ++c) covariate_sum += x[static_cast<std::size_t>(c)][i];
        const double confounder_sum = x[0][i] + x[1][i] + x[2][i];
        out.assignment_prob[i] = assignment_probability(config, covariate_sum, confounder_sum);
    }

    out.table.treatments.assign(static_cast<std::size_t>(h), std::vector<std::uint8_t>(n, 0));
    for (int j = 0; j < h; ++j) {
        CounterRng rng(seed_key({seed, detail::kTreatStream, static_cast<std::uint64_t>(j)}));
        for (std::size_t i = 0; i < n; ++i) {
            out.table.treatments[static_cast<std::size_t>(j)][i] =
                rng.next_unit() < out.assignment_prob[i] ? 1 : 0;
        }
    }

    CounterRng noise_rng(seed_key({seed, detail::kNoiseStream}));
    out.noise.resize(n);
    out.table.outcome.resize(n);
    const double lo = config.scale.min_value;
    const double hi = config.scale.max_value;
    for (std::size_t i = 0; i < n; ++i) {
        out.noise[i] = noise_rng.next_normal(0.0, config.noise_sd);
        double y = config.baseline + out.noise[i];
        for (int j = 0; j < h; ++j) {
            y += config.treatment_effect * out.table.treatments[static_cast<std::size_t>(j)][i];
        }
        double covariate_sum = 0.0;
        for (int c = 0; c < p; ++c) covariate_sum += x[static_cast<std::size_t>(c)][i];
        y += config.covariate_effect * covariate_sum;
        y = detail::clip(y, lo, hi);
        if (config.discretize) y = detail::clip(std::round(y), lo, hi);
        out.table.outcome[i] = y;
    }

    for (int c = 0; c < p; ++c) {
        CovariateColumn col;
        col.name = "X" + std::to_string(c + 1);
        col.type = CovariateType::numeric;
        col.values = std::move(x[static_cast<std::size_t>(c)]);
        out.table.covariates.push_back(std::move(col));
    }
    for (int j = 0; j < h; ++j) out.table.treatment_names.push_back("T" + std::to_string(j + 1));
    out.table.validate();
    return out;
}

inline DatasetSchema simulation_schema(const SimulationConfig& config) {
    DatasetSchema s;
    for (int c = 0; c < config.covariate_count; ++c) {
        s.covariates.push_back({"X" + std::to_string(c + 1), CovariateType::numeric});
    }
    for (int j = 0; j < config.treatment_count; ++j) {
        s.treatments.push_back("T" + std::to_string(j + 1));
    }
    s.outcome_name = "Y";
    s.outcome_min = config.scale.min_value;
    s.outcome_max = config.scale.max_value;
    return s;
}

struct OracleResult {
    double psi_true = 0.0;
    double mc_se = 0.0;
};

/// Counterfactual Monte Carlo oracle: draws (X, inactive-treatment
/// assignments, eps) and averages Y(active=1) - Y(active=0). Inactive
/// treatments keep their simulated observed assignment in both arms.
inline OracleResult true_cate_mc(const SimulationConfig& config, const ScenarioSpec& scenario,
                                 std::size_t n_oracle, std::uint64_t seed) {
    config.validate();
    scenario.validate(static_cast<std::size_t>(config.treatment_count));
    std::vector<bool> active(static_cast<std::size_t>(config.treatment_count), false);
    for (int a : scenario.active) active[static_cast<std::size_t>(a - 1)] = true;

    CounterRng rng(seed_key({seed, 0x04ac1eull}));
    const double lo = config.scale.min_value;
    const double hi = config.scale.max_value;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < n_oracle; ++i) {
        double covariate_sum = 0.0;
        double confounder_sum = 0.0;
        for (int c = 0; c < config.covariate_count; ++c) {
            const double xv = rng.next_normal(1.0, 1.0);
            covariate_sum += xv;
            if (c < 3) confounder_sum += xv;
        }
        const double prob = assignment_probability(config, covariate_sum, confounder_sum);
        double inactive_dose = 0.0;
        for (int j = 0; j < config.treatment_count; ++j) {
            if (!active[static_cast<std::size_t>(j)] && rng.next_unit() < prob) {
                inactive_dose += config.treatment_effect;
            }
        }
        const double eps = rng.next_normal(0.0, config.noise_sd);
        const double base =
            config.baseline + inactive_dose + config.covariate_effect * covariate_sum + eps;
        const double dose = config.treatment_effect * static_cast<double>(scenario.active.size());
        const double y1 = detail::clip(base + dose, lo, hi);
        const double y0 = detail::clip(base, lo, hi);
        const double d = y1 - y0;
        sum += d;
        sumsq += d * d;
    }
    OracleResult res;
    const double nn = static_cast<double>(n_oracle);
    res.psi_true = sum / nn;
    const double var = std::max(0.0, sumsq / nn - res.psi_true * res.psi_true);
    res.mc_se = std::sqrt(var / nn);
    return res;
}

inline double true_cate(const SimulationConfig& config, const ScenarioSpec& scenario,
                        std::size_t n_oracle = 1000000, std::uint64_t seed = 0) {
    return true_cate_mc(config, scenario, n_oracle, seed).psi_true;
}

inline double percentage_error(double psi_hat, double psi_true) {
    if (psi_true == 0.0) throw ZeroTruth("true effect is zero");
    return (psi_hat - psi_true) / psi_true;
}

// ---------------------------------------------------------------------------
// Benchmark: for each (beta, replicate) a fresh dataset; for each estimator
// and scenario {T1..Tk} the percentage error against the oracle.
// ---------------------------------------------------------------------------

struct BenchmarkConfig {
    SimulationConfig base;
    std::vector<double> betas = {0.15, 0.5, 0.85};
    int replicates = 50;
    std::vector<EstimatorKind> estimators = {EstimatorKind::raw_difference,
                                             EstimatorKind::g_formula, EstimatorKind::iptw,
                                             EstimatorKind::tmle};
    EstimationConfig estimation;
    std::size_t oracle_draws = 1000000;
    std::uint64_t master_seed = 0;
    int workers = 1;
    int max_interventions = 0;  // 0 = all treatments
};

struct BenchmarkRow {
    std::string estimator;
    double beta = 0.0;
    ScenarioSpec scenario;
    int n_interventions = 0;
    int replicate = 0;
    double psi_hat = std::numeric_limits<double>::quiet_NaN();
    double psi_true = std::numeric_limits<double>::quiet_NaN();
    double pct_error = std::numeric_limits<double>::quiet_NaN();
    std::string error;
    bool ok = false;
};

struct BenchmarkAggregate {
    std::string estimator;
    double beta = 0.0;
    int n_interventions = 0;
    double mean_error = 0.0;
    double sd_error = 0.0;
    double band_lo = 0.0;
    double band_hi = 0.0;
    int n_ok = 0;
};

struct BenchmarkReport {
    std::vector<BenchmarkRow> rows;
    std::vector<BenchmarkAggregate> aggregates;

    bool any_errors() const {
        return std::any_of(rows.begin(), rows.end(),
                           [](const BenchmarkRow& r) { return !r.ok; });
    }
};

namespace detail {

inline std::uint64_t beta_key(double beta) {
    return static_cast<std::uint64_t>(std::llround(beta * 1e6));
}

}  // namespace detail

inline BenchmarkReport run_benchmark(const BenchmarkConfig& config) {
    config.base.validate();
    config.estimation.validate();
    const int k_max = config.max_interventions > 0
                          ? std::min(config.max_interventions, config.base.treatment_count)
                          : config.base.treatment_count;

    // Oracle truths per (beta, #interventions), shared across replicates.
    std::map<std::pair<std::uint64_t, int>, double> truth;
    for (double beta : config.betas) {
        SimulationConfig cfg = config.base;
        cfg.beta = beta;
        for (int k = 1; k <= k_max; ++k) {
            ScenarioSpec scenario;
            for (int a = 1; a <= k; ++a) scenario.active.push_back(a);
            const std::uint64_t oracle_seed =
                seed_key({config.master_seed, 0x04ac1e5ull, detail::beta_key(beta),
                          static_cast<std::uint64_t>(k)});
            truth[{detail::beta_key(beta), k}] =
                true_cate(cfg, scenario, config.oracle_draws, oracle_seed);
        }
    }

    struct Task {
        double beta;
        int replicate;
    };
    std::vector<Task> tasks;
    for (double beta : config.betas) {
        for (int r = 0; r < config.replicates; ++r) tasks.push_back({beta, r});
    }

    std::vector<std::vector<BenchmarkRow>> slots(tasks.size());
    parallel_for(tasks.size(), config.workers, [&](std::size_t t) {
        const Task& task = tasks[t];
        SimulationConfig cfg = config.base;
        cfg.beta = task.beta;
        const std::uint64_t data_seed =
            seed_key({config.master_seed, detail::beta_key(task.beta),
                      static_cast<std::uint64_t>(task.replicate)});
        const SimulatedDataset data = generate_dataset(cfg, data_seed);

        EstimationConfig est = config.estimation;
        est.seed = seed_key({data_seed, 0xe57ull});

        const bool needs_outcome = std::any_of(
            config.estimators.begin(), config.estimators.end(), [](EstimatorKind k) {
                return k == EstimatorKind::g_formula || k == EstimatorKind::tmle;
            });
        const bool needs_propensity = std::any_of(
            config.estimators.begin(), config.estimators.end(), [](EstimatorKind k) {
                return k == EstimatorKind::iptw || k == EstimatorKind::psm ||
                       k == EstimatorKind::tmle;
            });

        OutcomeModel outcome_model;
        std::string outcome_error;
        if (needs_outcome) {
            try {
                outcome_model = fit_outcome(data.table, est);
            } catch (const Error& e) {
                outcome_error = e.what();
            }
        }

        for (int k = 1; k <= k_max; ++k) {
            ScenarioSpec scenario;
            for (int a = 1; a <= k; ++a) scenario.active.push_back(a);
            const double psi_true = truth.at({detail::beta_key(task.beta), k});

            ExposureAssignment exposure;
            std::string exposure_error;
            try {
                exposure = composite_exposure(data.table, scenario);
            } catch (const Error& e) {
                exposure_error = e.what();
            }

            NuisanceEstimates nuisance;
            std::string propensity_error;
            if (exposure_error.empty()) {
                nuisance.scenario = scenario;
                nuisance.exposure = exposure;
                nuisance.clip_lo = est.clip_lo;
                nuisance.clip_hi = est.clip_hi;
                if (needs_outcome && outcome_error.empty()) {
                    CounterfactualPredictions q0 =
                        counterfactual_predictions(outcome_model, data.table, scenario);
                    nuisance.q0_exposed = std::move(q0.q0_exposed);
                    nuisance.q0_control = std::move(q0.q0_control);
                    nuisance.q0_observed = std::move(q0.q0_observed);
                }
                if (needs_propensity) {
                    try {
                        PropensityFit pf =
                            fit_propensity(data.table, scenario, exposure, est);
                        nuisance.propensity = std::move(pf.propensity);
                        nuisance.positivity = pf.positivity;
                    } catch (const Error& e) {
                        propensity_error = e.what();
                    }
                }
            }

            for (EstimatorKind kind : config.estimators) {
                BenchmarkRow row;
                row.estimator = estimator_name(kind);
                row.beta = task.beta;
                row.scenario = scenario;
                row.n_interventions = k;
                row.replicate = task.replicate;
                row.psi_true = psi_true;
                try {
                    if (!exposure_error.empty()) throw Error(exposure_error);
                    CateEstimate est_row;
                    switch (kind) {
                        case EstimatorKind::raw_difference:
                            est_row = raw_difference(data.table, scenario, exposure);
                            break;
                        case EstimatorKind::g_formula: {
                            if (!outcome_error.empty()) throw Error(outcome_error);
                            GFormulaOptions go;
                            go.with_se = false;
                            est_row = g_formula(data.table, scenario, nuisance, est, go);
                            break;
                        }
                        case EstimatorKind::iptw:
                            if (!propensity_error.empty()) throw Error(propensity_error);
                            est_row = iptw(data.table, scenario, nuisance, false);
                            break;
                        case EstimatorKind::psm: {
                            if (!propensity_error.empty()) throw Error(propensity_error);
                            PsmOptions po;
                            po.with_se = false;
                            po.seed = data_seed;
                            est_row = psm(data.table, scenario, nuisance, po);
                            break;
                        }
                        case EstimatorKind::tmle: {
                            if (!outcome_error.empty()) throw Error(outcome_error);
                            if (!propensity_error.empty()) throw Error(propensity_error);
                            TmleOptions to;
                            to.with_se = false;
                            est_row = tmle(data.table, scenario, nuisance, to);
                            break;
                        }
                    }
                    row.psi_hat = est_row.psi_likert;
                    row.pct_error = percentage_error(row.psi_hat, row.psi_true);
                    row.ok = true;
                } catch (const Error& e) {
                    row.error = e.what();
                }
                slots[t].push_back(std::move(row));
            }
        }
    });

    BenchmarkReport report;
    for (auto& rows : slots) {
        for (auto& r : rows) report.rows.push_back(std::move(r));
    }

    // Aggregation: mean +/- 1.96 sd/sqrt(R) per (estimator, beta, k).
    for (EstimatorKind kind : config.estimators) {
        const std::string name = estimator_name(kind);
        for (double beta : config.betas) {
            for (int k = 1; k <= k_max; ++k) {
                std::vector<double> errors;
                for (const BenchmarkRow& r : report.rows) {
                    if (r.ok && r.estimator == name && r.n_interventions == k &&
                        detail::beta_key(r.beta) == detail::beta_key(beta)) {
                        errors.push_back(r.pct_error);
                    }
                }
                if (errors.empty()) continue;
                BenchmarkAggregate agg;
                agg.estimator = name;
                agg.beta = beta;
                agg.n_interventions = k;
                agg.mean_error = mean(errors);
                agg.sd_error = sample_sd(errors);
                const double half =
                    1.96 * agg.sd_error / std::sqrt(static_cast<double>(errors.size()));
                agg.band_lo = agg.mean_error - half;
                agg.band_hi = agg.mean_error + half;
                agg.n_ok = static_cast<int>(errors.size());
                report.aggregates.push_back(std::move(agg));
            }
        }
    }
    return report;
}

inline std::string benchmark_to_csv(const BenchmarkReport& report) {
    CsvWriter w;
    w.row({"estimator", "beta", "scenario", "n_interventions", "replicate", "psi_hat",
           "psi_true", "percentage_error", "error"});
    auto num = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
    for (const BenchmarkRow& r : report.rows) {
        std::string scenario;
        for (std::size_t a = 0; a < r.scenario.active.size(); ++a) {
            if (a) scenario += "+";
            scenario += "T" + std::to_string(r.scenario.active[a]);
        }
        w.row({r.estimator, format_double(r.beta), scenario,
               std::to_string(r.n_interventions), std::to_string(r.replicate), num(r.psi_hat),
               num(r.psi_true), num(r.pct_error), r.error});
    }
    return w.str();
}

inline std::string benchmark_summary_csv(const BenchmarkReport& report) {
    CsvWriter w;
    w.row({"estimator", "beta", "n_interventions", "mean_error", "sd_error", "band_lo",
           "band_hi", "n_ok"});
    for (const BenchmarkAggregate& a : report.aggregates) {
        w.row({a.estimator, format_double(a.beta), std::to_string(a.n_interventions),
               format_double(a.mean_error), format_double(a.sd_error),
               format_double(a.band_lo), format_double(a.band_hi), std::to_string(a.n_ok)});
    }
    return w.str();
}

}  // namespace walkcause
