#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "walkcause/estimators.hpp"
#include "walkcause/simulation.hpp"

using namespace walkcause;

namespace {

NuisanceEstimates manual_nuisance(const ObservationTable& table, const ScenarioSpec& scenario,
                                  double propensity_value) {
    NuisanceEstimates nu;
    nu.scenario = scenario;
    nu.exposure = composite_exposure(table, scenario);
    nu.propensity.assign(table.n(), propensity_value);
    for (std::size_t i = 0; i < table.n(); ++i) {
        if (nu.exposure.label[i] == Exposure::ineligible) {
            nu.propensity[i] = std::numeric_limits<double>::quiet_NaN();
        }
    }
    nu.q0_exposed.assign(table.n(), 0.5);
    nu.q0_control.assign(table.n(), 0.5);
    nu.q0_observed.assign(table.n(), 0.5);
    return nu;
}

}  // namespace

TEST_CASE("raw difference arithmetic") {
    // exposed outcomes {6,6}, control {3,3}
    auto table = test_util::make_table({{1, 1, 0, 0}}, {6, 6, 3, 3});
    const CateEstimate e = raw_difference(table, ScenarioSpec{{1}});
    CHECK(e.psi_likert == 3.0);
    CHECK(e.psi_star == doctest::Approx(3.0 / 7.0));
    CHECK(e.psi_percent == doctest::Approx(50.0));
    CHECK(e.n_exposed == 2);
    CHECK(e.n_control == 2);

    auto sym = test_util::make_table({{1, 1, 0, 0}}, {4, 6, 4, 6});
    CHECK(raw_difference(sym, ScenarioSpec{{1}}).psi_likert == 0.0);
}

TEST_CASE("raw difference pooled standard error") {
    // exposed {5,7}, control {2,4}: s2 pooled = (2+2)/2 = 2, se = sqrt(2*(1/2+1/2)) = sqrt(2)
    auto table = test_util::make_table({{1, 1, 0, 0}}, {5, 7, 2, 4});
    const CateEstimate e = raw_difference(table, ScenarioSpec{{1}});
    const double se_likert = std::sqrt(2.0);
    CHECK(e.se_percent == doctest::Approx(100.0 * se_likert / 6.0));
    CHECK(e.ci_lo == doctest::Approx(e.psi_percent - 1.96 * e.se_percent));
    CHECK(e.significant == (e.ci_lo > 0.0 || e.ci_hi < 0.0));
}

TEST_CASE("estimate scale relations hold by construction") {
    auto table = test_util::make_table({{1, 1, 0, 0}}, {6, 6, 3, 3});
    const CateEstimate e = raw_difference(table, ScenarioSpec{{1}});
    CHECK(e.psi_likert == e.psi_star * 7);
    CHECK(e.psi_percent == doctest::Approx(100.0 * e.psi_likert / 6.0));
}

TEST_CASE("g-formula plug-in mean and the worked example") {
    // q0_exposed = 0.6, q0_control = 0.4 everywhere -> psi_star 0.2,
    // psi_likert 1.4, psi_percent 23.33
    auto table = test_util::make_table({{1, 1, 0, 0}}, {6, 6, 3, 3});
    NuisanceEstimates nu = manual_nuisance(table, ScenarioSpec{{1}}, 0.5);
    nu.q0_exposed.assign(4, 0.6);
    nu.q0_control.assign(4, 0.4);
    EstimationConfig config;
    GFormulaOptions opts;
    opts.with_se = false;
    const CateEstimate e = g_formula(table, ScenarioSpec{{1}}, nu, config, opts);
    CHECK(e.psi_star == doctest::Approx(0.2));
    CHECK(e.psi_likert == doctest::Approx(1.4));
    CHECK(e.psi_percent == doctest::Approx(100.0 * 1.4 / 6.0));
}

TEST_CASE("g-formula equals raw difference on a saturated deterministic table") {
    // Y depends deterministically on T4 only; a logistic fit on the full table
    // is saturated, so the plug-in equals the group-mean contrast.
    CounterRng rng(3);
    const std::size_t n = 200;
    std::vector<std::vector<std::uint8_t>> cols(5, std::vector<std::uint8_t>(n));
    std::vector<double> outcome(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < 5; ++j) cols[j][i] = rng.next_unit() < 0.5 ? 1 : 0;
        outcome[i] = cols[3][i] ? 6.0 : 3.0;
    }
    auto table = test_util::make_table(cols, outcome);
    EstimationConfig config;
    config.outcome_learner.kind = LearnerKind::linear_logistic;
    config.cross_fit_folds = 0;
    const ScenarioSpec scenario{{4}};
    const NuisanceEstimates nu = [&] {
        NuisanceEstimates out = manual_nuisance(table, scenario, 0.5);
        const OutcomeFit fit = fit_outcome_model(table, scenario, config);
        out.q0_exposed = fit.q0.q0_exposed;
        out.q0_control = fit.q0.q0_control;
        out.q0_observed = fit.q0.q0_observed;
        return out;
    }();
    GFormulaOptions opts;
    opts.with_se = false;
    const CateEstimate gf = g_formula(table, scenario, nu, config, opts);
    const CateEstimate raw = raw_difference(table, scenario);
    CHECK(gf.psi_likert == doctest::Approx(raw.psi_likert).epsilon(5e-3));
}

TEST_CASE("g-formula bootstrap standard error is positive and stable") {
    SimulationConfig cfg;
    cfg.n = 300;
    const auto data = generate_dataset(cfg, 17);
    EstimationConfig config;
    config.outcome_learner.kind = LearnerKind::linear_logistic;
    config.cross_fit_folds = 0;
    const ScenarioSpec scenario{{1}};
    const NuisanceEstimates nu = fit_nuisance(data.table, scenario, config);
    GFormulaOptions opts;
    opts.bootstrap_b = 60;
    opts.seed = 5;
    const CateEstimate e1 = g_formula(data.table, scenario, nu, config, opts);
    const CateEstimate e2 = g_formula(data.table, scenario, nu, config, opts);
    CHECK(e1.se_percent > 0.0);
    CHECK(e1.se_percent == e2.se_percent);  // seeded resampling
}

TEST_CASE("iptw hand-computed weighted means") {
    // exposed: (Y=7, e=0.7), (Y=5, e=0.35); controls (Y=1, e=0.5) twice.
    // exposed weighted mean = (7/0.7 + 5/0.35) / (1/0.7 + 1/0.35) = 17/3.
    auto table = test_util::make_table({{1, 1, 0, 0}}, {7, 5, 1, 1});
    NuisanceEstimates nu = manual_nuisance(table, ScenarioSpec{{1}}, 0.5);
    nu.propensity = {0.7, 0.35, 0.5, 0.5};
    const CateEstimate e = iptw(table, ScenarioSpec{{1}}, nu, false);
    CHECK(e.psi_likert + 1.0 == doctest::Approx(17.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("iptw equals raw difference exactly under constant propensity") {
    CounterRng rng(9);
    const std::size_t n = 64;
    std::vector<std::uint8_t> t(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = i % 2;  // exactly half exposed so the sample rate is 0.5
        y[i] = 1.0 + static_cast<double>(rng.next_below(7));
    }
    auto table = test_util::make_table({t}, y);
    const NuisanceEstimates nu = manual_nuisance(table, ScenarioSpec{{1}}, 0.5);
    const CateEstimate via_iptw = iptw(table, ScenarioSpec{{1}}, nu, true);
    const CateEstimate via_raw = raw_difference(table, ScenarioSpec{{1}});
    CHECK(via_iptw.psi_likert == via_raw.psi_likert);
    CHECK(via_iptw.psi_star == via_raw.psi_star);
    CHECK(std::isfinite(via_iptw.se_percent));
}

TEST_CASE("tmle targeted update formula") {
    // Q0=0.5, e=0.25, exposed, y*=0.8: factor (1-0.25)/(0.25*0.75) = 4,
    // Q* = 0.5 + 4*0.3 = 1.7 (the linear update may leave [0,1])
    CHECK(tmle_fluctuation(0.5, 0.25, true, 0.8) == doctest::Approx(1.7).epsilon(1e-12));
    CHECK(tmle_fluctuation(0.5, 0.25, false, 0.8) ==
          doctest::Approx(0.5 - (0.3 / 0.75)).epsilon(1e-12));
}

TEST_CASE("tmle reduces to g-formula exactly when residuals vanish") {
    SimulationConfig cfg;
    cfg.n = 250;
    const auto data = generate_dataset(cfg, 23);
    const ScenarioSpec scenario{{1}};
    NuisanceEstimates nu = manual_nuisance(data.table, scenario, 0.375);
    CounterRng rng(2);
    for (std::size_t i = 0; i < data.table.n(); ++i) {
        nu.q0_exposed[i] = rng.next_unit();
        nu.q0_control[i] = rng.next_unit();
        nu.q0_observed[i] = to_probability_scale(data.table.outcome[i], data.table.scale);
    }
    EstimationConfig config;
    GFormulaOptions gopts;
    gopts.with_se = false;
    const CateEstimate gf = g_formula(data.table, scenario, nu, config, gopts);
    TmleOptions topts;
    topts.with_se = true;
    const CateEstimate tm = tmle(data.table, scenario, nu, topts);
    CHECK(tm.psi_star == gf.psi_star);  // bitwise: corrections are exactly zero
    CHECK(tm.psi_likert == gf.psi_likert);
}

TEST_CASE("sign flip: relabeling exposed and control negates the estimate exactly") {
    CounterRng rng(31);
    const std::size_t n = 80;
    std::vector<std::uint8_t> t(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = rng.next_unit() < 0.5 ? 1 : 0;
        y[i] = 1.0 + static_cast<double>(rng.next_below(7));
    }
    if (std::count(t.begin(), t.end(), 1) == 0) t[0] = 1;
    if (std::count(t.begin(), t.end(), 0) == 0) t[1] = 0;
    auto table = test_util::make_table({t}, y);
    std::vector<std::uint8_t> flipped(n);
    for (std::size_t i = 0; i < n; ++i) flipped[i] = 1 - t[i];
    auto table_flipped = test_util::make_table({flipped}, y);

    // dyadic propensities so 1-e is exact
    NuisanceEstimates nu = manual_nuisance(table, ScenarioSpec{{1}}, 0.5);
    NuisanceEstimates nu_f = manual_nuisance(table_flipped, ScenarioSpec{{1}}, 0.5);
    CounterRng prng(7);
    for (std::size_t i = 0; i < n; ++i) {
        const double e = (1.0 + static_cast<double>(prng.next_below(7))) / 8.0;  // k/8
        nu.propensity[i] = e;
        nu_f.propensity[i] = 1.0 - e;
        const double q1 = prng.next_unit(), q0 = prng.next_unit();
        nu.q0_exposed[i] = q1;
        nu.q0_control[i] = q0;
        nu_f.q0_exposed[i] = q0;
        nu_f.q0_control[i] = q1;
        const double qobs = prng.next_unit();
        nu.q0_observed[i] = qobs;
        nu_f.q0_observed[i] = qobs;
    }
    EstimationConfig config;
    GFormulaOptions gopts;
    gopts.with_se = false;

    CHECK(raw_difference(table_flipped, ScenarioSpec{{1}}).psi_likert ==
          -raw_difference(table, ScenarioSpec{{1}}).psi_likert);
    CHECK(g_formula(table_flipped, ScenarioSpec{{1}}, nu_f, config, gopts).psi_star ==
          -g_formula(table, ScenarioSpec{{1}}, nu, config, gopts).psi_star);
    CHECK(iptw(table_flipped, ScenarioSpec{{1}}, nu_f, false).psi_likert ==
          -iptw(table, ScenarioSpec{{1}}, nu, false).psi_likert);
    TmleOptions topts;
    topts.with_se = false;
    CHECK(tmle(table_flipped, ScenarioSpec{{1}}, nu_f, topts).psi_star ==
          -tmle(table, ScenarioSpec{{1}}, nu, topts).psi_star);
}

TEST_CASE("psm nearest-neighbor mechanics") {
    SUBCASE("matches the closest control") {
        // exposed (e=0.30, Y=6); controls (e=0.31, Y=4) and (e=0.90, Y=7)
        auto table = test_util::make_table({{1, 0, 0}}, {6, 4, 7});
        NuisanceEstimates nu = manual_nuisance(table, ScenarioSpec{{1}}, 0.5);
        nu.propensity = {0.30, 0.31, 0.90};
        PsmOptions opts;
        opts.with_se = false;
        const CateEstimate e = psm(table, ScenarioSpec{{1}}, nu, opts);
        CHECK(e.psi_likert == doctest::Approx(2.0));
        CHECK(e.n_dropped == 0);
    }
    SUBCASE("caliper violation raises NoMatches") {
        auto table = test_util::make_table({{1, 0}}, {6, 4});
        NuisanceEstimates nu = manual_nuisance(table, ScenarioSpec{{1}}, 0.5);
        nu.propensity = {0.30, 0.31};
        PsmOptions opts;
        opts.with_se = false;
        opts.caliper = 0.001;
        CHECK_THROWS_AS(psm(table, ScenarioSpec{{1}}, nu, opts), NoMatches);
    }
    SUBCASE("distance ties break toward the lowest unit index") {
        // exposed at e=0.5; controls at 0.25 (index 1) and 0.75 (index 2)
        auto table = test_util::make_table({{1, 0, 0}}, {6, 4, 2});
        NuisanceEstimates nu = manual_nuisance(table, ScenarioSpec{{1}}, 0.5);
        nu.propensity = {0.5, 0.25, 0.75};
        PsmOptions opts;
        opts.with_se = false;
        opts.caliper = 0.5;
        const CateEstimate e = psm(table, ScenarioSpec{{1}}, nu, opts);
        CHECK(e.psi_likert == doctest::Approx(2.0));  // matched Y=4, not Y=2
    }
    SUBCASE("without replacement consumes controls") {
        auto table = test_util::make_table({{1, 1, 0}}, {6, 6, 4});
        NuisanceEstimates nu = manual_nuisance(table, ScenarioSpec{{1}}, 0.5);
        nu.propensity = {0.5, 0.5, 0.5};
        PsmOptions opts;
        opts.with_se = false;
        opts.replacement = false;
        const CateEstimate e = psm(table, ScenarioSpec{{1}}, nu, opts);
        CHECK(e.psi_likert == doctest::Approx(2.0));
        CHECK(e.n_dropped == 1);  // second exposed unit finds no unused control
    }
}

TEST_CASE("psm is centered near zero under a null effect") {
    SimulationConfig cfg;
    cfg.n = 2000;
    cfg.beta = 0.5;
    cfg.treatment_effect = 0.0;
    cfg.baseline = 4.0;
    double total = 0.0;
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        const auto data = generate_dataset(cfg, seed);
        EstimationConfig config;
        config.outcome_learner.kind = LearnerKind::linear_logistic;
        config.propensity_learner.kind = LearnerKind::linear_logistic;
        config.cross_fit_folds = 0;
        const NuisanceEstimates nu = fit_nuisance(data.table, ScenarioSpec{{1}}, config);
        PsmOptions opts;
        opts.with_se = false;
        total += psm(data.table, ScenarioSpec{{1}}, nu, opts).psi_likert;
    }
    CHECK(std::abs(total / 4.0) < 0.05);
}

TEST_CASE("interaction decomposition identity") {
    SUBCASE("worked cell example") {
        const std::vector<double> c11{1.0}, c10{0.6}, c01{0.5}, c00{0.0};
        CHECK(interaction_decomposition_check(c11, c10, c01, c00) == 0.0);
        // lhs = (0.5+0.6)+(0.4+0.5) = 2.0 = 2*(1.0-0.0)
    }
    SUBCASE("random prediction tables satisfy it to 1e-12") {
        CounterRng rng(12);
        for (int rep = 0; rep < 1000; ++rep) {
            std::vector<double> c11(5), c10(5), c01(5), c00(5);
            for (int i = 0; i < 5; ++i) {
                c11[i] = rng.next_unit();
                c10[i] = rng.next_unit();
                c01[i] = rng.next_unit();
                c00[i] = rng.next_unit();
            }
            CHECK(interaction_decomposition_check(c11, c10, c01, c00) <= 1e-12);
        }
    }
    SUBCASE("additive predictions have equal conditional contrasts") {
        // dyadic cell values keep the float algebra exact
        CounterRng rng(4);
        for (int rep = 0; rep < 50; ++rep) {
            const double a = static_cast<double>(rng.next_below(64)) / 128.0;
            const double b = static_cast<double>(rng.next_below(64)) / 128.0;
            // psi^A given B=1 equals psi^A given B=0 exactly
            CHECK((a + b) - b == a);
            const std::vector<double> c11{a + b}, c10{a}, c01{b}, c00{0.0};
            CHECK(interaction_decomposition_check(c11, c10, c01, c00) == 0.0);
        }
    }
}

TEST_CASE("scenario sweep emits every scenario per estimator and captures errors in-row") {
    SimulationConfig cfg;
    cfg.n = 700;
    cfg.beta = 0.3;
    auto data = generate_dataset(cfg, 41);
    // make T5 constant: all scenarios containing it become degenerate
    std::fill(data.table.treatments[4].begin(), data.table.treatments[4].end(), 0);
    EstimationConfig config;
    config.outcome_learner.kind = LearnerKind::linear_logistic;
    config.propensity_learner.kind = LearnerKind::linear_logistic;
    config.cross_fit_folds = 0;
    SweepOptions opts;
    opts.estimators = {EstimatorKind::raw_difference, EstimatorKind::g_formula,
                       EstimatorKind::tmle};
    opts.with_se = false;
    opts.workers = 2;
    const SweepResult result = scenario_sweep(data.table, config, opts);
    CHECK(result.rows.size() == 31 * 3);
    int failed = 0, ok = 0;
    for (const auto& r : result.rows) {
        const bool contains_t5 = std::find(r.scenario.active.begin(), r.scenario.active.end(),
                                           5) != r.scenario.active.end();
        if (contains_t5) {
            CHECK_FALSE(r.ok);
            ++failed;
        } else {
            CHECK(r.ok);
            ++ok;
        }
    }
    CHECK(failed == 16 * 3);
    CHECK(ok == 15 * 3);
    CHECK(result.any_errors());
    // row ordering: scenario-major, 1-based ids
    CHECK(result.rows.front().scenario_id == 1);
    CHECK(result.rows.back().scenario_id == 31);
}

TEST_CASE("sweep dominance: the active treatment with the real effect wins") {
    CounterRng rng(15);
    const std::size_t n = 900;
    std::vector<std::vector<std::uint8_t>> cols(5, std::vector<std::uint8_t>(n));
    std::vector<double> outcome(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < 5; ++j) cols[j][i] = rng.next_unit() < 0.5 ? 1 : 0;
        outcome[i] = cols[3][i] ? 6.0 : 3.0;  // OS-like: treatment 4 drives everything
    }
    auto table = test_util::make_table(cols, outcome);
    EstimationConfig config;
    config.outcome_learner.kind = LearnerKind::linear_logistic;
    config.cross_fit_folds = 0;
    SweepOptions opts;
    opts.estimators = {EstimatorKind::raw_difference};
    opts.with_se = false;
    const SweepResult result = scenario_sweep(table, config, opts);
    double best = -1e9;
    int best_id = 0;
    for (const auto& r : result.rows) {
        if (r.scenario.active.size() != 1 || !r.ok) continue;
        if (r.estimate.psi_percent > best) {
            best = r.estimate.psi_percent;
            best_id = r.scenario.active[0];
        }
    }
    CHECK(best_id == 4);
}

TEST_CASE("sweep aggregation groups by treatment and intervention count") {
    SimulationConfig cfg;
    cfg.n = 800;
    cfg.beta = 0.0;
    const auto data = generate_dataset(cfg, 2);
    EstimationConfig config;
    config.outcome_learner.kind = LearnerKind::linear_logistic;
    config.propensity_learner.kind = LearnerKind::linear_logistic;
    config.cross_fit_folds = 0;
    SweepOptions opts;
    opts.estimators = {EstimatorKind::raw_difference};
    opts.with_se = true;
    opts.bootstrap_b = 10;
    const SweepResult result = scenario_sweep(data.table, config, opts);
    // treatment 1, size 2: scenarios {1,2},{1,3},{1,4},{1,5}
    for (const auto& agg : result.aggregation) {
        if (agg.treatment == "T1" && agg.n_interventions == 2) {
            CHECK(agg.n_scenarios == 4);
        }
        if (agg.n_interventions == 5) CHECK(agg.n_scenarios == 1);
    }
    const std::string csv = results_to_csv(result, data.table.treatment_names);
    CHECK(csv.find("scenario_id,active_treatments,estimator,psi_percent") == 0);
    const std::string agg_csv = effect_by_count_csv(result);
    CHECK(agg_csv.find("estimator,treatment,n_interventions") == 0);
}

TEST_CASE("logistic fluctuation keeps targeted predictions inside the unit interval") {
    SimulationConfig cfg;
    cfg.n = 1200;
    cfg.beta = 0.85;
    const auto data = generate_dataset(cfg, 77);
    EstimationConfig config;
    config.outcome_learner.kind = LearnerKind::linear_logistic;
    config.propensity_learner.kind = LearnerKind::linear_logistic;
    config.cross_fit_folds = 0;
    const ScenarioSpec scenario{{1}};
    const NuisanceEstimates nu = fit_nuisance(data.table, scenario, config);
    TmleOptions linear_opts;
    const CateEstimate t_lin = tmle(data.table, scenario, nu, linear_opts);
    TmleOptions logistic_opts;
    logistic_opts.logistic_fluctuation = true;
    const CateEstimate t_log = tmle(data.table, scenario, nu, logistic_opts);
    // both modes agree to first order on well-behaved data
    CHECK(t_log.psi_likert == doctest::Approx(t_lin.psi_likert).epsilon(0.05));
    CHECK(std::isfinite(t_log.se_percent));
}

TEST_CASE("all five estimators agree under randomization") {
    SimulationConfig cfg;
    cfg.n = 5000;
    cfg.beta = 0.0;
    const auto data = generate_dataset(cfg, 61);
    EstimationConfig config;
    config.outcome_learner.kind = LearnerKind::linear_logistic;
    config.propensity_learner.kind = LearnerKind::linear_logistic;
    config.cross_fit_folds = 0;
    const ScenarioSpec scenario{{1}};
    const NuisanceEstimates nu = fit_nuisance(data.table, scenario, config);
    GFormulaOptions gopts;
    gopts.with_se = false;
    PsmOptions popts;
    popts.with_se = false;
    TmleOptions topts;
    topts.with_se = false;
    const CateEstimate raw = raw_difference(data.table, scenario);
    const std::vector<double> psi = {
        raw.psi_percent,
        g_formula(data.table, scenario, nu, config, gopts).psi_percent,
        iptw(data.table, scenario, nu, false).psi_percent,
        psm(data.table, scenario, nu, popts).psi_percent,
        tmle(data.table, scenario, nu, topts).psi_percent,
    };
    const double band = 3.0 * raw.se_percent;
    for (double a : psi) {
        for (double b : psi) CHECK(std::abs(a - b) <= band);
    }
}

TEST_CASE("double robustness holds at moderate confounding") {
    SimulationConfig cfg;
    cfg.beta = 0.5;
    cfg.n = 5000;
    const ScenarioSpec scenario{{1}};
    const double truth = true_cate(cfg, scenario, 500000, seed_key({4, 0x02acull}));
    double case_a = 0.0, case_b = 0.0;
    const int reps = 8;
    for (int r = 0; r < reps; ++r) {
        const auto data =
            generate_dataset(cfg, seed_key({4, 0xd0b0ull, static_cast<std::uint64_t>(r)}));
        EstimationConfig ea;
        ea.cross_fit_folds = 0;
        ea.seed = static_cast<std::uint64_t>(r);
        ea.outcome_learner.kind = LearnerKind::intercept_only;
        ea.propensity_learner.kind = LearnerKind::linear_logistic;
        const NuisanceEstimates na = fit_nuisance(data.table, scenario, ea);
        TmleOptions topts;
        topts.with_se = false;
        case_a += std::abs(percentage_error(tmle(data.table, scenario, na, topts).psi_likert,
                                            truth)) /
                  reps;
        EstimationConfig eb = ea;
        eb.outcome_learner.kind = LearnerKind::linear_logistic;
        eb.propensity_learner.kind = LearnerKind::intercept_only;
        const NuisanceEstimates nb = fit_nuisance(data.table, scenario, eb);
        case_b += std::abs(percentage_error(tmle(data.table, scenario, nb, topts).psi_likert,
                                            truth)) /
                  reps;
    }
    CHECK(case_a <= 0.05);
    CHECK(case_b <= 0.05);
}
