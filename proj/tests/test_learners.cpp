#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "walkcause/learners.hpp"
#include "walkcause/nuisance.hpp"
#include "walkcause/simulation.hpp"

using namespace walkcause;

namespace {

FeatureTable numeric_features(const std::vector<std::vector<double>>& cols) {
    FeatureTable f;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        FeatureColumn c;
        c.name = "f" + std::to_string(j);
        c.numeric = cols[j];
        f.push_back(std::move(c));
    }
    return f;
}

// Seeded random regression task with a categorical feature.
struct CatTask {
    FeatureTable features;
    std::vector<double> target;
};

CatTask make_cat_task(std::size_t n, std::uint64_t seed,
                      const std::vector<std::string>& levels) {
    CatTask t;
    CounterRng rng(seed);
    FeatureColumn xnum;
    xnum.name = "x";
    FeatureColumn xcat;
    xcat.name = "c";
    xcat.categorical = true;
    xcat.levels = levels;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.next_normal();
        const auto code = static_cast<std::int32_t>(rng.next_below(levels.size()));
        xnum.numeric.push_back(x);
        xcat.codes.push_back(code);
        const double p = expit(0.8 * x + 0.5 * (code == 0 ? 1.0 : -1.0));
        t.target.push_back(rng.next_unit() < p ? 1.0 : 0.0);
    }
    t.features = {xnum, xcat};
    return t;
}

}  // namespace

TEST_CASE("intercept_only predicts the target mean exactly") {
    std::vector<double> target;
    std::vector<double> x;
    for (int i = 0; i < 10; ++i) {
        target.push_back(i % 2 == 0 ? 0.2 : 0.4);
        x.push_back(i);
    }
    LearnerSpec spec;
    spec.kind = LearnerKind::intercept_only;
    const FittedModel m = fit(numeric_features({x}), target, spec);
    const auto pred = m.predict(numeric_features({x}));
    for (double p : pred) CHECK(p == mean(target));
    CHECK(pred[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK_FALSE(m.degenerate_target);
}

TEST_CASE("constant target degrades to a flagged intercept fit") {
    std::vector<double> target(20, 0.6), x(20, 1.0);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
    LearnerSpec spec;
    spec.kind = LearnerKind::gbtree;
    const FittedModel m = fit(numeric_features({x}), target, spec);
    CHECK(m.kind == LearnerKind::intercept_only);
    CHECK(m.degenerate_target);
    CHECK(m.predict(numeric_features({x}))[0] == mean(target));
    CHECK(m.predict(numeric_features({x}))[0] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("too few rows") {
    std::vector<double> target{0.1, 0.9, 0.4, 0.6, 0.5};
    std::vector<double> x{1, 2, 3, 4, 5};
    LearnerSpec lin;
    lin.kind = LearnerKind::linear_logistic;
    CHECK_THROWS_AS(fit(numeric_features({x}), target, lin), TooFewRows);
    LearnerSpec gb;
    gb.kind = LearnerKind::gbtree;
    CHECK_THROWS_AS(fit(numeric_features({x}), target, gb), TooFewRows);
    LearnerSpec ic;
    ic.kind = LearnerKind::intercept_only;
    CHECK(fit(numeric_features({x}), target, ic).predict(numeric_features({x}))[0] ==
          doctest::Approx(0.5));
}

TEST_CASE("ridge keeps separated logistic coefficients finite") {
    std::vector<double> x, target;
    for (int i = 0; i < 40; ++i) {
        x.push_back(i < 20 ? -1.0 - i * 0.1 : 1.0 + i * 0.1);
        target.push_back(i < 20 ? 0.0 : 1.0);
    }
    LearnerSpec spec;
    spec.kind = LearnerKind::linear_logistic;
    const FittedModel m = fit(numeric_features({x}), target, spec);
    for (double c : m.coef) CHECK(std::isfinite(c));
    CHECK(std::isfinite(m.intercept));
    for (double p : m.predict(numeric_features({x}))) {
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
}

TEST_CASE("calibration: training-mean match for intercept and logistic") {
    SimulationConfig cfg;
    cfg.n = 400;
    const auto data = generate_dataset(cfg, 31);
    const FeatureTable features = outcome_features(data.table);
    std::vector<double> target;
    for (double y : data.table.outcome) {
        target.push_back(to_probability_scale(y, data.table.scale));
    }
    for (LearnerKind kind : {LearnerKind::intercept_only, LearnerKind::linear_logistic}) {
        LearnerSpec spec;
        spec.kind = kind;
        const FittedModel m = fit(features, target, spec);
        CHECK(mean(m.predict(features)) == doctest::Approx(mean(target)).epsilon(1e-6));
    }
}

TEST_CASE("determinism: identical data, spec and seed give bit-identical predictions") {
    const CatTask task = make_cat_task(300, 5, {"a", "b", "c"});
    for (LearnerKind kind : {LearnerKind::linear_logistic, LearnerKind::gbtree}) {
        LearnerSpec spec;
        spec.kind = kind;
        spec.tree_count = 60;
        spec.seed = 17;
        const auto p1 = fit(task.features, task.target, spec).predict(task.features);
        const auto p2 = fit(task.features, task.target, spec).predict(task.features);
        REQUIRE(p1.size() == p2.size());
        for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == p2[i]);
    }
}

TEST_CASE("boosting training loss is non-increasing") {
    const CatTask task = make_cat_task(800, 9, {"a", "b"});
    LearnerSpec spec;
    spec.kind = LearnerKind::gbtree;
    spec.tree_count = 120;
    const FittedModel m = fit(task.features, task.target, spec);
    REQUIRE(m.train_loss_curve.size() == 120);
    for (std::size_t t = 1; t < m.train_loss_curve.size(); ++t) {
        CHECK(m.train_loss_curve[t] <= m.train_loss_curve[t - 1] + 1e-15);
    }
    // training-set cross-entropy never exceeds the intercept baseline
    const double baseline = cross_entropy(
        task.target, std::vector<double>(task.target.size(), mean(task.target)));
    CHECK(cross_entropy(task.target, m.predict(task.features)) <= baseline);
}

TEST_CASE("row permutation permutes predictions identically") {
    const CatTask task = make_cat_task(120, 3, {"u", "v"});
    LearnerSpec spec;
    spec.kind = LearnerKind::gbtree;
    spec.tree_count = 40;
    const FittedModel m = fit(task.features, task.target, spec);
    const auto pred = m.predict(task.features);
    std::vector<std::size_t> perm(120);
    for (std::size_t i = 0; i < 120; ++i) perm[i] = (i * 7 + 3) % 120;
    const auto pred_perm = m.predict(subset_features(task.features, perm));
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(pred_perm[i] == pred[perm[i]]);
}

TEST_CASE("gbtree predictions invariant to category relabeling") {
    const CatTask original = make_cat_task(400, 11, {"red", "green", "blue"});
    CatTask renamed = original;
    renamed.features[1].levels = {"K9", "K7", "K1"};  // same codes, new labels
    LearnerSpec spec;
    spec.kind = LearnerKind::gbtree;
    spec.tree_count = 80;
    spec.seed = 4;
    const auto p1 = fit(original.features, original.target, spec).predict(original.features);
    const auto p2 = fit(renamed.features, renamed.target, spec).predict(renamed.features);
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == p2[i]);
}

TEST_CASE("signature mismatch is rejected") {
    const CatTask task = make_cat_task(100, 2, {"a", "b"});
    LearnerSpec spec;
    spec.kind = LearnerKind::intercept_only;
    const FittedModel m = fit(task.features, task.target, spec);
    FeatureTable renamed = task.features;
    renamed[0].name = "other";
    CHECK_THROWS_AS(m.predict(renamed), SignatureMismatch);
    FeatureTable reordered = {task.features[1], task.features[0]};
    CHECK_THROWS_AS(m.predict(reordered), SignatureMismatch);
}

TEST_CASE("gbtree beats the intercept baseline out of fold on the assignment task") {
    SimulationConfig cfg;
    cfg.beta = 0.85;
    cfg.n = 5000;
    const auto data = generate_dataset(cfg, 5);
    const FeatureTable features = covariate_features(data.table);
    std::vector<double> target;
    for (auto v : data.table.treatments[0]) target.push_back(v);
    LearnerSpec gb;
    gb.kind = LearnerKind::gbtree;
    gb.tree_count = 200;
    gb.max_depth = 4;
    gb.learning_rate = 0.1;
    const auto oof_gb = cross_fit(features, target, gb, 5, 123).oof;
    LearnerSpec ic;
    ic.kind = LearnerKind::intercept_only;
    const auto oof_ic = cross_fit(features, target, ic, 5, 123).oof;
    CHECK(cross_entropy(target, oof_gb) < cross_entropy(target, oof_ic));

    // fold-count stability: 5-fold within 10% of 10-fold
    const auto oof_10 = cross_fit(features, target, gb, 10, 123).oof;
    const double ce5 = cross_entropy(target, oof_gb);
    const double ce10 = cross_entropy(target, oof_10);
    CHECK(std::abs(ce5 - ce10) / ce10 < 0.10);
}

TEST_CASE("cross_fit mechanics") {
    SUBCASE("k=2 with intercept learner: each half predicted by the other half's mean") {
        std::vector<double> x(20), target(20);
        CounterRng rng(8);
        for (std::size_t i = 0; i < 20; ++i) {
            x[i] = static_cast<double>(i);
            target[i] = rng.next_unit();
        }
        LearnerSpec ic;
        ic.kind = LearnerKind::intercept_only;
        const CrossFitResult cf = cross_fit(numeric_features({x}), target, ic, 2, 99);
        double fold_mean[2] = {0, 0};
        int fold_n[2] = {0, 0};
        for (std::size_t i = 0; i < 20; ++i) {
            fold_mean[cf.fold_of[i]] += target[i];
            fold_n[cf.fold_of[i]] += 1;
        }
        for (int f = 0; f < 2; ++f) fold_mean[f] /= fold_n[f];
        for (std::size_t i = 0; i < 20; ++i) {
            CHECK(cf.oof[i] == doctest::Approx(fold_mean[1 - cf.fold_of[i]]).epsilon(1e-12));
        }
    }
    SUBCASE("leave-one-out on {0,1,1} gives complement means") {
        std::vector<double> x{1, 2, 3}, target{0, 1, 1};
        LearnerSpec ic;
        ic.kind = LearnerKind::intercept_only;
        const CrossFitResult cf = cross_fit(numeric_features({x}), target, ic, 3, 7);
        CHECK(cf.oof[0] == doctest::Approx(1.0));
        CHECK(cf.oof[1] == doctest::Approx(0.5));
        CHECK(cf.oof[2] == doctest::Approx(0.5));
    }
    SUBCASE("preconditions") {
        std::vector<double> x(12), target(12, 0.5);
        target[0] = 0.4;
        LearnerSpec ic;
        ic.kind = LearnerKind::intercept_only;
        CHECK_THROWS_AS(cross_fit(numeric_features({x}), target, ic, 1, 0), Error);
        CHECK_THROWS_AS(cross_fit(numeric_features({x}), target, ic, 3, 0), TooFewRows);
    }
}

TEST_CASE("model serialization round trip") {
    const CatTask task = make_cat_task(200, 21, {"a", "b", "c"});
    for (LearnerKind kind :
         {LearnerKind::intercept_only, LearnerKind::linear_logistic, LearnerKind::gbtree}) {
        LearnerSpec spec;
        spec.kind = kind;
        spec.tree_count = 30;
        const FittedModel m = fit(task.features, task.target, spec);
        const FittedModel back = deserialize_model(serialize_model(m));
        const auto p1 = m.predict(task.features);
        const auto p2 = back.predict(task.features);
        for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == p2[i]);
    }
    CHECK_THROWS_AS(deserialize_model("not a model"), ParseError);
}

TEST_CASE("learner spec json round trip and validation") {
    LearnerSpec spec;
    spec.kind = LearnerKind::gbtree;
    spec.tree_count = 123;
    spec.learning_rate = 0.05;
    const LearnerSpec back = LearnerSpec::from_json(spec.to_json());
    CHECK(back.to_json() == spec.to_json());
    LearnerSpec bad = spec;
    bad.learning_rate = 1.5;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = spec;
    bad.tree_count = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("predictions always strictly inside the unit interval") {
    const CatTask task = make_cat_task(300, 13, {"a", "b"});
    for (LearnerKind kind :
         {LearnerKind::intercept_only, LearnerKind::linear_logistic, LearnerKind::gbtree}) {
        LearnerSpec spec;
        spec.kind = kind;
        spec.tree_count = 50;
        const auto pred = fit(task.features, task.target, spec).predict(task.features);
        for (double p : pred) {
            CHECK(p > 0.0);
            CHECK(p < 1.0);
        }
    }
}
