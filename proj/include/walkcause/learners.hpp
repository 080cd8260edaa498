#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "walkcause/common.hpp"

namespace walkcause {

// ---------------------------------------------------------------------------
// Supervised learners for the nuisance functions: a deterministic
// gradient-boosted-tree learner with native categorical handling, a ridge
// logistic baseline, and an intercept-only baseline. All of them minimize
// binomial cross-entropy against fractional targets in [0,1].
// ---------------------------------------------------------------------------

enum class LearnerKind { intercept_only, linear_logistic, gbtree };

inline std::string learner_kind_name(LearnerKind k) {
    switch (k) {
        case LearnerKind::intercept_only: return "intercept_only";
        case LearnerKind::linear_logistic: return "linear_logistic";
        case LearnerKind::gbtree: return "gbtree";
    }
    return "?";
}

inline LearnerKind learner_kind_from_name(const std::string& s) {
    if (s == "intercept_only") return LearnerKind::intercept_only;
    if (s == "linear_logistic") return LearnerKind::linear_logistic;
    if (s == "gbtree") return LearnerKind::gbtree;
    throw ParseError("unknown learner kind: " + s);
}

struct LearnerSpec {
    LearnerKind kind = LearnerKind::gbtree;
    int tree_count = 300;
    int max_depth = 4;
    double learning_rate = 0.1;
    int min_child_samples = 20;
    double cat_smoothing = 1.0;  // prior weight in ordered target statistics
    double ridge = 1e-4;         // linear_logistic L2 penalty
    std::uint64_t seed = 0;

    void validate() const {
        if (tree_count < 1) throw Error("tree_count must be >= 1");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
            throw Error("learning_rate must be in (0,1]");
        }
        if (max_depth < 1) throw Error("max_depth must be >= 1");
    }

    static LearnerSpec from_json(const nlohmann::json& j) {
        LearnerSpec s;
        s.kind = learner_kind_from_name(j.at("kind").get<std::string>());
        s.tree_count = j.value("tree_count", s.tree_count);
        s.max_depth = j.value("max_depth", s.max_depth);
        s.learning_rate = j.value("learning_rate", s.learning_rate);
        s.min_child_samples = j.value("min_child_samples", s.min_child_samples);
        s.cat_smoothing = j.value("cat_smoothing", s.cat_smoothing);
        s.ridge = j.value("ridge", s.ridge);
        s.seed = j.value("seed", s.seed);
        s.validate();
        return s;
    }

    nlohmann::json to_json() const {
        return {{"kind", learner_kind_name(kind)},
                {"tree_count", tree_count},
                {"max_depth", max_depth},
                {"learning_rate", learning_rate},
                {"min_child_samples", min_child_samples},
                {"cat_smoothing", cat_smoothing},
                {"ridge", ridge},
                {"seed", seed}};
    }
};

// Feature columns as seen by the learners: numeric values, or categorical
// codes with their level dictionary.
struct FeatureColumn {
    std::string name;
    bool categorical = false;
    std::vector<double> numeric;
    std::vector<std::int32_t> codes;
    std::vector<std::string> levels;

    std::size_t size() const { return categorical ? codes.size() : numeric.size(); }
};

using FeatureTable = std::vector<FeatureColumn>;

inline std::size_t feature_rows(const FeatureTable& features) {
    if (features.empty()) return 0;
    const std::size_t n = features.front().size();
    for (const auto& c : features) {
        if (c.size() != n) throw Error("feature columns have unequal lengths");
    }
    return n;
}

inline FeatureTable subset_features(const FeatureTable& features,
                                    const std::vector<std::size_t>& idx) {
    FeatureTable out;
    out.reserve(features.size());
    for (const auto& c : features) {
        FeatureColumn col;
        col.name = c.name;
        col.categorical = c.categorical;
        col.levels = c.levels;
        if (c.categorical) {
            col.codes.reserve(idx.size());
            for (std::size_t i : idx) col.codes.push_back(c.codes[i]);
        } else {
            col.numeric.reserve(idx.size());
            for (std::size_t i : idx) col.numeric.push_back(c.numeric[i]);
        }
        out.push_back(std::move(col));
    }
    return out;
}

struct FeatureSignature {
    std::vector<std::pair<std::string, bool>> columns;  // name, categorical

    static FeatureSignature of(const FeatureTable& features) {
        FeatureSignature s;
        for (const auto& c : features) s.columns.emplace_back(c.name, c.categorical);
        return s;
    }

    bool operator==(const FeatureSignature&) const = default;
};

namespace detail {

struct TreeNode {
    std::int32_t feature = -1;  // -1 for leaves
    double threshold = 0.0;     // go left when x <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double eval(const std::vector<double>& row) const {
        std::int32_t i = 0;
        for (;;) {
            const TreeNode& nd = nodes[static_cast<std::size_t>(i)];
            if (nd.feature < 0) return nd.value;
            i = row[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
        }
    }
};

// Smoothed target statistic per category level, keyed by label so that
// predictions are invariant to renaming levels.
struct CategoryEncoder {
    double prior = 0.5;
    double smoothing = 1.0;
    std::map<std::string, double> level_stat;

    double encode(const std::string& level) const {
        const auto it = level_stat.find(level);
        return it == level_stat.end() ? prior : it->second;
    }
};

}  // namespace detail

class FittedModel {
  public:
    LearnerKind kind = LearnerKind::intercept_only;
    FeatureSignature signature;
    bool degenerate_target = false;

    // intercept_only
    double constant_prediction = 0.5;

    // linear_logistic (dense design: numeric columns then one-hot blocks)
    std::vector<double> coef;
    double intercept = 0.0;
    std::vector<double> col_mean;
    std::vector<double> col_sd;
    std::vector<std::vector<std::string>> onehot_levels;  // per feature; empty for numeric

    // gbtree
    double base_score = 0.0;  // logit scale
    std::vector<detail::Tree> trees;
    std::vector<detail::CategoryEncoder> encoders;  // per feature; unused for numeric

    std::vector<double> train_loss_curve;  // mean CE after each boosting step

    std::vector<double> predict(const FeatureTable& features) const {
        if (FeatureSignature::of(features) != signature) {
            throw SignatureMismatch("feature signature differs from training");
        }
        const std::size_t n = feature_rows(features);
        std::vector<double> out(n);
        switch (kind) {
            case LearnerKind::intercept_only: {
                std::fill(out.begin(), out.end(), constant_prediction);
                break;
            }
            case LearnerKind::linear_logistic: {
                predict_linear(features, out);
                break;
            }
            case LearnerKind::gbtree: {
                predict_gbtree(features, out);
                break;
            }
        }
        return out;
    }

  private:
    void predict_linear(const FeatureTable& features, std::vector<double>& out) const {
        const std::size_t n = out.size();
        for (std::size_t i = 0; i < n; ++i) {
            double f = intercept;
            std::size_t col = 0;
            for (std::size_t j = 0; j < features.size(); ++j) {
                const auto& fc = features[j];
                if (!fc.categorical) {
                    f += coef[col] * ((fc.numeric[i] - col_mean[col]) / col_sd[col]);
                    ++col;
                } else {
                    const std::string& level = fc.levels[static_cast<std::size_t>(fc.codes[i])];
                    for (const auto& lv : onehot_levels[j]) {
                        const double x = (level == lv) ? 1.0 : 0.0;
                        f += coef[col] * ((x - col_mean[col]) / col_sd[col]);
                        ++col;
                    }
                }
            }
            out[i] = clamp_unit(expit(f), 1e-12);
        }
    }

    void predict_gbtree(const FeatureTable& features, std::vector<double>& out) const {
        const std::size_t n = out.size();
        const std::size_t p = features.size();
        std::vector<double> row(p);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < p; ++j) {
                const auto& fc = features[j];
                row[j] = fc.categorical
                             ? encoders[j].encode(fc.levels[static_cast<std::size_t>(fc.codes[i])])
                             : fc.numeric[i];
            }
            double f = base_score;
            for (const auto& t : trees) f += t.eval(row);
            out[i] = clamp_unit(expit(f), 1e-12);
        }
    }
};

namespace detail {

// Dense symmetric positive-definite solve (Cholesky with jitter fallback).
inline std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b) {
    const std::size_t m = b.size();
    for (int attempt = 0; attempt < 6; ++attempt) {
        std::vector<double> l = a;
        bool ok = true;
        for (std::size_t i = 0; i < m && ok; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double s = l[i * m + j];
                for (std::size_t k = 0; k < j; ++k) s -= l[i * m + k] * l[j * m + k];
                if (i == j) {
                    if (s <= 0.0) {
                        ok = false;
                        break;
                    }
                    l[i * m + i] = std::sqrt(s);
                } else {
                    l[i * m + j] = s / l[j * m + j];
                }
            }
        }
        if (ok) {
            std::vector<double> x = b;
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t k = 0; k < i; ++k) x[i] -= l[i * m + k] * x[k];
                x[i] /= l[i * m + i];
            }
            for (std::size_t ii = m; ii-- > 0;) {
                for (std::size_t k = ii + 1; k < m; ++k) x[ii] -= l[k * m + ii] * x[k];
                x[ii] /= l[ii * m + ii];
            }
            return x;
        }
        for (std::size_t i = 0; i < m; ++i) a[i * m + i] += 1e-8 * (1 << (2 * attempt));
    }
    throw Error("linear solve failed: matrix not positive definite");
}

inline FittedModel fit_intercept(const FeatureTable& features,
                                 const std::vector<double>& target, bool degenerate) {
    FittedModel m;
    m.kind = LearnerKind::intercept_only;
    m.signature = FeatureSignature::of(features);
    m.degenerate_target = degenerate;
    double p = mean(target);
    if (!(p > 0.0)) p = 1e-9;
    if (!(p < 1.0)) p = 1.0 - 1e-9;
    m.constant_prediction = p;
    m.train_loss_curve.push_back(cross_entropy(target, std::vector<double>(target.size(), p)));
    return m;
}

inline FittedModel fit_linear_logistic(const FeatureTable& features,
                                       const std::vector<double>& target,
                                       const LearnerSpec& spec) {
    const std::size_t n = target.size();
    FittedModel model;
    model.kind = LearnerKind::linear_logistic;
    model.signature = FeatureSignature::of(features);
    model.onehot_levels.resize(features.size());

    // Expand to a dense standardized design: numeric columns as-is, one
    // indicator per categorical level.
    std::vector<std::vector<double>> cols;
    for (std::size_t j = 0; j < features.size(); ++j) {
        const auto& fc = features[j];
        if (!fc.categorical) {
            cols.push_back(fc.numeric);
        } else {
            model.onehot_levels[j] = fc.levels;
            for (std::size_t lv = 0; lv < fc.levels.size(); ++lv) {
                std::vector<double> ind(n, 0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    if (fc.codes[i] == static_cast<std::int32_t>(lv)) ind[i] = 1.0;
                }
                cols.push_back(std::move(ind));
            }
        }
    }
    const std::size_t m = cols.size();
    model.col_mean.resize(m);
    model.col_sd.resize(m);
    for (std::size_t c = 0; c < m; ++c) {
        model.col_mean[c] = mean(cols[c]);
        const double sd = sample_sd(cols[c]);
        model.col_sd[c] = sd > 1e-12 ? sd : 1.0;
        for (double& v : cols[c]) v = (v - model.col_mean[c]) / model.col_sd[c];
    }

    const double lambda = spec.ridge;
    std::vector<double> beta(m, 0.0);
    double b0 = logit(clamp_unit(mean(target)));
    std::vector<double> f(n), prob(n);
    auto eval_f = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            double v = b0;
            for (std::size_t c = 0; c < m; ++c) v += beta[c] * cols[c][i];
            f[i] = v;
            prob[i] = expit(v);
        }
    };
    auto penalized_loss = [&] {
        double s = cross_entropy(target, prob) * static_cast<double>(n);
        for (double b : beta) s += 0.5 * lambda * b * b;
        return s;
    };
    eval_f();
    double loss = penalized_loss();
    const std::size_t dim = m + 1;
    for (int iter = 0; iter < 100; ++iter) {
        std::vector<double> grad(dim, 0.0);
        std::vector<double> hess(dim * dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = prob[i] - target[i];
            const double w = std::max(prob[i] * (1.0 - prob[i]), 1e-12);
            for (std::size_t c = 0; c < m; ++c) {
                grad[c] += r * cols[c][i];
                for (std::size_t c2 = 0; c2 <= c; ++c2) {
                    hess[c * dim + c2] += w * cols[c][i] * cols[c2][i];
                }
                hess[m * dim + c] += w * cols[c][i];
            }
            grad[m] += r;
            hess[m * dim + m] += w;
        }
        for (std::size_t c = 0; c < m; ++c) {
            grad[c] += lambda * beta[c];
            hess[c * dim + c] += lambda;
        }
        for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t j = i + 1; j < dim; ++j) hess[i * dim + j] = hess[j * dim + i];
        }
        const std::vector<double> step = solve_spd(hess, grad);
        double max_step = 0.0;
        for (double s : step) max_step = std::max(max_step, std::abs(s));
        const std::vector<double> beta_old = beta;
        const double b0_old = b0;
        double scale = 1.0;
        bool improved = false;
        for (int half = 0; half < 40; ++half) {
            for (std::size_t c = 0; c < m; ++c) beta[c] = beta_old[c] - scale * step[c];
            b0 = b0_old - scale * step[m];
            eval_f();
            const double cand = penalized_loss();
            if (cand <= loss + 1e-12) {
                loss = cand;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!improved) {
            beta = beta_old;
            b0 = b0_old;
            eval_f();
            break;
        }
        if (max_step * scale < 1e-11) break;
    }
    model.coef = beta;
    model.intercept = b0;
    model.train_loss_curve.push_back(cross_entropy(target, prob));
    return model;
}

struct BinnedColumn {
    std::vector<double> edges;       // ascending cut values; go left when v <= edge
    std::vector<std::uint8_t> bins;  // per-row bin index in [0, edges.size()]
};

inline BinnedColumn bin_column(const std::vector<double>& values, int max_bins) {
    BinnedColumn out;
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const int max_edges = max_bins - 1;
    for (int k = 1; k <= max_edges; ++k) {
        const std::size_t pos =
            std::min(n - 1, static_cast<std::size_t>(static_cast<double>(k) *
                                                     static_cast<double>(n) / (max_edges + 1)));
        const double v = sorted[pos];
        if (out.edges.empty() || v > out.edges.back()) {
            if (v < sorted.back()) out.edges.push_back(v);  // top edge would be useless
        }
    }
    out.bins.resize(n);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto it = std::lower_bound(out.edges.begin(), out.edges.end(), values[i]);
        out.bins[i] = static_cast<std::uint8_t>(it - out.edges.begin());
    }
    return out;
}

inline FittedModel fit_gbtree(const FeatureTable& features, const std::vector<double>& target,
                              const LearnerSpec& spec) {
    const std::size_t n = target.size();
    const std::size_t p = features.size();
    FittedModel model;
    model.kind = LearnerKind::gbtree;
    model.signature = FeatureSignature::of(features);
    model.encoders.resize(p);

    const double prior = mean(target);

    // Encode categoricals with ordered target statistics: each row sees only
    // the rows before it in a seed-derived permutation, which keeps the
    // encoding from leaking the row's own label.
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    CounterRng perm_rng(seed_key({spec.seed, 0xCA7F00Dull}));
    perm_rng.shuffle(perm);

    std::vector<std::vector<double>> encoded(p);
    for (std::size_t j = 0; j < p; ++j) {
        const auto& fc = features[j];
        if (!fc.categorical) {
            encoded[j] = fc.numeric;
            continue;
        }
        encoded[j].assign(n, 0.0);
        std::vector<double> sum(fc.levels.size(), 0.0);
        std::vector<double> cnt(fc.levels.size(), 0.0);
        const double a = spec.cat_smoothing;
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t row = perm[k];
            const auto code = static_cast<std::size_t>(fc.codes[row]);
            encoded[j][row] = (sum[code] + a * prior) / (cnt[code] + a);
            sum[code] += target[row];
            cnt[code] += 1.0;
        }
        detail::CategoryEncoder enc;
        enc.prior = prior;
        enc.smoothing = a;
        for (std::size_t lv = 0; lv < fc.levels.size(); ++lv) {
            enc.level_stat[fc.levels[lv]] = (sum[lv] + a * prior) / (cnt[lv] + a);
        }
        model.encoders[j] = std::move(enc);
    }

    constexpr int kMaxBins = 256;
    std::vector<BinnedColumn> binned(p);
    for (std::size_t j = 0; j < p; ++j) binned[j] = bin_column(encoded[j], kMaxBins);

    model.base_score = logit(clamp_unit(prior));
    std::vector<double> f(n, model.base_score);
    std::vector<double> prob(n);
    auto refresh_prob = [&] {
        for (std::size_t i = 0; i < n; ++i) prob[i] = expit(f[i]);
    };
    refresh_prob();
    double loss = cross_entropy(target, prob);

    constexpr double kLeafRidge = 3.0;
    constexpr double kMinSplitGain = 6.0;
    std::vector<double> g(n), h(n);
    std::vector<std::uint32_t> rows(n);
    std::vector<std::int32_t> leaf_of(n);

    for (int t = 0; t < spec.tree_count; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = prob[i] - target[i];
            h[i] = std::max(prob[i] * (1.0 - prob[i]), 1e-12);
        }
        for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<std::uint32_t>(i);

        Tree tree;
        struct Pending {
            std::size_t begin, end;
            int depth;
            std::int32_t node;
        };
        tree.nodes.push_back({});
        std::vector<Pending> queue{{0, n, 0, 0}};
        while (!queue.empty()) {
            const Pending cur = queue.back();
            queue.pop_back();
            double gsum = 0.0, hsum = 0.0;
            for (std::size_t r = cur.begin; r < cur.end; ++r) {
                gsum += g[rows[r]];
                hsum += h[rows[r]];
            }
            TreeNode& node = tree.nodes[static_cast<std::size_t>(cur.node)];
            node.value = -gsum / (hsum + kLeafRidge);
            const std::size_t count = cur.end - cur.begin;
            if (cur.depth >= spec.max_depth ||
                count < 2 * static_cast<std::size_t>(spec.min_child_samples)) {
                continue;
            }
            // Histogram split search over all features.
            double best_gain = std::max(1e-12, kMinSplitGain * cur.depth);
            std::int32_t best_feature = -1;
            int best_bin = -1;
            const double parent_score = gsum * gsum / (hsum + kLeafRidge);
            std::vector<double> hist_g, hist_h;
            std::vector<std::uint32_t> hist_c;
            for (std::size_t j = 0; j < p; ++j) {
                const std::size_t nbins = binned[j].edges.size() + 1;
                if (nbins < 2) continue;
                hist_g.assign(nbins, 0.0);
                hist_h.assign(nbins, 0.0);
                hist_c.assign(nbins, 0);
                for (std::size_t r = cur.begin; r < cur.end; ++r) {
                    const auto b = binned[j].bins[rows[r]];
                    hist_g[b] += g[rows[r]];
                    hist_h[b] += h[rows[r]];
                    hist_c[b] += 1;
                }
                double gl = 0.0, hl = 0.0;
                std::uint32_t cl = 0;
                for (std::size_t b = 0; b + 1 < nbins; ++b) {
                    gl += hist_g[b];
                    hl += hist_h[b];
                    cl += hist_c[b];
                    const std::uint32_t cr = static_cast<std::uint32_t>(count) - cl;
                    if (cl < static_cast<std::uint32_t>(spec.min_child_samples) ||
                        cr < static_cast<std::uint32_t>(spec.min_child_samples)) {
                        continue;
                    }
                    const double gr = gsum - gl;
                    const double hr = hsum - hl;
                    const double gain = gl * gl / (hl + kLeafRidge) +
                                        gr * gr / (hr + kLeafRidge) - parent_score;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_feature = static_cast<std::int32_t>(j);
                        best_bin = static_cast<int>(b);
                    }
                }
            }
            if (best_feature < 0) continue;
            const auto& bj = binned[static_cast<std::size_t>(best_feature)];
            const auto mid = std::stable_partition(
                rows.begin() + static_cast<std::ptrdiff_t>(cur.begin),
                rows.begin() + static_cast<std::ptrdiff_t>(cur.end),
                [&](std::uint32_t r) { return bj.bins[r] <= best_bin; });
            const std::size_t split = static_cast<std::size_t>(mid - rows.begin());
            const std::int32_t left = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.push_back({});
            const std::int32_t right = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.push_back({});
            TreeNode& parent = tree.nodes[static_cast<std::size_t>(cur.node)];
            parent.feature = best_feature;
            parent.threshold = bj.edges[static_cast<std::size_t>(best_bin)];
            parent.left = left;
            parent.right = right;
            queue.push_back({cur.begin, split, cur.depth + 1, left});
            queue.push_back({split, cur.end, cur.depth + 1, right});
        }

        // Per-row leaf values on the training encodings.
        for (std::size_t i = 0; i < n; ++i) {
            std::int32_t node = 0;
            for (;;) {
                const TreeNode& nd = tree.nodes[static_cast<std::size_t>(node)];
                if (nd.feature < 0) break;
                node = encoded[static_cast<std::size_t>(nd.feature)][i] <= nd.threshold
                           ? nd.left
                           : nd.right;
            }
            leaf_of[i] = node;
        }

        // Shrink, with step halving so the training loss never increases.
        double scale = spec.learning_rate;
        double cand_loss = loss;
        std::vector<double> cand_f(n);
        bool accepted = false;
        for (int half = 0; half <= 40 && !accepted; ++half) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cand_f[i] =
                    f[i] + scale * tree.nodes[static_cast<std::size_t>(leaf_of[i])].value;
                const double pi = clamp_unit(expit(cand_f[i]), 1e-12);
                s += -(target[i] * std::log(pi) + (1.0 - target[i]) * std::log(1.0 - pi));
            }
            cand_loss = s / static_cast<double>(n);
            if (cand_loss <= loss) {
                accepted = true;
            } else {
                scale *= 0.5;
            }
        }
        if (!accepted) scale = 0.0;
        for (auto& nd : tree.nodes) nd.value *= scale;  // stored trees apply directly
        if (accepted) {
            f.swap(cand_f);
            refresh_prob();
            loss = cand_loss;
        }
        model.train_loss_curve.push_back(loss);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

}  // namespace detail

/// Fits a learner by cross-entropy minimization on unit-interval targets.
/// A constant target yields an intercept-only fit with degenerate_target set.
inline FittedModel fit(const FeatureTable& features, const std::vector<double>& target,
                       const LearnerSpec& spec) {
    spec.validate();
    const std::size_t n = feature_rows(features);
    if (n != target.size()) throw Error("feature/target length mismatch");
    if (n == 0) throw TooFewRows("no rows");
    for (double y : target) {
        if (!(y >= 0.0 && y <= 1.0)) throw Error("target outside [0,1]");
    }
    const auto [lo, hi] = std::minmax_element(target.begin(), target.end());
    if (*hi - *lo < 1e-12) {
        return detail::fit_intercept(features, target, /*degenerate=*/true);
    }
    switch (spec.kind) {
        case LearnerKind::intercept_only:
            return detail::fit_intercept(features, target, false);
        case LearnerKind::linear_logistic:
            if (n < 10) throw TooFewRows("linear_logistic requires n >= 10");
            return detail::fit_linear_logistic(features, target, spec);
        case LearnerKind::gbtree:
            if (n < 10) throw TooFewRows("gbtree requires n >= 10");
            return detail::fit_gbtree(features, target, spec);
    }
    throw Error("unreachable");
}

struct CrossFitResult {
    std::vector<double> oof;  // out-of-fold predictions, one per row
    std::vector<FittedModel> models;
    std::vector<int> fold_of;
};

/// k-fold cross fitting: each row is predicted by the model trained on the
/// other folds. Fold assignment is a seeded permutation dealt round-robin.
inline CrossFitResult cross_fit(const FeatureTable& features, const std::vector<double>& target,
                                const LearnerSpec& spec, int k, std::uint64_t seed) {
    const std::size_t n = feature_rows(features);
    if (k < 2) throw Error("cross_fit requires k >= 2");
    if (n < 5 * static_cast<std::size_t>(k) && static_cast<std::size_t>(k) != n) {
        throw TooFewRows("cross_fit requires n >= 5k");
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    CounterRng rng(seed_key({seed, 0xF01D5ull}));
    rng.shuffle(order);
    CrossFitResult res;
    res.fold_of.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        res.fold_of[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    }
    res.oof.assign(n, 0.0);
    res.models.reserve(static_cast<std::size_t>(k));
    for (int fold = 0; fold < k; ++fold) {
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < n; ++i) {
            (res.fold_of[i] == fold ? test_idx : train_idx).push_back(i);
        }
        std::vector<double> train_y;
        train_y.reserve(train_idx.size());
        for (std::size_t i : train_idx) train_y.push_back(target[i]);
        FittedModel m = fit(subset_features(features, train_idx), train_y, spec);
        const std::vector<double> pred = m.predict(subset_features(features, test_idx));
        for (std::size_t t = 0; t < test_idx.size(); ++t) res.oof[test_idx[t]] = pred[t];
        res.models.push_back(std::move(m));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Versioned binary serialization of fitted models.
// ---------------------------------------------------------------------------

namespace detail {

class BinWriter {
  public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    const std::string& data() const { return buf_; }

  private:
    void raw(const void* p, std::size_t len) {
        buf_.append(static_cast<const char*>(p), len);
    }
    std::string buf_;
};

class BinReader {
  public:
    explicit BinReader(std::string data) : data_(std::move(data)) {}
    std::uint8_t u8() { return static_cast<std::uint8_t>(data_.at(pos_++)); }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, sizeof v);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, sizeof v);
        return v;
    }
    double f64() {
        double v;
        raw(&v, sizeof v);
        return v;
    }
    std::string str() {
        const std::uint32_t len = u32();
        if (pos_ + len > data_.size()) throw ParseError("truncated model file");
        std::string s = data_.substr(pos_, len);
        pos_ += len;
        return s;
    }

  private:
    void raw(void* p, std::size_t len) {
        if (pos_ + len > data_.size()) throw ParseError("truncated model file");
        std::copy_n(data_.data() + pos_, len, static_cast<char*>(p));
        pos_ += len;
    }
    std::string data_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_model(const FittedModel& m) {
    detail::BinWriter w;
    w.u32(0x4c4d4357u);  // "WCML"
    w.u32(1);            // version
    w.u8(static_cast<std::uint8_t>(m.kind));
    w.u8(m.degenerate_target ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(m.signature.columns.size()));
    for (const auto& [name, cat] : m.signature.columns) {
        w.str(name);
        w.u8(cat ? 1 : 0);
    }
    w.f64(m.constant_prediction);
    w.f64(m.intercept);
    w.u32(static_cast<std::uint32_t>(m.coef.size()));
    for (double v : m.coef) w.f64(v);
    for (double v : m.col_mean) w.f64(v);
    for (double v : m.col_sd) w.f64(v);
    w.u32(static_cast<std::uint32_t>(m.onehot_levels.size()));
    for (const auto& lv : m.onehot_levels) {
        w.u32(static_cast<std::uint32_t>(lv.size()));
        for (const auto& s : lv) w.str(s);
    }
    w.f64(m.base_score);
    w.u32(static_cast<std::uint32_t>(m.encoders.size()));
    for (const auto& e : m.encoders) {
        w.f64(e.prior);
        w.f64(e.smoothing);
        w.u32(static_cast<std::uint32_t>(e.level_stat.size()));
        for (const auto& [level, stat] : e.level_stat) {
            w.str(level);
            w.f64(stat);
        }
    }
    w.u32(static_cast<std::uint32_t>(m.trees.size()));
    for (const auto& t : m.trees) {
        w.u32(static_cast<std::uint32_t>(t.nodes.size()));
        for (const auto& nd : t.nodes) {
            w.u32(static_cast<std::uint32_t>(nd.feature));
            w.f64(nd.threshold);
            w.u32(static_cast<std::uint32_t>(nd.left));
            w.u32(static_cast<std::uint32_t>(nd.right));
            w.f64(nd.value);
        }
    }
    return w.data();
}

inline FittedModel deserialize_model(const std::string& data) {
    detail::BinReader r(data);
    if (r.u32() != 0x4c4d4357u) throw ParseError("not a model file");
    if (r.u32() != 1) throw ParseError("unsupported model file version");
    FittedModel m;
    m.kind = static_cast<LearnerKind>(r.u8());
    m.degenerate_target = r.u8() != 0;
    const std::uint32_t ncols = r.u32();
    for (std::uint32_t i = 0; i < ncols; ++i) {
        std::string name = r.str();
        const bool cat = r.u8() != 0;
        m.signature.columns.emplace_back(std::move(name), cat);
    }
    m.constant_prediction = r.f64();
    m.intercept = r.f64();
    const std::uint32_t m_coef = r.u32();
    m.coef.resize(m_coef);
    for (auto& v : m.coef) v = r.f64();
    m.col_mean.resize(m_coef);
    for (auto& v : m.col_mean) v = r.f64();
    m.col_sd.resize(m_coef);
    for (auto& v : m.col_sd) v = r.f64();
    m.onehot_levels.resize(r.u32());
    for (auto& lv : m.onehot_levels) {
        lv.resize(r.u32());
        for (auto& s : lv) s = r.str();
    }
    m.base_score = r.f64();
    m.encoders.resize(r.u32());
    for (auto& e : m.encoders) {
        e.prior = r.f64();
        e.smoothing = r.f64();
        const std::uint32_t nlv = r.u32();
        for (std::uint32_t i = 0; i < nlv; ++i) {
            std::string level = r.str();
            e.level_stat[level] = r.f64();
        }
    }
    m.trees.resize(r.u32());
    for (auto& t : m.trees) {
        t.nodes.resize(r.u32());
        for (auto& nd : t.nodes) {
            nd.feature = static_cast<std::int32_t>(r.u32());
            nd.threshold = r.f64();
            nd.left = static_cast<std::int32_t>(r.u32());
            nd.right = static_cast<std::int32_t>(r.u32());
            nd.value = r.f64();
        }
    }
    return m;
}

inline void save_model(const FittedModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write model file: " + path);
    const std::string data = serialize_model(m);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

inline FittedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file: " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(data);
}

}  // namespace walkcause
