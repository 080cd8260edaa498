#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "walkcause/diagnostics.hpp"
#include "walkcause/estimators.hpp"
#include "walkcause/simulation.hpp"

namespace walkcause {

// Minimal deterministic SVG renderer: axes, points, bands and a legend.
// No external plotting dependency; coordinates use fixed two-decimal output.

namespace svg {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

class Canvas {
  public:
    Canvas(double width, double height) : width_(width), height_(height) {
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width)
             << "\" height=\"" << num(height) << "\" viewBox=\"0 0 " << num(width) << " "
             << num(height) << "\">\n";
        out_ << "<rect width=\"" << num(width) << "\" height=\"" << num(height)
             << "\" fill=\"white\"/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& color,
              double stroke = 1.0, const std::string& dash = "") {
        out_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
             << "\" y2=\"" << num(y2) << "\" stroke=\"" << color << "\" stroke-width=\""
             << num(stroke) << "\"";
        if (!dash.empty()) out_ << " stroke-dasharray=\"" << dash << "\"";
        out_ << "/>\n";
    }

    void circle(double x, double y, double r, const std::string& color, bool filled = true) {
        out_ << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << num(r)
             << "\" fill=\"" << (filled ? color : "none") << "\" stroke=\"" << color
             << "\"/>\n";
    }

    void triangle(double x, double y, double r, const std::string& color) {
        out_ << "<path d=\"M " << num(x) << " " << num(y - r) << " L " << num(x - r) << " "
             << num(y + r) << " L " << num(x + r) << " " << num(y + r)
             << " Z\" fill=\"" << color << "\"/>\n";
    }

    void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                 double opacity) {
        out_ << "<polygon points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) out_ << ' ';
            out_ << num(pts[i].first) << ',' << num(pts[i].second);
        }
        out_ << "\" fill=\"" << color << "\" fill-opacity=\"" << num(opacity) << "\"/>\n";
    }

    void text(double x, double y, const std::string& s, double size = 11.0,
              const std::string& anchor = "start") {
        out_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\""
             << num(size) << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor
             << "\">" << escape(s) << "</text>\n";
    }

    std::string finish() {
        out_ << "</svg>\n";
        return out_.str();
    }

  private:
    static std::string escape(const std::string& s) {
        std::string o;
        for (char c : s) {
            if (c == '<') o += "&lt;";
            else if (c == '>') o += "&gt;";
            else if (c == '&') o += "&amp;";
            else o += c;
        }
        return o;
    }

    double width_, height_;
    std::ostringstream out_;
};

inline const std::vector<std::pair<std::string, std::string>>& palette() {
    static const std::vector<std::pair<std::string, std::string>> colors = {
        {"raw_difference", "#c44e52"},
        {"g_formula", "#4c72b0"},
        {"iptw", "#55a868"},
        {"psm", "#8172b2"},
        {"tmle", "#ccb974"},
    };
    return colors;
}

inline std::string color_for(const std::string& name) {
    for (const auto& [k, v] : palette()) {
        if (k == name) return v;
    }
    return "#444444";
}

}  // namespace svg

/// Love plot: one row per covariate, unadjusted as circles, adjusted as
/// triangles, vertical reference at zero.
inline std::string love_plot_svg(const BalanceReport& report) {
    const double row_h = 22.0;
    const double top = 40.0, left = 170.0, right = 40.0, bottom = 50.0;
    const double plot_w = 420.0;
    const double height = top + row_h * static_cast<double>(report.rows.size()) + bottom;
    svg::Canvas canvas(left + plot_w + right, height);

    double max_asmd = 0.1;
    for (const auto& r : report.rows) {
        max_asmd = std::max({max_asmd, r.asmd_unadjusted, r.asmd_weighted});
    }
    max_asmd *= 1.15;
    auto xpos = [&](double v) { return left + v / max_asmd * plot_w; };

    canvas.text(left, 20.0, "Covariate balance (ASMD), scenario with " +
                                std::to_string(report.n_interventions) + " intervention(s)",
                13.0);
    canvas.line(xpos(0.0), top - 8.0, xpos(0.0), height - bottom + 8.0, "#888888", 1.0, "4,3");
    for (double tick : {0.0, 0.1, 0.2, 0.3, 0.4, 0.5}) {
        if (tick > max_asmd) break;
        canvas.line(xpos(tick), height - bottom + 8.0, xpos(tick), height - bottom + 13.0,
                    "#444444");
        canvas.text(xpos(tick), height - bottom + 26.0, svg::num(tick), 10.0, "middle");
    }
    canvas.text(left + plot_w / 2.0, height - 12.0, "absolute standardized mean difference",
                11.0, "middle");
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const auto& r = report.rows[i];
        const double y = top + row_h * (static_cast<double>(i) + 0.5);
        canvas.text(left - 8.0, y + 4.0, r.covariate, 11.0, "end");
        canvas.line(left, y, left + plot_w, y, "#eeeeee");
        canvas.circle(xpos(r.asmd_unadjusted), y, 4.5, "#4c72b0");
        canvas.triangle(xpos(r.asmd_weighted), y, 5.0, "#9b59b6");
    }
    canvas.circle(left + plot_w - 130.0, 18.0, 4.5, "#4c72b0");
    canvas.text(left + plot_w - 120.0, 22.0, "unadjusted", 11.0);
    canvas.triangle(left + plot_w - 30.0, 18.0, 5.0, "#9b59b6");
    canvas.text(left + plot_w - 20.0, 22.0, report.weighting, 11.0);
    return canvas.finish();
}

/// One panel per confounding level: percentage error vs number of
/// interventions with shaded +/-1.96 SE bands per estimator.
inline std::string benchmark_svg(const BenchmarkReport& report) {
    std::vector<double> betas;
    for (const auto& a : report.aggregates) {
        if (std::find(betas.begin(), betas.end(), a.beta) == betas.end()) {
            betas.push_back(a.beta);
        }
    }
    std::sort(betas.begin(), betas.end());
    std::set<std::string> estimator_set;
    int k_max = 1;
    double lo = 0.0, hi = 0.0;
    for (const auto& a : report.aggregates) {
        estimator_set.insert(a.estimator);
        k_max = std::max(k_max, a.n_interventions);
        lo = std::min(lo, a.band_lo);
        hi = std::max(hi, a.band_hi);
    }
    const double pad = 0.1 * std::max(hi - lo, 0.02);
    lo -= pad;
    hi += pad;

    const double panel_w = 300.0, panel_h = 260.0, gap = 40.0;
    const double left = 60.0, top = 50.0, bottom = 50.0;
    const double width = left + panel_w * static_cast<double>(betas.size()) +
                         gap * static_cast<double>(betas.size() - 1) + 30.0;
    const double height = top + panel_h + bottom;
    svg::Canvas canvas(width, height);
    canvas.text(width / 2.0, 22.0, "Estimation percentage error vs number of interventions",
                14.0, "middle");

    for (std::size_t b = 0; b < betas.size(); ++b) {
        const double x0 = left + static_cast<double>(b) * (panel_w + gap);
        const double y0 = top;
        auto xpos = [&](int k) {
            return x0 + (static_cast<double>(k) - 1.0) / std::max(1.0, k_max - 1.0) * panel_w;
        };
        auto ypos = [&](double v) { return y0 + (hi - v) / (hi - lo) * panel_h; };
        canvas.line(x0, y0, x0, y0 + panel_h, "#222222");
        canvas.line(x0, y0 + panel_h, x0 + panel_w, y0 + panel_h, "#222222");
        canvas.line(x0, ypos(0.0), x0 + panel_w, ypos(0.0), "#aaaaaa", 1.0, "4,3");
        canvas.text(x0 + panel_w / 2.0, y0 - 8.0, "beta = " + format_double(betas[b]), 12.0,
                    "middle");
        for (int k = 1; k <= k_max; ++k) {
            canvas.text(xpos(k), y0 + panel_h + 18.0, std::to_string(k), 10.0, "middle");
        }
        canvas.text(x0 + panel_w / 2.0, height - 10.0, "number of interventions", 11.0,
                    "middle");
        if (b == 0) {
            for (double frac : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                const double v = lo + frac * (hi - lo);
                canvas.text(x0 - 8.0, ypos(v) + 4.0, svg::num(v * 100.0) + "%", 9.0, "end");
            }
        }
        for (const auto& est : estimator_set) {
            const std::string color = svg::color_for(est);
            std::vector<const BenchmarkAggregate*> line;
            for (const auto& a : report.aggregates) {
                if (a.estimator == est &&
                    std::llround(a.beta * 1e6) == std::llround(betas[b] * 1e6)) {
                    line.push_back(&a);
                }
            }
            std::sort(line.begin(), line.end(),
                      [](const BenchmarkAggregate* l, const BenchmarkAggregate* r) {
                          return l->n_interventions < r->n_interventions;
                      });
            if (line.empty()) continue;
            std::vector<std::pair<double, double>> band;
            for (const auto* a : line) {
                band.emplace_back(xpos(a->n_interventions), ypos(a->band_hi));
            }
            for (auto it = line.rbegin(); it != line.rend(); ++it) {
                band.emplace_back(xpos((*it)->n_interventions), ypos((*it)->band_lo));
            }
            canvas.polygon(band, color, 0.18);
            for (std::size_t i = 1; i < line.size(); ++i) {
                canvas.line(xpos(line[i - 1]->n_interventions), ypos(line[i - 1]->mean_error),
                            xpos(line[i]->n_interventions), ypos(line[i]->mean_error), color,
                            1.6);
            }
            for (const auto* a : line) {
                canvas.circle(xpos(a->n_interventions), ypos(a->mean_error), 3.0, color);
            }
        }
    }
    double lx = left;
    for (const auto& est : estimator_set) {
        canvas.circle(lx, 36.0, 4.0, svg::color_for(est));
        canvas.text(lx + 8.0, 40.0, est, 11.0);
        lx += 18.0 + 7.5 * static_cast<double>(est.size());
    }
    return canvas.finish();
}

/// Per-treatment mean effect vs number of interventions with confidence
/// bands, for one estimator's sweep aggregation.
inline std::string effect_by_count_svg(const SweepResult& result,
                                       const std::string& estimator) {
    std::vector<const EffectByCount*> rows;
    std::set<std::string> treatments;
    int k_max = 1;
    double lo = 0.0, hi = 0.0;
    for (const auto& a : result.aggregation) {
        if (a.estimator != estimator) continue;
        rows.push_back(&a);
        treatments.insert(a.treatment);
        k_max = std::max(k_max, a.n_interventions);
        if (std::isfinite(a.band_lo)) lo = std::min(lo, a.band_lo);
        if (std::isfinite(a.band_hi)) hi = std::max(hi, a.band_hi);
        lo = std::min(lo, a.mean_psi_percent);
        hi = std::max(hi, a.mean_psi_percent);
    }
    const double pad = 0.1 * std::max(hi - lo, 0.5);
    lo -= pad;
    hi += pad;
    const double panel_w = 480.0, panel_h = 300.0;
    const double left = 70.0, top = 60.0, bottom = 50.0;
    svg::Canvas canvas(left + panel_w + 150.0, top + panel_h + bottom);
    canvas.text(left, 24.0, "CATE (" + estimator + ") vs number of interventions", 14.0);
    auto xpos = [&](int k) {
        return left + (static_cast<double>(k) - 1.0) / std::max(1.0, k_max - 1.0) * panel_w;
    };
    auto ypos = [&](double v) { return top + (hi - v) / (hi - lo) * panel_h; };
    canvas.line(left, top, left, top + panel_h, "#222222");
    canvas.line(left, top + panel_h, left + panel_w, top + panel_h, "#222222");
    canvas.line(left, ypos(0.0), left + panel_w, ypos(0.0), "#aaaaaa", 1.0, "4,3");
    for (int k = 1; k <= k_max; ++k) {
        canvas.text(xpos(k), top + panel_h + 18.0, std::to_string(k), 10.0, "middle");
    }
    canvas.text(left + panel_w / 2.0, top + panel_h + 38.0, "number of interventions", 11.0,
                "middle");
    for (double frac : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const double v = lo + frac * (hi - lo);
        canvas.text(left - 8.0, ypos(v) + 4.0, svg::num(v) + "%", 9.0, "end");
    }
    static const std::vector<std::string> cat_colors = {"#4c72b0", "#dd8452", "#55a868",
                                                        "#c44e52", "#8172b2", "#937860"};
    std::size_t ci = 0;
    double ly = top;
    for (const auto& t : treatments) {
        const std::string color = cat_colors[ci % cat_colors.size()];
        ++ci;
        std::vector<const EffectByCount*> line;
        for (const auto* a : rows) {
            if (a->treatment == t) line.push_back(a);
        }
        std::sort(line.begin(), line.end(), [](const EffectByCount* l, const EffectByCount* r) {
            return l->n_interventions < r->n_interventions;
        });
        bool bands = true;
        for (const auto* a : line) {
            bands = bands && std::isfinite(a->band_lo) && std::isfinite(a->band_hi);
        }
        if (bands && line.size() > 1) {
            std::vector<std::pair<double, double>> band;
            for (const auto* a : line) band.emplace_back(xpos(a->n_interventions), ypos(a->band_hi));
            for (auto it = line.rbegin(); it != line.rend(); ++it) {
                band.emplace_back(xpos((*it)->n_interventions), ypos((*it)->band_lo));
            }
            canvas.polygon(band, color, 0.15);
        }
        for (std::size_t i = 1; i < line.size(); ++i) {
            canvas.line(xpos(line[i - 1]->n_interventions), ypos(line[i - 1]->mean_psi_percent),
                        xpos(line[i]->n_interventions), ypos(line[i]->mean_psi_percent), color,
                        1.6);
        }
        for (const auto* a : line) {
            canvas.circle(xpos(a->n_interventions), ypos(a->mean_psi_percent), 3.0, color);
        }
        canvas.circle(left + panel_w + 20.0, ly, 4.0, color);
        canvas.text(left + panel_w + 30.0, ly + 4.0, t, 11.0);
        ly += 18.0;
    }
    return canvas.finish();
}

}  // namespace walkcause
