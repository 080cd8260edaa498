#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace walkcause {

// ---------------------------------------------------------------------------
// Error types. Contract violations throw; recoverable conditions (clipping,
// degenerate targets, zero-variance covariates) are reported as flags instead.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

struct MissingColumn : Error { using Error::Error; };
struct NonBinaryTreatment : Error { using Error::Error; };
struct OutcomeOutOfScale : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct OutOfScale : Error { using Error::Error; };
struct DegenerateScenario : Error { using Error::Error; };
struct UnsupportedSize : Error { using Error::Error; };
struct TooFewRows : Error { using Error::Error; };
struct SignatureMismatch : Error { using Error::Error; };
struct NoMatches : Error { using Error::Error; };
struct ZeroTruth : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// Deterministic counter-based random generator.
//
// Values are a pure function of (key, counter), so independent streams can be
// derived for each (replicate, column, ...) tuple and generated in any order
// or from any thread with identical results.
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    return mix64(h ^ (v + kGolden + (h << 6) + (h >> 2)));
}

constexpr std::uint64_t seed_key(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x57414c4b43415553ull;  // "WALKCAUS"
    for (std::uint64_t p : parts) h = hash_combine(h, p);
    return h;
}

/// Inverse of the standard normal CDF (Acklam's rational approximation
/// followed by one Halley refinement; accurate to ~1e-15 on (0,1)).
inline double inv_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error("inv_normal_cdf: p outside (0,1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // Halley step against erfc-based CDF.
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}
    CounterRng(std::uint64_t key, std::uint64_t stream) : key_(hash_combine(key, stream)) {}

    std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

    /// Uniform in the open interval (0,1).
    double next_unit() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double next_normal() { return inv_normal_cdf(next_unit()); }
    double next_normal(double mu, double sd) { return mu + sd * next_normal(); }

    /// Uniform integer in [0, n) via 128-bit multiply (n up to 2^32 is exact
    /// for all practical purposes here).
    std::size_t next_below(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[next_below(i)]);
        }
    }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// Small numeric helpers.
// ---------------------------------------------------------------------------

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double clamp_unit(double p, double eps = 1e-9) {
    return std::min(1.0 - eps, std::max(eps, p));
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Unbiased sample variance (n-1 denominator); 0 for fewer than two values.
inline double sample_variance(const std::vector<double>& v) {
    const std::size_t n = v.size();
    if (n < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(n - 1);
}

inline double sample_sd(const std::vector<double>& v) { return std::sqrt(sample_variance(v)); }

/// Binomial cross-entropy between fractional targets and predictions in (0,1).
inline double cross_entropy(const std::vector<double>& target,
                            const std::vector<double>& pred) {
    double s = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double p = clamp_unit(pred[i], 1e-12);
        s += -(target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p));
    }
    return s / static_cast<double>(target.size());
}

// ---------------------------------------------------------------------------
// Bounded worker pool over an indexed task range. Results must be written to
// pre-sized slots keyed by task index so the outcome is independent of
// scheduling order.
// ---------------------------------------------------------------------------

inline void parallel_for(std::size_t task_count, int workers,
                         const std::function<void(std::size_t)>& fn) {
    const int nthreads =
        std::max(1, std::min<int>(workers, static_cast<int>(task_count)));
    if (nthreads == 1) {
        for (std::size_t i = 0; i < task_count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= task_count) break;
                    fn(i);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace walkcause
