#pragma once

// Special functions, distributions and seeded sampling.
//
// The random stream is counter based: draw i of a stream with key k is a pure
// function of (k, i). Child streams are keyed by hashing the parent key with a
// label, so per-replicate and per-cell streams never depend on scheduling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>

#include "casemix/errors.hpp"

namespace casemix {

struct Seed {
    std::uint64_t value = 0;

    friend bool operator==(Seed, Seed) = default;
};

namespace detail {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27U)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31U);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

} // namespace detail

// Derive a child seed from a parent and an ordered list of labels.
inline Seed derive_seed(Seed parent, std::initializer_list<std::string_view> labels) noexcept
{
    std::uint64_t k = detail::mix64(parent.value + detail::kGolden);
    for (auto label : labels) {
        k = detail::mix64(k ^ detail::mix64(detail::fnv1a(label)));
    }
    return Seed{k};
}

inline Seed derive_seed(Seed parent, std::uint64_t index) noexcept
{
    return Seed{detail::mix64(detail::mix64(parent.value + detail::kGolden) ^ detail::mix64(index * detail::kGolden + 1))};
}

class Stream {
public:
    explicit Stream(Seed seed) noexcept : key_(detail::mix64(seed.value ^ 0x6a09e667f3bcc909ULL)) {}

    std::uint64_t next_u64() noexcept
    {
        ++counter_;
        return detail::mix64(key_ + counter_ * detail::kGolden);
    }

    // Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform() noexcept
    {
        return (static_cast<double>(next_u64() >> 11U) + 0.5) * 0x1.0p-53;
    }

    // Independent child stream; does not advance this stream.
    [[nodiscard]] Stream split(std::string_view label) const noexcept
    {
        Stream child{Seed{0}};
        child.key_ = detail::mix64(key_ ^ detail::mix64(detail::fnv1a(label)));
        return child;
    }

    [[nodiscard]] std::uint64_t draws() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

// ln Gamma(x) for x > 0. Upward recurrence to x >= 10, then the Stirling series.
inline double log_gamma(double x)
{
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError("log_gamma: argument must be positive and finite");
    }
    double shift = 0.0;
    double prod = 1.0;
    while (x < 10.0) {
        prod *= x;
        x += 1.0;
        if (prod > 1e280) {
            shift += std::log(prod);
            prod = 1.0;
        }
    }
    shift += std::log(prod);

    // Bernoulli coefficients B_{2k} / (2k (2k-1)), k = 1..8
    constexpr double c[] = {
        1.0 / 12.0,          -1.0 / 360.0,     1.0 / 1260.0,      -1.0 / 1680.0,
        1.0 / 1188.0,        -691.0 / 360360.0, 1.0 / 156.0,       -3617.0 / 122400.0,
    };
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = 0.0;
    for (int k = 7; k >= 0; --k) {
        series = series * inv2 + c[k];
    }
    series *= inv;
    constexpr double half_log_two_pi = 0.91893853320467274178;
    return (x - 0.5) * std::log(x) - x + half_log_two_pi + series - shift;
}

inline double log_beta(double a, double b)
{
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

namespace detail {

// Continued fraction for I_x(a,b), modified Lentz. Converges fast for x < (a+1)/(a+b+2).
inline double inc_beta_cf(double x, double a, double b)
{
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    constexpr int max_iter = 100000;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) {
            return h;
        }
    }
    return h;
}

} // namespace detail

// Regularized incomplete beta function I_x(a, b).
inline double reg_inc_beta(double x, double a, double b)
{
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw DomainError("reg_inc_beta: shape parameters must be positive");
    }
    if (!(x >= 0.0 && x <= 1.0)) {
        throw DomainError("reg_inc_beta: x must lie in [0, 1]");
    }
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return std::exp(log_front) * detail::inc_beta_cf(x, a, b) / a;
    }
    return 1.0 - std::exp(log_front) * detail::inc_beta_cf(1.0 - x, b, a) / b;
}

inline double normal_pdf(double z) noexcept
{
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double z) noexcept
{
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

inline double beta_pdf(double x, double a, double b)
{
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("beta_pdf: shape parameters must be positive");
    if (x < 0.0 || x > 1.0) return 0.0;
    if (x == 0.0) return a < 1.0 ? std::numeric_limits<double>::infinity() : (a == 1.0 ? b : 0.0);
    if (x == 1.0) return b < 1.0 ? std::numeric_limits<double>::infinity() : (b == 1.0 ? a : 0.0);
    return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta(a, b));
}

inline double beta_cdf(double x, double a, double b)
{
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return reg_inc_beta(x, a, b);
}

// ---------------------------------------------------------------------------
// F distribution
// ---------------------------------------------------------------------------

struct FParams {
    long d1 = 1;
    long d2 = 1;
};

namespace detail {
inline void check(FParams p)
{
    if (p.d1 < 1 || p.d2 < 1) throw DomainError("F distribution: degrees of freedom must be >= 1");
}
} // namespace detail

inline double f_pdf(double x, FParams p)
{
    detail::check(p);
    if (x < 0.0) throw DomainError("f_pdf: x must be nonnegative");
    const double d1 = static_cast<double>(p.d1);
    const double d2 = static_cast<double>(p.d2);
    if (x == 0.0) {
        if (p.d1 == 1) return std::numeric_limits<double>::infinity();
        if (p.d1 == 2) return 1.0;
        return 0.0;
    }
    const double log_pdf = 0.5 * d1 * std::log(d1 / d2) + (0.5 * d1 - 1.0) * std::log(x)
                           - 0.5 * (d1 + d2) * std::log1p(d1 * x / d2) - log_beta(0.5 * d1, 0.5 * d2);
    return std::exp(log_pdf);
}

inline double f_cdf(double x, FParams p)
{
    detail::check(p);
    if (!(x >= 0.0)) throw DomainError("f_cdf: x must be nonnegative");
    if (std::isinf(x)) return 1.0;
    const double d1x = static_cast<double>(p.d1) * x;
    return reg_inc_beta(d1x / (d1x + static_cast<double>(p.d2)), 0.5 * static_cast<double>(p.d1), 0.5 * static_cast<double>(p.d2));
}

// Upper tail P(F > x), computed without cancellation.
inline double f_sf(double x, FParams p)
{
    detail::check(p);
    if (!(x >= 0.0)) throw DomainError("f_sf: x must be nonnegative");
    if (std::isinf(x)) return 0.0;
    const double d1x = static_cast<double>(p.d1) * x;
    const double d2 = static_cast<double>(p.d2);
    return reg_inc_beta(d2 / (d1x + d2), 0.5 * d2, 0.5 * static_cast<double>(p.d1));
}

// Inverse CDF by bisection: at most 200 halvings, stops once the bracket is below 1e-12 (relative above 1).
inline double f_quantile(double prob, FParams p)
{
    detail::check(p);
    if (!(prob > 0.0 && prob < 1.0)) throw DomainError("f_quantile: probability must lie in (0, 1)");
    double lo = 0.0;
    double hi = 1.0;
    while (f_cdf(hi, p) < prob) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw DomainError("f_quantile: failed to bracket quantile");
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (f_cdf(mid, p) < prob) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 1e-12 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

// Marsaglia polar method; the second variate of each pair is discarded.
inline double sample_normal(double mu, double sigma, Stream& rng)
{
    if (!(sigma > 0.0) || !std::isfinite(mu) || !std::isfinite(sigma)) {
        throw DomainError("sample_normal: sigma must be positive and parameters finite");
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
        u = 2.0 * rng.uniform() - 1.0;
        v = 2.0 * rng.uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return mu + sigma * u * std::sqrt(-2.0 * std::log(s) / s);
}

// Marsaglia-Tsang; shapes below one are boosted with U^(1/shape).
inline double sample_gamma(double shape, Stream& rng)
{
    if (!(shape > 0.0) || !std::isfinite(shape)) throw DomainError("sample_gamma: shape must be positive");
    if (shape < 1.0) {
        const double g = sample_gamma(shape + 1.0, rng);
        return g * std::pow(rng.uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double z = 0.0;
        double v = 0.0;
        do {
            z = sample_normal(0.0, 1.0, rng);
            v = 1.0 + c * z;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        const double z2 = z * z;
        if (u < 1.0 - 0.0331 * z2 * z2) return d * v;
        if (std::log(u) < 0.5 * z2 + d * (1.0 - v + std::log(v))) return d * v;
    }
}

// Beta via two gamma draws. Results that round to 0 or 1 are redrawn.
inline double sample_beta(double a, double b, Stream& rng)
{
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw DomainError("sample_beta: shape parameters must be positive");
    }
    for (;;) {
        const double ga = sample_gamma(a, rng);
        const double gb = sample_gamma(b, rng);
        const double x = ga / (ga + gb);
        if (x > 0.0 && x < 1.0) return x;
    }
}

inline int sample_bernoulli(double p, Stream& rng)
{
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("sample_bernoulli: p must lie in [0, 1]");
    return rng.uniform() < p ? 1 : 0;
}

} // namespace casemix
