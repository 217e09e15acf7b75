#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "casemix/datagen.hpp"
#include "casemix/errors.hpp"

namespace casemix {

// A risk model maps a feature value to P(Y=1).
using RiskFunction = std::function<double(double)>;

struct LogisticModel {
    double intercept = 0.0;
    double slope = 0.0;

    [[nodiscard]] double linear_predictor(double x) const noexcept { return intercept + slope * x; }
    [[nodiscard]] double operator()(double x) const noexcept { return expit(linear_predictor(x)); }
};

inline double predict(const LogisticModel& m, double x) noexcept
{
    return m(x);
}

inline std::vector<double> predict(const LogisticModel& m, std::span<const double> xs)
{
    std::vector<double> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(m(x));
    return out;
}

inline std::vector<double> predict(const RiskFunction& f, std::span<const double> xs)
{
    std::vector<double> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(f(x));
    return out;
}

inline void to_json(nlohmann::json& j, const LogisticModel& m)
{
    j = nlohmann::json{{"intercept", m.intercept}, {"slope", m.slope}};
}

inline void from_json(const nlohmann::json& j, LogisticModel& m)
{
    m.intercept = j.at("intercept").get<double>();
    m.slope = j.at("slope").get<double>();
}

struct FitReport {
    int iterations = 0;
    bool converged = false;
    double final_gradient_norm = 0.0;
};

struct FitOptions {
    double tol = 1e-10;
    int max_iter = 100;
    int max_halvings = 10;
    double separation_bound = 30.0;
};

namespace detail {

// log(1 + exp(l)) without overflow.
inline double softplus(double l) noexcept
{
    return l > 0.0 ? l + std::log1p(std::exp(-l)) : std::log1p(std::exp(l));
}

} // namespace detail

// Mean Bernoulli log-likelihood per observation.
inline double log_likelihood(const LogisticModel& m, std::span<const double> xs, std::span<const int> ys)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double l = m.linear_predictor(xs[i]);
        acc += ys[i] * l - detail::softplus(l);
    }
    return acc / static_cast<double>(xs.size());
}

// Gradient of the mean log-likelihood with respect to (intercept, slope).
inline std::array<double, 2> log_likelihood_gradient(const LogisticModel& m, std::span<const double> xs,
                                                     std::span<const int> ys)
{
    double g0 = 0.0;
    double g1 = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - m(xs[i]);
        g0 += r;
        g1 += r * xs[i];
    }
    const double n = static_cast<double>(xs.size());
    return {g0 / n, g1 / n};
}

// Maximum-likelihood logistic regression by Newton-Raphson with step halving.
// The tolerance applies to the Euclidean norm of the mean-log-likelihood gradient.
inline std::pair<LogisticModel, FitReport> fit_logistic(std::span<const double> xs, std::span<const int> ys,
                                                         const FitOptions& opt = {})
{
    if (xs.size() != ys.size()) throw ContractError("fit_logistic: feature and label lengths differ");
    if (!(opt.tol > 0.0)) throw ContractError("fit_logistic: tolerance must be positive");
    std::size_t positives = 0;
    for (int y : ys) {
        if (y != 0 && y != 1) throw ContractError("fit_logistic: labels must be 0 or 1");
        positives += static_cast<std::size_t>(y);
    }
    if (positives == 0 || positives == ys.size()) {
        throw UnfittableError("fit_logistic: data contain a single outcome class");
    }

    // In one dimension the MLE exists iff the class ranges overlap strictly.
    double lo0 = HUGE_VAL, hi0 = -HUGE_VAL, lo1 = HUGE_VAL, hi1 = -HUGE_VAL;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i])) throw ContractError("fit_logistic: non-finite feature");
        double& lo = ys[i] ? lo1 : lo0;
        double& hi = ys[i] ? hi1 : hi0;
        lo = std::min(lo, xs[i]);
        hi = std::max(hi, xs[i]);
    }
    if (std::min(lo0, lo1) == std::max(hi0, hi1)) {
        throw UnfittableError("fit_logistic: feature is constant");
    }
    if (hi0 <= lo1 || hi1 <= lo0) {
        throw SeparationError("fit_logistic: outcome classes are separated by the feature");
    }

    LogisticModel m{};
    FitReport report{};
    const double n = static_cast<double>(xs.size());
    double ll = log_likelihood(m, xs, ys);

    for (int iter = 0; iter < opt.max_iter; ++iter) {
        double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double p = m(xs[i]);
            const double w = p * (1.0 - p);
            const double r = ys[i] - p;
            g0 += r;
            g1 += r * xs[i];
            h00 += w;
            h01 += w * xs[i];
            h11 += w * xs[i] * xs[i];
        }
        g0 /= n;
        g1 /= n;
        report.final_gradient_norm = std::hypot(g0, g1);
        report.iterations = iter;
        if (report.final_gradient_norm <= opt.tol) {
            report.converged = true;
            return {m, report};
        }
        h00 /= n;
        h01 /= n;
        h11 /= n;
        const double det = h00 * h11 - h01 * h01;
        if (!(det > 1e-14 * h00 * h11) || !std::isfinite(det)) {
            throw UnfittableError("fit_logistic: information matrix is singular (constant feature?)");
        }
        const double step0 = (h11 * g0 - h01 * g1) / det;
        const double step1 = (h00 * g1 - h01 * g0) / det;

        double scale = 1.0;
        LogisticModel candidate{};
        double candidate_ll = 0.0;
        bool improved = false;
        for (int halving = 0; halving <= opt.max_halvings; ++halving) {
            candidate = {m.intercept + scale * step0, m.slope + scale * step1};
            if (std::fabs(candidate.intercept) > opt.separation_bound
                || std::fabs(candidate.slope) > opt.separation_bound) {
                throw SeparationError("fit_logistic: coefficients diverge (quasi-separated data)");
            }
            candidate_ll = log_likelihood(candidate, xs, ys);
            if (candidate_ll >= ll) {
                improved = true;
                break;
            }
            // Near the optimum the likelihood gain drops below the rounding of
            // the sum itself; a shrinking gradient is then the reliable signal.
            const auto cg = log_likelihood_gradient(candidate, xs, ys);
            if (candidate_ll >= ll - 1e-12 * (1.0 + std::fabs(ll))
                && std::hypot(cg[0], cg[1]) < report.final_gradient_norm) {
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!improved) {
            // No ascent direction left at double precision.
            report.iterations = iter + 1;
            return {m, report};
        }
        m = candidate;
        ll = candidate_ll;
    }
    const auto g = log_likelihood_gradient(m, xs, ys);
    report.iterations = opt.max_iter;
    report.final_gradient_norm = std::hypot(g[0], g[1]);
    report.converged = report.final_gradient_norm <= opt.tol;
    return {m, report};
}

inline std::pair<LogisticModel, FitReport> fit_logistic(const Dataset& data, const FitOptions& opt = {})
{
    const auto xs = data.features();
    const auto ys = data.labels();
    return fit_logistic(xs, ys, opt);
}

inline std::pair<LogisticModel, FitReport> fit_logistic(const Dataset& data, double tol, int max_iter)
{
    FitOptions opt;
    opt.tol = tol;
    opt.max_iter = max_iter;
    return fit_logistic(data, opt);
}

// True conditional risk P(Y=1 | X=x) of each mechanism.
inline RiskFunction oracle_model(const PrognosisEnvSpec& spec)
{
    spec.validate();
    return [](double x) { return expit(x); };
}

inline RiskFunction oracle_model(const DiagnosisEnvSpec& spec)
{
    spec.validate();
    const double offset = logit(spec.prevalence) - 0.5;
    return [offset](double x) { return expit(x + offset); };
}

inline RiskFunction oracle_model(const ForkEnvSpec& spec)
{
    spec.validate();
    return [mu = spec.mu_z](double x) { return fork_posterior(x, mu); };
}

} // namespace casemix
