#pragma once

// Data-generating mechanisms for the three prediction settings.
//
//   causal (prognosis):     P ~ Beta(alpha_e, beta_e), x = logit(P), y ~ Bernoulli(P)
//   anti-causal (diagnosis): y ~ Bernoulli(p_e), x ~ N(y, 1)
//   confounded (fork):       z ~ N(mu_e, 1), x = z + N(0, 1), y ~ Bernoulli(expit(z))
//
// The environment only touches the cause: the Beta shapes for prognosis, the
// prevalence for diagnosis, the confounder mean for the fork.

#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "casemix/csv.hpp"
#include "casemix/errors.hpp"
#include "casemix/numerics.hpp"

namespace casemix {

enum class Direction { causal, anti_causal, confounded };

inline std::string_view to_string(Direction d) noexcept
{
    switch (d) {
    case Direction::causal: return "causal";
    case Direction::anti_causal: return "anti-causal";
    case Direction::confounded: return "confounded";
    }
    return "unknown";
}

inline double logit(double p)
{
    if (!(p > 0.0 && p < 1.0)) throw DomainError("logit: p must lie strictly inside (0, 1)");
    return std::log(p / (1.0 - p));
}

inline double expit(double l) noexcept
{
    if (l >= 0.0) return 1.0 / (1.0 + std::exp(-l));
    const double e = std::exp(l);
    return e / (1.0 + e);
}

struct PrognosisEnvSpec {
    double alpha = 1.0;
    double beta = 1.0;
    std::string label;

    void validate() const
    {
        if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
            throw DomainError("prognosis environment '" + label + "': alpha and beta must be positive");
        }
    }
};

struct DiagnosisEnvSpec {
    double prevalence = 0.5;
    std::string label;

    void validate() const
    {
        if (!(prevalence > 0.0 && prevalence < 1.0)) {
            throw DomainError("diagnosis environment '" + label + "': prevalence must lie in (0, 1)");
        }
    }
};

struct ForkEnvSpec {
    double mu_z = 0.0;
    std::string label;

    void validate() const
    {
        if (!std::isfinite(mu_z)) throw DomainError("fork environment '" + label + "': mu_z must be finite");
    }
};

struct LabeledSample {
    double x = 0.0;
    int y = 0;
    std::optional<double> true_risk;
};

struct Dataset {
    std::vector<LabeledSample> samples;
    std::string environment_label;
    Direction direction = Direction::causal;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }

    [[nodiscard]] std::vector<double> features() const
    {
        std::vector<double> out;
        out.reserve(samples.size());
        for (const auto& s : samples) out.push_back(s.x);
        return out;
    }

    [[nodiscard]] std::vector<int> labels() const
    {
        std::vector<int> out;
        out.reserve(samples.size());
        for (const auto& s : samples) out.push_back(s.y);
        return out;
    }

    // Throws ContractError if any sample lacks a true risk.
    [[nodiscard]] std::vector<double> true_risks() const
    {
        std::vector<double> out;
        out.reserve(samples.size());
        for (const auto& s : samples) {
            if (!s.true_risk) throw ContractError("dataset sample has no true risk");
            out.push_back(*s.true_risk);
        }
        return out;
    }

    [[nodiscard]] double prevalence() const
    {
        if (samples.empty()) throw ContractError("prevalence of an empty dataset");
        std::size_t pos = 0;
        for (const auto& s : samples) pos += static_cast<std::size_t>(s.y);
        return static_cast<double>(pos) / static_cast<double>(samples.size());
    }
};

namespace detail {
inline void check_size(std::size_t n)
{
    if (n < 1) throw DomainError("sample size must be at least 1");
}
} // namespace detail

inline Dataset gen_prognosis(const PrognosisEnvSpec& spec, std::size_t n, Seed seed)
{
    spec.validate();
    detail::check_size(n);
    Stream rng(seed);
    Dataset data{{}, spec.label, Direction::causal};
    data.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double risk = sample_beta(spec.alpha, spec.beta, rng);
        const double x = logit(risk);
        const int y = sample_bernoulli(risk, rng);
        // store expit(x) so that true_risk == expit(x) holds bit-exactly
        data.samples.push_back({x, y, expit(x)});
    }
    return data;
}

// P(Y=1 | X=x) for the diagnosis mechanism: Bayes' rule with unit-variance
// Gaussian class conditionals centred at 0 and 1.
inline double diagnosis_posterior(double x, double prevalence)
{
    return expit(x - 0.5 + logit(prevalence));
}

inline Dataset gen_diagnosis(const DiagnosisEnvSpec& spec, std::size_t n, Seed seed)
{
    spec.validate();
    detail::check_size(n);
    Stream rng(seed);
    const double offset = logit(spec.prevalence) - 0.5;
    Dataset data{{}, spec.label, Direction::anti_causal};
    data.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = sample_bernoulli(spec.prevalence, rng);
        const double x = sample_normal(static_cast<double>(y), 1.0, rng);
        data.samples.push_back({x, y, expit(x + offset)});
    }
    return data;
}

// P(Y=1 | X=x) for the fork mechanism. Given x, the confounder is
// N((mu_z + x)/2, 1/2); the risk is E[expit(Z)] under that law, integrated
// with the trapezoidal rule (spectrally accurate for this analytic integrand).
inline double fork_posterior(double x, double mu_z)
{
    const double mean = 0.5 * (mu_z + x);
    const double sd = std::sqrt(0.5);
    constexpr double half_width = 12.0;
    constexpr double step = 0.125;
    constexpr int n = static_cast<int>(2.0 * half_width / step);
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double t = -half_width + step * i;
        acc += expit(mean + sd * t) * normal_pdf(t);
    }
    return acc * step;
}

inline Dataset gen_fork(const ForkEnvSpec& spec, std::size_t n, Seed seed)
{
    spec.validate();
    detail::check_size(n);
    Stream rng(seed);
    Dataset data{{}, spec.label, Direction::confounded};
    data.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = sample_normal(spec.mu_z, 1.0, rng);
        const double x = z + sample_normal(0.0, 1.0, rng);
        const double risk_z = expit(z);
        const int y = sample_bernoulli(risk_z, rng);
        data.samples.push_back({x, y, risk_z});
    }
    return data;
}

// ---------------------------------------------------------------------------
// CSV: header `x,y,true_risk`, blank true_risk when absent, LF endings.
// ---------------------------------------------------------------------------

inline void write_dataset_csv(std::ostream& out, const Dataset& data)
{
    out << "x,y,true_risk\n";
    for (const auto& s : data.samples) {
        out << csv::format_double(s.x) << ',' << s.y << ',';
        if (s.true_risk) out << csv::format_double(*s.true_risk);
        out << '\n';
    }
}

inline void write_dataset_csv(const std::string& path, const Dataset& data)
{
    auto out = csv::open_output(path);
    write_dataset_csv(out, data);
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline Dataset read_dataset_csv(std::istream& in, std::string environment_label = {},
                                Direction direction = Direction::causal)
{
    std::string line;
    if (!std::getline(in, line) || csv::strip_cr(line) != "x,y,true_risk") {
        throw FormatError("dataset CSV: expected header 'x,y,true_risk'");
    }
    Dataset data{{}, std::move(environment_label), direction};
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto row = csv::strip_cr(line);
        if (row.empty()) continue;
        const auto fields = csv::split(row);
        if (fields.size() != 3) {
            throw FormatError("dataset CSV line " + std::to_string(line_no) + ": expected 3 fields");
        }
        const auto x = csv::parse_double(fields[0]);
        if (!x || !std::isfinite(*x)) throw FormatError("dataset CSV line " + std::to_string(line_no) + ": bad x");
        if (fields[1] != "0" && fields[1] != "1") {
            throw FormatError("dataset CSV line " + std::to_string(line_no) + ": y must be 0 or 1");
        }
        LabeledSample s{*x, fields[1] == "1" ? 1 : 0, std::nullopt};
        if (!fields[2].empty()) {
            const auto r = csv::parse_double(fields[2]);
            if (!r || !(*r >= 0.0 && *r <= 1.0)) {
                throw FormatError("dataset CSV line " + std::to_string(line_no) + ": true_risk must lie in [0, 1]");
            }
            s.true_risk = *r;
        }
        data.samples.push_back(s);
    }
    return data;
}

} // namespace casemix
