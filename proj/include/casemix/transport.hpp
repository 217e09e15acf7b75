#pragma once

// Exact engine over finite joint distributions of (X, Y).
//
// A case-mix shift replaces the marginal of the cause while keeping the
// mechanism of the effect: shift_x_marginal keeps P(Y|X), shift_y_marginal
// keeps P(X|Y). Population metrics are computed by summation, so the
// invariance statements can be checked to machine precision.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "casemix/datagen.hpp"
#include "casemix/errors.hpp"
#include "casemix/model.hpp"
#include "casemix/numerics.hpp"

namespace casemix {

inline constexpr double kMassTolerance = 1e-12;

class DiscreteJoint {
public:
    // mass[i] = {p(x_i, y=0), p(x_i, y=1)}
    DiscreteJoint(std::vector<double> x_values, std::vector<std::array<double, 2>> mass)
        : x_(std::move(x_values)), mass_(std::move(mass))
    {
        validate();
    }

    [[nodiscard]] std::size_t support_size() const noexcept { return x_.size(); }
    [[nodiscard]] const std::vector<double>& x_values() const noexcept { return x_; }
    [[nodiscard]] const std::vector<std::array<double, 2>>& mass() const noexcept { return mass_; }

    [[nodiscard]] double p_x(std::size_t i) const noexcept { return mass_[i][0] + mass_[i][1]; }

    [[nodiscard]] std::vector<double> x_marginal() const
    {
        std::vector<double> out(x_.size());
        for (std::size_t i = 0; i < x_.size(); ++i) out[i] = p_x(i);
        return out;
    }

    [[nodiscard]] double p_y(int y) const noexcept
    {
        double acc = 0.0;
        for (const auto& m : mass_) acc += m[static_cast<std::size_t>(y)];
        return acc;
    }

    [[nodiscard]] double p_y1_given_x(std::size_t i) const noexcept { return mass_[i][1] / p_x(i); }

    // P(X = x_i | Y = y) for every support point; requires P(Y=y) > 0.
    [[nodiscard]] std::vector<double> x_given_y(int y) const
    {
        const double py = p_y(y);
        if (!(py > 0.0)) throw UndefinedMetricError("P(X|Y) undefined: outcome class has zero mass");
        std::vector<double> out(x_.size());
        for (std::size_t i = 0; i < x_.size(); ++i) out[i] = mass_[i][static_cast<std::size_t>(y)] / py;
        return out;
    }

    [[nodiscard]] std::size_t index_of(double x) const
    {
        const auto it = std::find(x_.begin(), x_.end(), x);
        if (it == x_.end()) throw TransportViolation("value outside the support of the joint");
        return static_cast<std::size_t>(it - x_.begin());
    }

private:
    void validate() const
    {
        if (x_.empty()) throw DomainError("DiscreteJoint: empty support");
        if (x_.size() != mass_.size()) throw DomainError("DiscreteJoint: support and mass sizes differ");
        double total = 0.0;
        for (std::size_t i = 0; i < x_.size(); ++i) {
            if (!std::isfinite(x_[i])) throw DomainError("DiscreteJoint: non-finite support value");
            for (double m : mass_[i]) {
                if (!(m >= 0.0) || !std::isfinite(m)) throw DomainError("DiscreteJoint: masses must be nonnegative");
            }
            if (!(p_x(i) > 0.0)) throw DomainError("DiscreteJoint: support point with zero marginal mass");
            total += p_x(i);
        }
        if (std::fabs(total - 1.0) > kMassTolerance) throw DomainError("DiscreteJoint: masses must sum to 1");
        auto sorted = x_;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw DomainError("DiscreteJoint: support values must be distinct");
        }
    }

    std::vector<double> x_;
    std::vector<std::array<double, 2>> mass_;
};

enum class ShiftKind { shift_x_marginal, shift_y_marginal };

struct ShiftSpec {
    ShiftKind kind = ShiftKind::shift_x_marginal;
    std::vector<double> new_marginal;
};

namespace detail {

inline void check_probability_vector(std::span<const double> p, const char* what)
{
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError(std::string(what) + ": probabilities must be nonnegative");
        total += v;
    }
    if (std::fabs(total - 1.0) > kMassTolerance) throw DomainError(std::string(what) + ": probabilities must sum to 1");
}

} // namespace detail

// New X-marginal over the original support (same order). Points that receive
// zero mass are dropped from the result.
inline DiscreteJoint shift_x_marginal(const DiscreteJoint& joint, std::span<const double> new_px)
{
    if (new_px.size() != joint.support_size()) {
        throw TransportViolation("shift_x_marginal: new marginal must be indexed by the original support");
    }
    detail::check_probability_vector(new_px, "shift_x_marginal");
    std::vector<double> xs;
    std::vector<std::array<double, 2>> mass;
    for (std::size_t i = 0; i < joint.support_size(); ++i) {
        if (new_px[i] == 0.0) continue;
        const double r = joint.p_y1_given_x(i);
        xs.push_back(joint.x_values()[i]);
        mass.push_back({new_px[i] * (1.0 - r), new_px[i] * r});
    }
    return {std::move(xs), std::move(mass)};
}

// New X-marginal given as (x, probability) pairs; values outside the original
// support violate absolute continuity.
inline DiscreteJoint shift_x_marginal(const DiscreteJoint& joint, std::span<const std::pair<double, double>> new_px)
{
    std::vector<double> dense(joint.support_size(), 0.0);
    for (const auto& [x, p] : new_px) dense[joint.index_of(x)] += p;
    return shift_x_marginal(joint, dense);
}

// New P(Y=1); both the original and the new outcome marginal must be non-degenerate.
inline DiscreteJoint shift_y_marginal(const DiscreteJoint& joint, double new_py1)
{
    const double py1 = joint.p_y(1);
    if (!(py1 > 0.0 && py1 < 1.0)) throw PreconditionError("shift_y_marginal: original P(Y) is degenerate");
    if (!(new_py1 > 0.0 && new_py1 < 1.0)) throw PreconditionError("shift_y_marginal: new P(Y) is degenerate");
    const auto c0 = joint.x_given_y(0);
    const auto c1 = joint.x_given_y(1);
    std::vector<double> xs;
    std::vector<std::array<double, 2>> mass;
    for (std::size_t i = 0; i < joint.support_size(); ++i) {
        const std::array<double, 2> m{(1.0 - new_py1) * c0[i], new_py1 * c1[i]};
        if (m[0] + m[1] == 0.0) continue;
        xs.push_back(joint.x_values()[i]);
        mass.push_back(m);
    }
    return {std::move(xs), std::move(mass)};
}

inline DiscreteJoint apply_shift(const DiscreteJoint& joint, const ShiftSpec& shift)
{
    if (shift.kind == ShiftKind::shift_x_marginal) return shift_x_marginal(joint, shift.new_marginal);
    if (shift.new_marginal.size() != 2) throw DomainError("shift_y_marginal: expected a probability pair");
    detail::check_probability_vector(shift.new_marginal, "shift_y_marginal");
    return shift_y_marginal(joint, shift.new_marginal[1]);
}

// ---------------------------------------------------------------------------
// Exact population metrics
// ---------------------------------------------------------------------------

struct ExactMetrics {
    double auc = 0.5;
    std::vector<double> thresholds;
    std::vector<double> sensitivity;
    std::vector<double> specificity;
    double ici = 0.0;
};

// ICI = sum_x P(x) |f(x) - P(Y=1|x)|; defined even when one class has no mass.
inline double exact_ici(const DiscreteJoint& joint, const RiskFunction& f)
{
    double acc = 0.0;
    for (std::size_t i = 0; i < joint.support_size(); ++i) {
        acc += joint.p_x(i) * std::fabs(f(joint.x_values()[i]) - joint.p_y1_given_x(i));
    }
    return acc;
}

// AUC = P(f(X+) > f(X-)) + P(f(X+) = f(X-)) / 2 for independent class-conditional draws.
inline double exact_auc(const DiscreteJoint& joint, const RiskFunction& f)
{
    const auto c0 = joint.x_given_y(0);
    const auto c1 = joint.x_given_y(1);
    struct Level {
        double score;
        double neg;
        double pos;
    };
    std::vector<Level> levels;
    levels.reserve(joint.support_size());
    for (std::size_t i = 0; i < joint.support_size(); ++i) levels.push_back({f(joint.x_values()[i]), c0[i], c1[i]});
    std::sort(levels.begin(), levels.end(), [](const Level& a, const Level& b) { return a.score < b.score; });
    double auc = 0.0;
    double neg_below = 0.0;
    for (std::size_t i = 0; i < levels.size();) {
        std::size_t j = i;
        double neg = 0.0;
        double pos = 0.0;
        while (j < levels.size() && levels[j].score == levels[i].score) {
            neg += levels[j].neg;
            pos += levels[j].pos;
            ++j;
        }
        auc += pos * (neg_below + 0.5 * neg);
        neg_below += neg;
        i = j;
    }
    return auc;
}

inline ExactMetrics exact_metrics(const DiscreteJoint& joint, const RiskFunction& f, std::span<const double> taus)
{
    const double py1 = joint.p_y(1);
    if (!(py1 > 0.0 && py1 < 1.0)) throw UndefinedMetricError("exact_metrics: an outcome class has zero mass");
    const auto c0 = joint.x_given_y(0);
    const auto c1 = joint.x_given_y(1);
    ExactMetrics out;
    out.auc = exact_auc(joint, f);
    out.ici = exact_ici(joint, f);
    out.thresholds.assign(taus.begin(), taus.end());
    for (double tau : taus) {
        double sens = 0.0;
        double spec = 0.0;
        for (std::size_t i = 0; i < joint.support_size(); ++i) {
            if (f(joint.x_values()[i]) > tau) {
                sens += c1[i];
            } else {
                spec += c0[i];
            }
        }
        out.sensitivity.push_back(sens);
        out.specificity.push_back(spec);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Theorem verification
// ---------------------------------------------------------------------------

struct VerificationReport {
    std::string theorem;  // "calibration" or "discrimination"
    std::uint64_t case_id = 0;
    std::uint64_t seed = 0;
    double pre_metric = 0.0;
    double post_metric = 0.0;
    double max_abs_diff = 0.0;
    bool pass = false;
    // ICI before/after the outcome shift; filled for discrimination cases only.
    double ici_pre = 0.0;
    double ici_post = 0.0;
};

inline void to_json(nlohmann::json& j, const VerificationReport& r)
{
    j = nlohmann::json{{"case_id", r.case_id},         {"seed", r.seed},
                       {"pre_metric", r.pre_metric},   {"post_metric", r.post_metric},
                       {"max_abs_diff", r.max_abs_diff}, {"pass", r.pass}};
    if (r.theorem == "discrimination") {
        j["ici_pre"] = r.ici_pre;
        j["ici_post"] = r.ici_post;
    }
}

using XShiftOp = std::function<DiscreteJoint(const DiscreteJoint&, std::span<const double>)>;
using YShiftOp = std::function<DiscreteJoint(const DiscreteJoint&, double)>;

inline DiscreteJoint default_x_shift(const DiscreteJoint& j, std::span<const double> px)
{
    return shift_x_marginal(j, px);
}

inline DiscreteJoint default_y_shift(const DiscreteJoint& j, double py1)
{
    return shift_y_marginal(j, py1);
}

inline constexpr double kTheoremTolerance = 1e-12;

// A model calibrated on the joint stays calibrated after any x-marginal shift.
inline VerificationReport verify_theorem_calibration(const DiscreteJoint& joint, const RiskFunction& f,
                                                     std::span<const double> new_px, std::uint64_t case_id = 0,
                                                     std::uint64_t seed = 0, const XShiftOp& shift = default_x_shift)
{
    const double pre = exact_ici(joint, f);
    if (pre > kTheoremTolerance) {
        throw PreconditionError("verify_theorem_calibration: model is not perfectly calibrated on the joint");
    }
    const auto shifted = shift(joint, new_px);
    // Conditionals must survive the shift, otherwise the operator itself is broken.
    double drift = 0.0;
    for (std::size_t i = 0; i < shifted.support_size(); ++i) {
        const auto k = joint.index_of(shifted.x_values()[i]);
        drift = std::max(drift, std::fabs(shifted.p_y1_given_x(i) - joint.p_y1_given_x(k)));
    }
    const double post = exact_ici(shifted, f);
    VerificationReport r{"calibration", case_id, seed, pre, post, std::max(std::fabs(post - pre), drift), false};
    r.pass = post <= kTheoremTolerance && drift <= kTheoremTolerance;
    return r;
}

// Thresholds at every distinct prediction value on the support, plus 0 and 1.
inline std::vector<double> prediction_thresholds(const DiscreteJoint& joint, const RiskFunction& f)
{
    std::vector<double> taus{0.0, 1.0};
    for (double x : joint.x_values()) taus.push_back(f(x));
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    return taus;
}

// Sensitivity, specificity at every threshold, and AUC are unchanged by an outcome-marginal shift.
inline VerificationReport verify_theorem_discrimination(const DiscreteJoint& joint, const RiskFunction& f,
                                                        double new_py1, std::uint64_t case_id = 0,
                                                        std::uint64_t seed = 0, const YShiftOp& shift = default_y_shift)
{
    const double py1 = joint.p_y(1);
    if (!(py1 > 0.0 && py1 < 1.0) || !(new_py1 > 0.0 && new_py1 < 1.0)) {
        throw PreconditionError("verify_theorem_discrimination: outcome marginals must be non-degenerate");
    }
    const auto taus = prediction_thresholds(joint, f);
    const auto before = exact_metrics(joint, f, taus);
    const auto shifted = shift(joint, new_py1);
    const auto after = exact_metrics(shifted, f, taus);
    double diff = std::fabs(after.auc - before.auc);
    for (std::size_t t = 0; t < taus.size(); ++t) {
        diff = std::max(diff, std::fabs(after.sensitivity[t] - before.sensitivity[t]));
        diff = std::max(diff, std::fabs(after.specificity[t] - before.specificity[t]));
    }
    VerificationReport r{"discrimination", case_id, seed, before.auc, after.auc, diff, diff <= kTheoremTolerance};
    r.ici_pre = before.ici;
    r.ici_post = after.ici;
    return r;
}

// ---------------------------------------------------------------------------
// Random cases for property checks
//
// Support size uniform in 2..20, Dirichlet(1,...,1) cell masses, and either a
// monotone or a non-monotone model (with deliberate ties). Everything is a
// pure function of the case seed.
// ---------------------------------------------------------------------------

struct TableModel {
    std::vector<double> xs;
    std::vector<double> values;

    double operator()(double x) const
    {
        const auto it = std::lower_bound(xs.begin(), xs.end(), x);
        if (it == xs.end() || *it != x) throw TransportViolation("model evaluated outside its support");
        return values[static_cast<std::size_t>(it - xs.begin())];
    }
};

inline std::vector<double> random_dirichlet(std::size_t k, Stream& rng)
{
    std::vector<double> w(k);
    double total = 0.0;
    for (auto& v : w) {
        v = -std::log(rng.uniform());
        total += v;
    }
    for (auto& v : w) v /= total;
    return w;
}

inline DiscreteJoint random_joint(Stream& rng)
{
    const std::size_t k = 2 + static_cast<std::size_t>(rng.next_u64() % 19);
    std::vector<double> xs(k);
    for (std::size_t i = 0; i < k; ++i) xs[i] = static_cast<double>(i) + 0.5 * rng.uniform();
    const auto w = random_dirichlet(2 * k, rng);
    std::vector<std::array<double, 2>> mass(k);
    for (std::size_t i = 0; i < k; ++i) mass[i] = {w[2 * i], w[2 * i + 1]};
    return {std::move(xs), std::move(mass)};
}

// Arbitrary model on the support: monotone half of the time; about a third of
// the values snap to a coarse grid so that ties occur.
inline TableModel random_model(const DiscreteJoint& joint, Stream& rng)
{
    TableModel m{joint.x_values(), {}};
    m.values.resize(m.xs.size());
    for (auto& v : m.values) {
        v = rng.uniform();
        if (rng.uniform() < 0.35) v = std::round(v * 4.0) / 4.0;
    }
    if (rng.uniform() < 0.5) std::sort(m.values.begin(), m.values.end());
    return m;
}

inline TableModel calibrated_model(const DiscreteJoint& joint)
{
    TableModel m{joint.x_values(), {}};
    for (std::size_t i = 0; i < joint.support_size(); ++i) m.values.push_back(joint.p_y1_given_x(i));
    return m;
}

// Dirichlet marginal; sometimes a strict subset of points is zeroed out.
inline std::vector<double> random_x_marginal(std::size_t k, Stream& rng)
{
    auto w = random_dirichlet(k, rng);
    if (k > 2 && rng.uniform() < 0.3) {
        const std::size_t keep = static_cast<std::size_t>(rng.next_u64() % k);
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            if (i != keep && rng.uniform() < 0.4) w[i] = 0.0;
            total += w[i];
        }
        for (auto& v : w) v /= total;
    }
    return w;
}

struct TheoremHooks {
    XShiftOp x_shift = default_x_shift;
    YShiftOp y_shift = default_y_shift;
};

struct TheoremBatch {
    std::vector<VerificationReport> calibration;
    std::vector<VerificationReport> discrimination;

    [[nodiscard]] bool all_pass() const noexcept
    {
        return std::all_of(calibration.begin(), calibration.end(), [](const auto& r) { return r.pass; })
               && std::all_of(discrimination.begin(), discrimination.end(), [](const auto& r) { return r.pass; });
    }

    [[nodiscard]] double max_abs_diff() const noexcept
    {
        double m = 0.0;
        for (const auto& r : calibration) m = std::max(m, r.max_abs_diff);
        for (const auto& r : discrimination) m = std::max(m, r.max_abs_diff);
        return m;
    }

    // Share of discrimination cases whose ICI moved by more than the tolerance.
    [[nodiscard]] double ici_changed_fraction() const noexcept
    {
        if (discrimination.empty()) return 0.0;
        std::size_t changed = 0;
        for (const auto& r : discrimination) changed += std::fabs(r.ici_post - r.ici_pre) > kTheoremTolerance ? 1 : 0;
        return static_cast<double>(changed) / static_cast<double>(discrimination.size());
    }
};

inline VerificationReport run_calibration_case(std::uint64_t case_id, Seed case_seed, const TheoremHooks& hooks = {})
{
    Stream rng(case_seed);
    const auto joint = random_joint(rng);
    const auto f = calibrated_model(joint);
    const auto px = random_x_marginal(joint.support_size(), rng);
    return verify_theorem_calibration(joint, f, px, case_id, case_seed.value, hooks.x_shift);
}

inline VerificationReport run_discrimination_case(std::uint64_t case_id, Seed case_seed,
                                                  const TheoremHooks& hooks = {})
{
    Stream rng(case_seed);
    const auto joint = random_joint(rng);
    const auto f = random_model(joint, rng);
    const double py1 = 0.01 + 0.98 * rng.uniform();
    return verify_theorem_discrimination(joint, f, py1, case_id, case_seed.value, hooks.y_shift);
}

inline TheoremBatch run_theorem_batch(std::size_t n_cases, Seed seed, const TheoremHooks& hooks = {})
{
    if (n_cases < 1) throw ContractError("run_theorem_batch: need at least one case");
    TheoremBatch batch;
    batch.calibration.reserve(n_cases);
    batch.discrimination.reserve(n_cases);
    const Seed cal_root = derive_seed(seed, {"theorem", "calibration"});
    const Seed dis_root = derive_seed(seed, {"theorem", "discrimination"});
    for (std::uint64_t i = 0; i < n_cases; ++i) {
        batch.calibration.push_back(run_calibration_case(i, derive_seed(cal_root, i), hooks));
        batch.discrimination.push_back(run_discrimination_case(i, derive_seed(dis_root, i), hooks));
    }
    return batch;
}

// ---------------------------------------------------------------------------
// Sampling and confounded structures
// ---------------------------------------------------------------------------

// Draw i.i.d. samples; true_risk carries P(Y=1 | X=x).
inline Dataset sample_joint(const DiscreteJoint& joint, std::size_t n, Seed seed)
{
    std::vector<double> cdf;
    cdf.reserve(2 * joint.support_size());
    double acc = 0.0;
    for (const auto& m : joint.mass()) {
        acc += m[0];
        cdf.push_back(acc);
        acc += m[1];
        cdf.push_back(acc);
    }
    Stream rng(seed);
    Dataset data{{}, "discrete", Direction::causal};
    data.samples.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        const double u = rng.uniform() * acc;
        auto cell = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        cell = std::min(cell, cdf.size() - 1);
        const std::size_t i = cell / 2;
        data.samples.push_back({joint.x_values()[i], static_cast<int>(cell % 2), joint.p_y1_given_x(i)});
    }
    return data;
}

// Discrete fork Z -> X, Z -> Y, where the environment acts on P(Z) only.
struct DiscreteFork {
    std::vector<double> p_z;
    std::vector<double> x_values;
    std::vector<std::vector<double>> p_x_given_z;  // [z][x]
    std::vector<double> p_y1_given_z;

    [[nodiscard]] DiscreteJoint joint() const
    {
        std::vector<std::array<double, 2>> mass(x_values.size(), {0.0, 0.0});
        for (std::size_t z = 0; z < p_z.size(); ++z) {
            for (std::size_t x = 0; x < x_values.size(); ++x) {
                const double w = p_z[z] * p_x_given_z[z][x];
                mass[x][0] += w * (1.0 - p_y1_given_z[z]);
                mass[x][1] += w * p_y1_given_z[z];
            }
        }
        return {x_values, std::move(mass)};
    }

    [[nodiscard]] DiscreteFork with_z_marginal(std::vector<double> new_pz) const
    {
        if (new_pz.size() != p_z.size()) throw DomainError("DiscreteFork: marginal size mismatch");
        detail::check_probability_vector(new_pz, "DiscreteFork");
        DiscreteFork out = *this;
        out.p_z = std::move(new_pz);
        return out;
    }
};

} // namespace casemix
