#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <vector>

#include "casemix/metrics.hpp"
#include "casemix/transport.hpp"

using namespace casemix;

namespace {

// Support {0, 1}, P(X=1) = 0.5, P(Y=1|X=0) = 0.2, P(Y=1|X=1) = 0.8.
DiscreteJoint two_point()
{
    return {{0.0, 1.0}, {{{0.4, 0.1}, {0.1, 0.4}}}};
}

double max_conditional_drift(const DiscreteJoint& before, const DiscreteJoint& after)
{
    double d = 0.0;
    for (std::size_t i = 0; i < after.support_size(); ++i) {
        const auto k = before.index_of(after.x_values()[i]);
        d = std::max(d, std::fabs(after.p_y1_given_x(i) - before.p_y1_given_x(k)));
    }
    return d;
}

} // namespace

TEST(DiscreteJoint, Validation)
{
    EXPECT_NO_THROW(two_point());
    EXPECT_THROW(DiscreteJoint({0.0, 1.0}, {{{0.4, 0.1}, {0.1, 0.3}}}), DomainError);
    EXPECT_THROW(DiscreteJoint({0.0, 1.0}, {{{0.5, 0.5}, {0.0, 0.0}}}), DomainError);
    EXPECT_THROW(DiscreteJoint({0.0, 0.0}, {{{0.4, 0.1}, {0.1, 0.4}}}), DomainError);
    EXPECT_THROW(DiscreteJoint({0.0, 1.0}, {{{-0.1, 0.6}, {0.1, 0.4}}}), DomainError);
    const auto j = two_point();
    EXPECT_NEAR(j.p_y(1), 0.5, 1e-15);
    EXPECT_NEAR(j.p_y1_given_x(0), 0.2, 1e-15);
    EXPECT_THROW(static_cast<void>(j.index_of(0.5)), TransportViolation);
}

TEST(ShiftX, IdentityAndMixture)
{
    const auto j = two_point();
    const auto same = shift_x_marginal(j, j.x_marginal());
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_NEAR(same.mass()[i][0], j.mass()[i][0], 1e-15);
        EXPECT_NEAR(same.mass()[i][1], j.mass()[i][1], 1e-15);
    }
    const std::vector<double> px{0.1, 0.9};
    const auto s = shift_x_marginal(j, px);
    EXPECT_NEAR(s.p_y(1), 0.1 * 0.2 + 0.9 * 0.8, 1e-15);
    EXPECT_NEAR(s.p_y(1), 0.74, 1e-15);
    EXPECT_LE(max_conditional_drift(j, s), 1e-15);
}

TEST(ShiftX, RestrictionAndSupportViolation)
{
    const DiscreteJoint j({0.0, 1.0, 2.0}, {{{0.2, 0.1}, {0.1, 0.2}, {0.3, 0.1}}});
    const std::vector<double> px{0.0, 0.6, 0.4};
    const auto s = shift_x_marginal(j, px);
    EXPECT_EQ(s.support_size(), 2u);
    EXPECT_LE(max_conditional_drift(j, s), 1e-15);

    const std::vector<std::pair<double, double>> outside{{0.0, 0.5}, {7.0, 0.5}};
    EXPECT_THROW(shift_x_marginal(j, outside), TransportViolation);
    const std::vector<double> wrong_size{0.5, 0.5};
    EXPECT_THROW(shift_x_marginal(j, wrong_size), TransportViolation);
    const std::vector<double> bad{0.5, 0.6, -0.1};
    EXPECT_THROW(shift_x_marginal(j, bad), DomainError);
}

TEST(ShiftY, FactorizationAndConditionals)
{
    const auto j = two_point();
    const auto same = shift_y_marginal(j, j.p_y(1));
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(same.mass()[i][1], j.mass()[i][1], 1e-15);

    const DiscreteJoint k({0.0, 1.0, 2.0}, {{{0.5, 0.02}, {0.2, 0.08}, {0.1, 0.1}}});
    ASSERT_NEAR(k.p_y(1), 0.2, 1e-15);
    const auto s = shift_y_marginal(k, 0.5);
    EXPECT_NEAR(s.p_y(1), 0.5, 1e-15);
    for (int y = 0; y <= 1; ++y) {
        const auto a = k.x_given_y(y);
        const auto b = s.x_given_y(y);
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
    }
    const auto t = shift_y_marginal(j, 0.5);
    EXPECT_NEAR(t.mass()[1][1], 0.5 * j.x_given_y(1)[1], 1e-15);

    EXPECT_THROW(shift_y_marginal(j, 0.0), PreconditionError);
    EXPECT_THROW(shift_y_marginal(j, 1.0), PreconditionError);
    const DiscreteJoint degenerate({0.0, 1.0}, {{{0.0, 0.5}, {0.0, 0.5}}});
    EXPECT_THROW(shift_y_marginal(degenerate, 0.5), PreconditionError);
    EXPECT_THROW(apply_shift(j, {ShiftKind::shift_y_marginal, {0.3, 0.6}}), DomainError);
    EXPECT_NEAR(apply_shift(j, {ShiftKind::shift_y_marginal, {0.3, 0.7}}).p_y(1), 0.7, 1e-15);
}

TEST(ShiftX, CompositionEqualsSingleShift)
{
    Stream rng(Seed{201});
    for (int rep = 0; rep < 200; ++rep) {
        const auto j = random_joint(rng);
        const auto p1 = random_dirichlet(j.support_size(), rng);
        const auto p2 = random_dirichlet(j.support_size(), rng);
        const auto twice = shift_x_marginal(shift_x_marginal(j, p1), p2);
        const auto once = shift_x_marginal(j, p2);
        ASSERT_EQ(twice.support_size(), once.support_size());
        for (std::size_t i = 0; i < once.support_size(); ++i) {
            EXPECT_NEAR(twice.mass()[i][0], once.mass()[i][0], 1e-12);
            EXPECT_NEAR(twice.mass()[i][1], once.mass()[i][1], 1e-12);
        }
    }
}

TEST(Shifts, PreserveConditionalsOnRandomJoints)
{
    Stream rng(Seed{202});
    for (int rep = 0; rep < 500; ++rep) {
        const auto j = random_joint(rng);
        const auto sx = shift_x_marginal(j, random_x_marginal(j.support_size(), rng));
        ASSERT_LE(max_conditional_drift(j, sx), 1e-12);
        const auto sy = shift_y_marginal(j, 0.01 + 0.98 * rng.uniform());
        for (int y = 0; y <= 1; ++y) {
            const auto a = j.x_given_y(y);
            const auto b = sy.x_given_y(y);
            for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], 1e-12);
        }
    }
}

TEST(ExactMetrics, Examples)
{
    const auto j = two_point();
    const std::vector<double> taus{0.5};
    EXPECT_EQ(exact_metrics(j, [](double) { return 0.3; }, taus).auc, 0.5);
    EXPECT_NEAR(exact_metrics(j, calibrated_model(j), taus).ici, 0.0, 1e-15);

    // f(x) = x: P(x+=1) = 0.8, P(x-=0) = 0.8.
    const double p1 = j.x_given_y(1)[1];
    const double n0 = j.x_given_y(0)[0];
    const double closed = p1 * n0 + 0.5 * (p1 * (1 - n0) + (1 - p1) * n0);
    const auto m = exact_metrics(j, [](double x) { return x; }, taus);
    EXPECT_NEAR(m.auc, closed, 1e-15);
    EXPECT_NEAR(m.auc, 0.8, 1e-15);
    EXPECT_NEAR(m.sensitivity[0], 0.8, 1e-15);
    EXPECT_NEAR(m.specificity[0], 0.8, 1e-15);

    const DiscreteJoint one_class({0.0, 1.0}, {{{0.0, 0.5}, {0.0, 0.5}}});
    EXPECT_THROW(exact_metrics(one_class, [](double x) { return x; }, taus), UndefinedMetricError);
}

TEST(TheoremCalibration, ContractAndIdentity)
{
    const auto j = two_point();
    const auto f = calibrated_model(j);
    EXPECT_TRUE(verify_theorem_calibration(j, f, j.x_marginal()).pass);
    const RiskFunction off = [](double x) { return 0.1 + 0.5 * x; };
    EXPECT_THROW(verify_theorem_calibration(j, off, j.x_marginal()), PreconditionError);
}

TEST(TheoremDiscrimination, ContractAndIdentity)
{
    const auto j = two_point();
    const RiskFunction f = [](double x) { return 0.3 + 0.2 * x; };
    const auto r = verify_theorem_discrimination(j, f, j.p_y(1));
    EXPECT_TRUE(r.pass);
    EXPECT_EQ(r.pre_metric, r.post_metric);
    EXPECT_THROW(verify_theorem_discrimination(j, f, 1.0), PreconditionError);
}

TEST(Theorems, RandomBatchHolds)
{
    const auto start = std::chrono::steady_clock::now();
    const auto batch = run_theorem_batch(500, Seed{203});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_TRUE(batch.all_pass());
    EXPECT_LE(batch.max_abs_diff(), 1e-12);
    EXPECT_GE(batch.ici_changed_fraction(), 0.95);
    EXPECT_LT(secs, 10.0);
    ASSERT_EQ(batch.calibration.size(), 500u);
    ASSERT_EQ(batch.discrimination.size(), 500u);
}

TEST(Theorems, CorruptedShiftsAreCaught)
{
    // Shifts that also tilt the conditional they are meant to preserve.
    TheoremHooks hooks;
    hooks.x_shift = [](const DiscreteJoint& j, std::span<const double> px) {
        const auto s = shift_x_marginal(j, px);
        auto mass = s.mass();
        for (auto& m : mass) {
            const double t = m[0] + m[1];
            m = {0.7 * m[0] + 0.3 * t * 0.5, 0.7 * m[1] + 0.3 * t * 0.5};
        }
        return DiscreteJoint(s.x_values(), mass);
    };
    hooks.y_shift = [](const DiscreteJoint& j, double py1) {
        const auto s = shift_y_marginal(j, py1);
        auto mass = s.mass();
        const double moved = 0.5 * mass[0][1];
        mass[0][1] -= moved;
        mass.back()[1] += moved;
        return DiscreteJoint(s.x_values(), mass);
    };
    const auto batch = run_theorem_batch(50, Seed{204}, hooks);
    std::size_t cal_fail = 0, dis_fail = 0;
    for (const auto& r : batch.calibration) cal_fail += r.pass ? 0 : 1;
    for (const auto& r : batch.discrimination) dis_fail += r.pass ? 0 : 1;
    EXPECT_FALSE(batch.all_pass());
    EXPECT_GE(cal_fail, 45u);
    EXPECT_GE(dis_fail, 45u);
}

TEST(Theorems, ReportJson)
{
    const auto r = run_discrimination_case(7, Seed{99});
    const nlohmann::json j = r;
    for (const char* key : {"case_id", "seed", "pre_metric", "post_metric", "max_abs_diff", "pass"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_EQ(j.at("case_id").get<std::uint64_t>(), 7u);
    EXPECT_EQ(j.at("seed").get<std::uint64_t>(), 99u);
}

TEST(SampleJoint, EmpiricalAucConverges)
{
    Stream rng(Seed{205});
    for (int rep = 0; rep < 5; ++rep) {
        const auto j = random_joint(rng);
        const auto f = random_model(j, rng);
        const double exact = exact_auc(j, f);
        const auto d = sample_joint(j, 100000, derive_seed(Seed{206}, static_cast<std::uint64_t>(rep)));
        const auto preds = predict(RiskFunction(f), d.features());
        const auto labels = d.labels();
        const auto [npos, nneg] = detail::class_counts(labels);
        // Hanley-McNeil standard error.
        const double a = exact;
        const double q1 = a / (2 - a);
        const double q2 = 2 * a * a / (1 + a);
        const double se = std::sqrt((a * (1 - a) + (npos - 1.0) * (q1 - a * a) + (nneg - 1.0) * (q2 - a * a))
                                    / (static_cast<double>(npos) * static_cast<double>(nneg)));
        EXPECT_LE(std::fabs(auc(preds, labels) - exact), 3.0 * se) << rep;
    }
}

TEST(DiscreteForkTest, ShiftingConfounderMovesBothConditionals)
{
    const DiscreteFork fork{{0.5, 0.5}, {0.0, 1.0}, {{0.8, 0.2}, {0.3, 0.7}}, {0.1, 0.7}};
    const auto before = fork.joint();
    const auto after = fork.with_z_marginal({0.2, 0.8}).joint();
    double y_given_x = 0.0;
    for (std::size_t i = 0; i < 2; ++i) y_given_x = std::max(y_given_x, std::fabs(before.p_y1_given_x(i) - after.p_y1_given_x(i)));
    double x_given_y = 0.0;
    for (int y = 0; y <= 1; ++y) {
        const auto a = before.x_given_y(y);
        const auto b = after.x_given_y(y);
        for (std::size_t i = 0; i < 2; ++i) x_given_y = std::max(x_given_y, std::fabs(a[i] - b[i]));
    }
    EXPECT_GT(y_given_x, 0.01);
    EXPECT_GT(x_given_y, 0.01);
}
