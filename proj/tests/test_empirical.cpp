#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "casemix/empirical.hpp"
#include "oracles/oracles.hpp"

using namespace casemix;

namespace {

std::vector<double> normal_draws(std::size_t n, double variance, Stream& rng)
{
    std::vector<double> out(n);
    for (auto& v : out) v = sample_normal(0.0, std::sqrt(variance), rng);
    return out;
}

} // namespace

TEST(RelativeDelta, Examples)
{
    EXPECT_DOUBLE_EQ(relative_delta(0.75, 0.75), 0.0);
    EXPECT_DOUBLE_EQ(relative_delta(0.75, 0.625), -0.5);
    EXPECT_NEAR(relative_delta(0.70, 0.80), 0.5, 1e-15);
    EXPECT_THROW(relative_delta(0.5, 0.7), NonInformativeBaselineError);
    EXPECT_THROW(relative_delta(0.3, 0.7), NonInformativeBaselineError);
}

TEST(RelativeDelta, MatchesFormulaOnRandomInputs)
{
    Stream rng(Seed{301});
    for (int i = 0; i < 1000; ++i) {
        const double a0 = 0.5 + 0.5 * rng.uniform();
        const double a1 = rng.uniform();
        const double inc = 0.1 * (rng.uniform() - 0.5);
        const double d = relative_delta(a0, a1);
        EXPECT_NEAR(d, (a1 - a0) / (a0 - 0.5), 1e-12);
        // A common increment to both AUCs moves only the denominator.
        if (a0 + inc > 0.5) {
            EXPECT_NEAR(relative_delta(a0 + inc, a1 + inc), (a1 - a0) / (a0 + inc - 0.5), 1e-9);
        }
    }
}

TEST(SampleVariance, Examples)
{
    EXPECT_EQ(sample_variance(std::vector<double>{3.5, 3.5, 3.5}), 0.0);
    EXPECT_DOUBLE_EQ(sample_variance(std::vector<double>{0, 2}), 2.0);
    EXPECT_NEAR(sample_variance(std::vector<double>{1, 2, 3, 4}), 5.0 / 3.0, 1e-15);
    EXPECT_THROW(sample_variance(std::vector<double>{1.0}), ContractError);
}

TEST(VarianceRatio, IdenticalListsGiveRatioOne)
{
    const std::vector<double> a{0.1, -0.3, 0.25, 0.0, 0.6};
    const auto t = variance_ratio_test(a, a);
    EXPECT_DOUBLE_EQ(t.ratio, 1.0);
    EXPECT_NEAR(t.p_value, 1.0, 1e-9);
    EXPECT_LE(t.ci_low, t.ratio);
    EXPECT_GE(t.ci_high, t.ratio);
}

TEST(VarianceRatio, FixedSmallCaseAgainstQuadrature)
{
    // Lists of 11 with sample variances 8 and 2.
    std::vector<double> a, b;
    for (int i = 0; i < 11; ++i) {
        a.push_back(i - 5.0);
        b.push_back((i - 5.0) * 0.5);
    }
    const double sa = sample_variance(a);
    const double sb = sample_variance(b);
    for (auto& v : a) v *= std::sqrt(8.0 / sa);
    for (auto& v : b) v *= std::sqrt(2.0 / sb);
    const auto t = variance_ratio_test(a, b);
    EXPECT_NEAR(t.ratio, 4.0, 1e-12);
    EXPECT_EQ(t.df_a, 10);
    EXPECT_EQ(t.df_b, 10);
    const auto tails = oracle::f_tails(4.0, 10, 10);
    EXPECT_NEAR(t.p_value, 2.0 * std::min(tails.lower, tails.upper), 1e-9);
    EXPECT_NEAR(t.p_value, 0.039163, 1e-6);
    EXPECT_NEAR(t.ci_low, 4.0 / oracle::f_quantile(0.975, 10, 10), 1e-7);
    EXPECT_NEAR(t.ci_high, 4.0 / oracle::f_quantile(0.025, 10, 10), 1e-7);

    const auto g = variance_ratio_test(a, b, 0.95, Sidedness::greater);
    EXPECT_NEAR(g.p_value, tails.upper, 1e-9);
}

TEST(VarianceRatio, SwappingGroupsIsReciprocal)
{
    Stream rng(Seed{302});
    for (int rep = 0; rep < 200; ++rep) {
        const auto a = normal_draws(2 + rng.next_u64() % 40, 1.0 + rng.uniform(), rng);
        const auto b = normal_draws(2 + rng.next_u64() % 40, 1.0 + rng.uniform(), rng);
        const auto ab = variance_ratio_test(a, b);
        const auto ba = variance_ratio_test(b, a);
        EXPECT_NEAR(ab.ratio * ba.ratio, 1.0, 1e-12);
        EXPECT_NEAR(ab.p_value, ba.p_value, 1e-9);
        EXPECT_NEAR(ab.ci_low * ba.ci_high, 1.0, 1e-8);
    }
}

TEST(VarianceRatio, Errors)
{
    const std::vector<double> flat{1.0, 1.0, 1.0};
    const std::vector<double> spread{0.0, 1.0, 2.0};
    EXPECT_THROW(variance_ratio_test(spread, flat), DegenerateVarianceError);
    EXPECT_THROW(variance_ratio_test(spread, std::vector<double>{1.0}), ContractError);
    EXPECT_THROW(variance_ratio_test(spread, spread, 1.0), DomainError);
}

TEST(VarianceRatio, SyntheticReplicationLandsInReportedInterval)
{
    int inside = 0;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
        Stream rng(derive_seed(Seed{303}, rep));
        const auto prog = normal_draws(1159, 0.019, rng);
        const auto diag = normal_draws(16, 0.019 / 8.2, rng);
        const auto t = variance_ratio_test(prog, diag);
        inside += (t.ratio >= 3.41 && t.ratio <= 15.10) ? 1 : 0;
    }
    EXPECT_GE(inside, 90);
}

TEST(VarianceRatio, NullPValuesAreUniform)
{
    Stream rng(Seed{304});
    std::vector<double> ps;
    for (int rep = 0; rep < 1000; ++rep) {
        const auto a = normal_draws(20, 0.5, rng);
        const auto b = normal_draws(12, 0.5, rng);
        ps.push_back(variance_ratio_test(a, b).p_value);
    }
    EXPECT_LE(oracle::ks_distance(ps, [](double p) { return p; }), 0.05);
}

TEST(Ingest, EmptyAndSingleRow)
{
    std::istringstream empty("model_id,model_type,auc_original,auc_validation\n");
    EXPECT_TRUE(ingest_csv(empty).records.empty());

    std::istringstream one("\xEF\xBB\xBFmodel_id,model_type,auc_original,auc_validation\r\nM1,Prognostic,0.81,0.74\r\n");
    const auto r = ingest_csv(one);
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_EQ(r.records[0].model_id, "M1");
    EXPECT_EQ(r.records[0].model_type, ModelType::prognostic);
    EXPECT_EQ(r.records[0].auc_original, 0.81);
    EXPECT_EQ(r.records[0].auc_validation, 0.74);
}

TEST(Ingest, StrictAndLenient)
{
    const std::string text = "model_id,model_type,auc_original,auc_validation\n"
                             "A,diagnostic,0.8,0.78\n"
                             "B,therapeutic,0.8,0.7\n"
                             "C,prognostic,1.2,0.7\n"
                             "D,prognostic,0.7\n"
                             "E,prognostic,0.7,0.66\n";
    std::istringstream strict(text);
    try {
        ingest_csv(strict, true);
        FAIL() << "strict ingest accepted a bad row";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    std::istringstream lenient(text);
    const auto r = ingest_csv(lenient, false);
    EXPECT_EQ(r.records.size(), 2u);
    ASSERT_EQ(r.rejected.size(), 3u);
    EXPECT_EQ(r.rejected[0].line, 3u);
    EXPECT_EQ(r.rejected[2].line, 5u);

    std::istringstream bad_header("id,type,a0,a1\n");
    EXPECT_THROW(ingest_csv(bad_header), FormatError);
    EXPECT_THROW(ingest_csv(std::string("/nonexistent/registry.csv")), IoError);
}

TEST(Analyze, ExcludesNonInformativeBaselines)
{
    std::vector<ValidationRecord> recs{
        {"a", ModelType::prognostic, 0.80, 0.70}, {"b", ModelType::prognostic, 0.70, 0.72},
        {"c", ModelType::prognostic, 0.50, 0.60}, {"d", ModelType::diagnostic, 0.90, 0.88},
        {"e", ModelType::diagnostic, 0.85, 0.86}, {"f", ModelType::diagnostic, 0.45, 0.60},
        {"g", ModelType::prognostic, 0.75, 0.60}};
    const auto rep = analyze_records(recs, 0.95, Sidedness::two_sided, 2);
    EXPECT_EQ(rep.n_prognostic, 3u);
    EXPECT_EQ(rep.n_diagnostic, 2u);
    EXPECT_EQ(rep.excluded_rows, 4u);
    const std::vector<double> prog{relative_delta(0.8, 0.7), relative_delta(0.7, 0.72), relative_delta(0.75, 0.6)};
    EXPECT_NEAR(rep.test.var_a, sample_variance(prog), 1e-15);
    const auto j = to_json(rep);
    for (const char* key : {"n_prognostic", "n_diagnostic", "var_prognostic", "var_diagnostic", "ratio", "ci_low",
                            "ci_high", "p_value", "excluded_rows"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
}
