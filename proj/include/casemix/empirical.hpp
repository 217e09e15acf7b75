#pragma once

// Variance comparison of relative AUC changes between prognostic and
// diagnostic models in external validation studies.
//
// Each validation contributes one independent delta sample, even when a model
// was validated several times; within-model correlation is not modelled.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "casemix/csv.hpp"
#include "casemix/errors.hpp"
#include "casemix/numerics.hpp"

namespace casemix {

enum class ModelType { diagnostic, prognostic };

inline std::string to_string(ModelType t)
{
    return t == ModelType::diagnostic ? "diagnostic" : "prognostic";
}

struct ValidationRecord {
    std::string model_id;
    ModelType model_type = ModelType::prognostic;
    double auc_original = 0.5;
    double auc_validation = 0.5;
};

// Change in discrimination above chance, relative to the original study.
inline double relative_delta(double auc0, double auc1)
{
    if (!(auc0 > 0.5)) throw NonInformativeBaselineError("relative_delta: original AUC must exceed 0.5");
    return ((auc1 - 0.5) - (auc0 - 0.5)) / (auc0 - 0.5);
}

// Unbiased sample variance, two-pass.
inline double sample_variance(std::span<const double> xs)
{
    if (xs.size() < 2) throw ContractError("sample_variance: need at least two values");
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    double comp = 0.0;
    for (double x : xs) {
        ss += (x - mean) * (x - mean);
        comp += x - mean;
    }
    return (ss - comp * comp / static_cast<double>(xs.size())) / static_cast<double>(xs.size() - 1);
}

enum class Sidedness { two_sided, greater };

struct VarianceTest {
    double var_a = 0.0;
    double var_b = 0.0;
    double ratio = 1.0;
    long df_a = 1;
    long df_b = 1;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double p_value = 1.0;
};

// F-test of var(a) / var(b). Two-sided p = 2 min(F(ratio), 1 - F(ratio));
// "greater" tests var(a) > var(b) with the upper tail only. The interval is
// (ratio / q_{1-alpha/2}, ratio / q_{alpha/2}) with quantiles of F(df_a, df_b).
inline VarianceTest variance_ratio_test(std::span<const double> a, std::span<const double> b, double confidence = 0.95,
                                        Sidedness sidedness = Sidedness::two_sided)
{
    if (a.size() < 2 || b.size() < 2) throw ContractError("variance_ratio_test: each group needs at least two values");
    if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("variance_ratio_test: confidence must lie in (0, 1)");
    VarianceTest t;
    t.var_a = sample_variance(a);
    t.var_b = sample_variance(b);
    if (!(t.var_b > 0.0)) throw DegenerateVarianceError("variance_ratio_test: denominator variance is zero");
    t.ratio = t.var_a / t.var_b;
    t.df_a = static_cast<long>(a.size()) - 1;
    t.df_b = static_cast<long>(b.size()) - 1;
    const FParams df{t.df_a, t.df_b};
    const double alpha = 1.0 - confidence;
    t.ci_low = t.ratio / f_quantile(1.0 - alpha / 2.0, df);
    t.ci_high = t.ratio / f_quantile(alpha / 2.0, df);
    const double upper = f_sf(t.ratio, df);
    if (sidedness == Sidedness::greater) {
        t.p_value = upper;
    } else {
        const double lower = f_cdf(t.ratio, df);
        t.p_value = std::min(1.0, 2.0 * std::min(lower, upper));
    }
    return t;
}

// ---------------------------------------------------------------------------
// Registry CSV: model_id,model_type,auc_original,auc_validation
// ---------------------------------------------------------------------------

struct RowIssue {
    std::size_t line = 0;
    std::string reason;
};

struct IngestResult {
    std::vector<ValidationRecord> records;
    std::vector<RowIssue> rejected;  // rows failing parsing or invariants (lenient mode)
};

inline constexpr const char* kRegistryHeader = "model_id,model_type,auc_original,auc_validation";

inline IngestResult ingest_csv(std::istream& in, bool strict = true)
{
    std::string line;
    if (!std::getline(in, line)) throw FormatError("registry CSV line 1: missing header");
    std::string header(csv::strip_cr(line));
    if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) header.erase(0, 3);
    if (header != kRegistryHeader) {
        throw FormatError(std::string("registry CSV line 1: header must be '") + kRegistryHeader + "'");
    }
    IngestResult result;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const auto row = csv::strip_cr(line);
        if (row.empty()) continue;
        std::string problem;
        ValidationRecord rec;
        const auto f = csv::split(row);
        if (f.size() != 4) {
            problem = "expected 4 fields, found " + std::to_string(f.size());
        } else {
            rec.model_id = f[0];
            std::string type = f[1];
            std::transform(type.begin(), type.end(), type.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            const auto a0 = csv::parse_double(f[2]);
            const auto a1 = csv::parse_double(f[3]);
            if (type == "diagnostic") {
                rec.model_type = ModelType::diagnostic;
            } else if (type == "prognostic") {
                rec.model_type = ModelType::prognostic;
            } else {
                problem = "model_type must be diagnostic or prognostic";
            }
            if (problem.empty() && (!a0 || !a1)) problem = "unparseable AUC";
            if (problem.empty() && !(*a0 >= 0.0 && *a0 <= 1.0 && *a1 >= 0.0 && *a1 <= 1.0)) {
                problem = "AUC outside [0, 1]";
            }
            if (problem.empty()) {
                rec.auc_original = *a0;
                rec.auc_validation = *a1;
            }
        }
        if (!problem.empty()) {
            if (strict) throw FormatError("registry CSV line " + std::to_string(line_no) + ": " + problem);
            result.rejected.push_back({line_no, problem});
            continue;
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

inline IngestResult ingest_csv(const std::string& path, bool strict = true)
{
    auto in = csv::open_input(path);
    return ingest_csv(in, strict);
}

struct DeltaRecord {
    std::string model_id;
    ModelType model_type = ModelType::prognostic;
    double delta = 0.0;
};

struct EmpiricalReport {
    std::vector<DeltaRecord> deltas;
    std::size_t n_prognostic = 0;
    std::size_t n_diagnostic = 0;
    std::size_t excluded_rows = 0;  // AUC_0 <= 0.5 plus rejected rows
    VarianceTest test;
};

// Prognostic deltas form the numerator group.
inline EmpiricalReport analyze_records(const std::vector<ValidationRecord>& records, double confidence = 0.95,
                                       Sidedness sidedness = Sidedness::two_sided, std::size_t rejected_rows = 0)
{
    EmpiricalReport rep;
    rep.excluded_rows = rejected_rows;
    std::vector<double> prog;
    std::vector<double> diag;
    for (const auto& r : records) {
        if (!(r.auc_original > 0.5)) {
            ++rep.excluded_rows;
            continue;
        }
        const double d = relative_delta(r.auc_original, r.auc_validation);
        rep.deltas.push_back({r.model_id, r.model_type, d});
        (r.model_type == ModelType::prognostic ? prog : diag).push_back(d);
    }
    rep.n_prognostic = prog.size();
    rep.n_diagnostic = diag.size();
    rep.test = variance_ratio_test(prog, diag, confidence, sidedness);
    return rep;
}

inline nlohmann::json to_json(const EmpiricalReport& rep, bool include_deltas = true)
{
    nlohmann::json j{{"n_prognostic", rep.n_prognostic},
                     {"n_diagnostic", rep.n_diagnostic},
                     {"var_prognostic", rep.test.var_a},
                     {"var_diagnostic", rep.test.var_b},
                     {"ratio", rep.test.ratio},
                     {"ci_low", rep.test.ci_low},
                     {"ci_high", rep.test.ci_high},
                     {"p_value", rep.test.p_value},
                     {"excluded_rows", rep.excluded_rows}};
    if (include_deltas) {
        auto arr = nlohmann::json::array();
        for (const auto& d : rep.deltas) {
            arr.push_back({{"model_id", d.model_id}, {"model_type", to_string(d.model_type)}, {"delta", d.delta}});
        }
        j["deltas"] = std::move(arr);
    }
    return j;
}

} // namespace casemix
