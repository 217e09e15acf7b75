#pragma once

// Simulation experiments: train a model in one environment, evaluate it in
// every environment, for the prognosis and diagnosis mechanisms.
//
// Each cell draws from a sub-seed derived from (master seed, direction,
// train env[, eval env]), so results do not depend on execution order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <iterator>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "casemix/datagen.hpp"
#include "casemix/errors.hpp"
#include "casemix/metrics.hpp"
#include "casemix/model.hpp"
#include "casemix/numerics.hpp"

namespace casemix {

inline constexpr std::uint64_t kDefaultSeed = 20240517;

struct ExperimentConfig {
    std::vector<PrognosisEnvSpec> prognosis_envs{{2.0, 20.0, "screening"}, {5.0, 10.0, "gp"}, {10.0, 20.0, "hospital"}};
    std::vector<DiagnosisEnvSpec> diagnosis_envs{{0.2, "screening"}, {1.0 / 3.0, "gp"}, {0.5, "hospital"}};
    std::vector<ForkEnvSpec> fork_envs{{-1.0, "screening"}, {0.0, "gp"}, {1.0, "hospital"}};
    std::string train_env = "screening";
    std::size_t n_train = 50000;
    std::size_t n_eval = 200000;
    Seed seed{kDefaultSeed};
    Direction direction = Direction::causal;

    [[nodiscard]] std::vector<std::string> env_names(Direction d) const
    {
        std::vector<std::string> out;
        switch (d) {
        case Direction::causal:
            for (const auto& e : prognosis_envs) out.push_back(e.label);
            break;
        case Direction::anti_causal:
            for (const auto& e : diagnosis_envs) out.push_back(e.label);
            break;
        case Direction::confounded:
            for (const auto& e : fork_envs) out.push_back(e.label);
            break;
        }
        return out;
    }

    [[nodiscard]] bool has_env(Direction d, const std::string& name) const
    {
        const auto names = env_names(d);
        return std::find(names.begin(), names.end(), name) != names.end();
    }

    void validate() const
    {
        if (n_train < 2 || n_eval < 2) throw ConfigError("sample sizes must be at least 2");
        try {
            for (const auto& e : prognosis_envs) e.validate();
            for (const auto& e : diagnosis_envs) e.validate();
            for (const auto& e : fork_envs) e.validate();
        } catch (const DomainError& err) {
            throw ConfigError(err.what());
        }
        for (auto d : {Direction::causal, Direction::anti_causal, Direction::confounded}) {
            auto names = env_names(d);
            if (names.empty()) throw ConfigError(std::string("no environments for direction ") + std::string(to_string(d)));
            std::sort(names.begin(), names.end());
            if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
                throw ConfigError("duplicate environment name");
            }
        }
        if (!has_env(direction, train_env)) {
            throw ConfigError("unknown training environment '" + train_env + "'");
        }
    }
};

inline Direction parse_direction(const std::string& s)
{
    if (s == "prognosis" || s == "causal") return Direction::causal;
    if (s == "diagnosis" || s == "anti-causal" || s == "anticausal") return Direction::anti_causal;
    if (s == "fork" || s == "confounded") return Direction::confounded;
    throw ConfigError("unknown direction '" + s + "' (expected prognosis, diagnosis or fork)");
}

inline std::string task_name(Direction d)
{
    switch (d) {
    case Direction::causal: return "prognosis";
    case Direction::anti_causal: return "diagnosis";
    case Direction::confounded: return "fork";
    }
    return "unknown";
}

// JSON layout:
// {
//   "environments": {
//     "prognosis": [{"label": "screening", "alpha": 2, "beta": 20}, ...],
//     "diagnosis": [{"label": "screening", "prevalence": 0.2}, ...],
//     "fork":      [{"label": "screening", "mu_z": -1}, ...]
//   },
//   "train_env": "screening", "n_train": 50000, "n_eval": 200000,
//   "seed": 1, "direction": "prognosis"
// }
// Every key is optional; omitted keys keep their defaults.
inline ExperimentConfig config_from_json(const nlohmann::json& j, bool* seed_given = nullptr)
{
    ExperimentConfig cfg;
    try {
        if (j.contains("environments")) {
            const auto& envs = j.at("environments");
            if (envs.contains("prognosis")) {
                cfg.prognosis_envs.clear();
                for (const auto& e : envs.at("prognosis")) {
                    cfg.prognosis_envs.push_back({e.at("alpha").get<double>(), e.at("beta").get<double>(),
                                                  e.at("label").get<std::string>()});
                }
            }
            if (envs.contains("diagnosis")) {
                cfg.diagnosis_envs.clear();
                for (const auto& e : envs.at("diagnosis")) {
                    cfg.diagnosis_envs.push_back({e.at("prevalence").get<double>(), e.at("label").get<std::string>()});
                }
            }
            if (envs.contains("fork")) {
                cfg.fork_envs.clear();
                for (const auto& e : envs.at("fork")) {
                    cfg.fork_envs.push_back({e.at("mu_z").get<double>(), e.at("label").get<std::string>()});
                }
            }
        }
        if (j.contains("train_env")) cfg.train_env = j.at("train_env").get<std::string>();
        if (j.contains("n_train")) cfg.n_train = j.at("n_train").get<std::size_t>();
        if (j.contains("n_eval")) cfg.n_eval = j.at("n_eval").get<std::size_t>();
        if (j.contains("seed")) cfg.seed = Seed{j.at("seed").get<std::uint64_t>()};
        if (seed_given) *seed_given = j.contains("seed");
        if (j.contains("direction")) cfg.direction = parse_direction(j.at("direction").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid config: ") + e.what());
    }
    return cfg;
}

// Generate n samples from the named environment of the given mechanism.
inline Dataset generate(const ExperimentConfig& cfg, Direction d, const std::string& env, std::size_t n, Seed seed)
{
    switch (d) {
    case Direction::causal:
        for (const auto& e : cfg.prognosis_envs) {
            if (e.label == env) return gen_prognosis(e, n, seed);
        }
        break;
    case Direction::anti_causal:
        for (const auto& e : cfg.diagnosis_envs) {
            if (e.label == env) return gen_diagnosis(e, n, seed);
        }
        break;
    case Direction::confounded:
        for (const auto& e : cfg.fork_envs) {
            if (e.label == env) return gen_fork(e, n, seed);
        }
        break;
    }
    throw ConfigError("unknown " + task_name(d) + " environment '" + env + "'");
}

// P(Y=1 | X=x) in the named environment.
inline RiskFunction oracle_for(const ExperimentConfig& cfg, Direction d, const std::string& env)
{
    switch (d) {
    case Direction::causal:
        for (const auto& e : cfg.prognosis_envs) {
            if (e.label == env) return oracle_model(e);
        }
        break;
    case Direction::anti_causal:
        for (const auto& e : cfg.diagnosis_envs) {
            if (e.label == env) return oracle_model(e);
        }
        break;
    case Direction::confounded:
        for (const auto& e : cfg.fork_envs) {
            if (e.label == env) return oracle_model(e);
        }
        break;
    }
    throw ConfigError("unknown " + task_name(d) + " environment '" + env + "'");
}

inline Seed train_seed(Seed master, Direction d, const std::string& train_env)
{
    return derive_seed(master, {"train", task_name(d), train_env});
}

inline Seed eval_seed(Seed master, Direction d, const std::string& train_env, const std::string& eval_env)
{
    return derive_seed(master, {"eval", task_name(d), train_env, eval_env});
}

// True risks for evaluation. The fork stores risk given the confounder, so the
// risk given x comes from the numeric posterior.
inline std::vector<double> evaluation_risks(const ExperimentConfig& cfg, const Dataset& data)
{
    if (data.direction != Direction::confounded) return data.true_risks();
    const auto oracle = oracle_for(cfg, Direction::confounded, data.environment_label);
    return predict(oracle, data.features());
}

struct CellResult {
    Direction direction = Direction::causal;
    std::string train_env;
    std::string eval_env;
    LogisticModel model;
    double auc = 0.0;
    double ici = 0.0;
    double citl = 0.0;
    std::optional<RocCurve> roc;
    std::optional<CalibrationCurve> calibration;
};

struct CellOptions {
    bool keep_curves = false;
    std::size_t calibration_bins = 10;
};

class CellFailure : public Error {
public:
    using Error::Error;
};

// Fit in train_env and evaluate in every environment of the mechanism.
inline std::vector<CellResult> run_model_row(const ExperimentConfig& cfg, Direction d, const std::string& train_env,
                                             const CellOptions& opt = {})
{
    std::vector<CellResult> rows;
    LogisticModel model;
    try {
        const auto train = generate(cfg, d, train_env, cfg.n_train, train_seed(cfg.seed, d, train_env));
        model = fit_logistic(train).first;
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw CellFailure("cell " + task_name(d) + "/" + train_env + ": fit failed: " + e.what());
    }
    for (const auto& eval_env : cfg.env_names(d)) {
        try {
            const auto eval = generate(cfg, d, eval_env, cfg.n_eval, eval_seed(cfg.seed, d, train_env, eval_env));
            const auto xs = eval.features();
            const auto ys = eval.labels();
            const auto preds = predict(model, xs);
            const auto risks = evaluation_risks(cfg, eval);
            CellResult r{d, train_env, eval_env, model, auc(preds, ys), ici_oracle(preds, risks),
                         calibration_in_the_large(preds, ys), std::nullopt, std::nullopt};
            if (opt.keep_curves) {
                r.roc = roc_curve(preds, ys);
                r.calibration = calibration_curve(preds, ys, opt.calibration_bins);
            }
            rows.push_back(std::move(r));
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw CellFailure("cell " + task_name(d) + "/" + train_env + "->" + eval_env + ": " + e.what());
        }
    }
    return rows;
}

// All (direction, train_env, eval_env) cells for the given mechanisms; models run concurrently.
inline std::vector<CellResult> run_grid(const ExperimentConfig& cfg,
                                        const std::vector<Direction>& directions = {Direction::causal,
                                                                                    Direction::anti_causal},
                                        const CellOptions& opt = {})
{
    cfg.validate();
    std::vector<std::future<std::vector<CellResult>>> jobs;
    for (auto d : directions) {
        for (const auto& train_env : cfg.env_names(d)) {
            jobs.push_back(std::async(std::launch::async, [&cfg, d, train_env, &opt] {
                return run_model_row(cfg, d, train_env, opt);
            }));
        }
    }
    std::vector<CellResult> out;
    for (auto& j : jobs) {
        auto rows = j.get();
        std::move(rows.begin(), rows.end(), std::back_inserter(out));
    }
    return out;
}

inline nlohmann::json grid_to_json(const std::vector<CellResult>& rows)
{
    auto arr = nlohmann::json::array();
    for (const auto& r : rows) {
        arr.push_back({{"direction", task_name(r.direction)},
                       {"train_env", r.train_env},
                       {"eval_env", r.eval_env},
                       {"auc", r.auc},
                       {"ici", r.ici},
                       {"citl", r.citl},
                       {"intercept", r.model.intercept},
                       {"slope", r.model.slope}});
    }
    return arr;
}

inline void write_grid_csv(std::ostream& out, const std::vector<CellResult>& rows)
{
    out << "direction,train_env,eval_env,auc,ici,citl\n";
    for (const auto& r : rows) {
        out << task_name(r.direction) << ',' << r.train_env << ',' << r.eval_env << ',' << csv::format_double(r.auc)
            << ',' << csv::format_double(r.ici) << ',' << csv::format_double(r.citl) << '\n';
    }
}

// Keep at most max_points points, always including both end points.
inline RocCurve thin_roc(const RocCurve& curve, std::size_t max_points)
{
    if (max_points < 2 || curve.points.size() <= max_points) return curve;
    RocCurve out;
    const std::size_t last = curve.points.size() - 1;
    for (std::size_t k = 0; k < max_points; ++k) {
        const std::size_t idx = (k * last) / (max_points - 1);
        out.points.push_back(curve.points[idx]);
    }
    return out;
}

// Piecewise-linear TPR at a given FPR.
inline double roc_tpr_at(const RocCurve& curve, double fpr)
{
    const auto& p = curve.points;
    if (p.empty()) throw ContractError("roc_tpr_at: empty curve");
    auto it = std::lower_bound(p.begin(), p.end(), fpr, [](const RocPoint& a, double v) { return a.fpr < v; });
    if (it == p.begin()) return it->tpr;
    if (it == p.end()) return p.back().tpr;
    const auto& b = *it;
    const auto& a = *(it - 1);
    if (b.fpr == a.fpr) return b.tpr;
    const double w = (fpr - a.fpr) / (b.fpr - a.fpr);
    return a.tpr + w * (b.tpr - a.tpr);
}

inline double roc_sup_distance(const RocCurve& a, const RocCurve& b, std::size_t grid = 2001)
{
    double d = 0.0;
    for (std::size_t i = 0; i < grid; ++i) {
        const double f = static_cast<double>(i) / static_cast<double>(grid - 1);
        d = std::max(d, std::fabs(roc_tpr_at(a, f) - roc_tpr_at(b, f)));
    }
    return d;
}

// ---------------------------------------------------------------------------
// Density curves
// ---------------------------------------------------------------------------

struct DensityTables {
    // env, p, Beta(alpha_e, beta_e) density of the outcome probability
    std::vector<std::tuple<std::string, double, double>> risk_marginal;
    // task, env, y, x, density of X given Y=y
    std::vector<std::tuple<std::string, std::string, int, double, double>> class_conditional;
    // task, env, x, P(Y=1|X=x)
    std::vector<std::tuple<std::string, std::string, double, double>> posterior;
};

inline constexpr std::size_t kRiskGridPoints = 10001;
inline constexpr double kFeatureGridLow = -8.0;
inline constexpr double kFeatureGridHigh = 8.0;
inline constexpr std::size_t kFeatureGridPoints = 1601;

inline double feature_grid(std::size_t i)
{
    return kFeatureGridLow + (kFeatureGridHigh - kFeatureGridLow) * static_cast<double>(i)
                                 / static_cast<double>(kFeatureGridPoints - 1);
}

// Density of x = logit(P), P ~ Beta(a, b).
inline double prognosis_feature_density(double x, double a, double b)
{
    const double p = expit(x);
    return beta_pdf(p, a, b) * p * (1.0 - p);
}

inline DensityTables compute_densities(const ExperimentConfig& cfg)
{
    cfg.validate();
    DensityTables t;
    for (const auto& e : cfg.prognosis_envs) {
        for (std::size_t i = 0; i < kRiskGridPoints; ++i) {
            const double p = static_cast<double>(i) / static_cast<double>(kRiskGridPoints - 1);
            t.risk_marginal.emplace_back(e.label, p, beta_pdf(p, e.alpha, e.beta));
        }
    }
    for (const auto& e : cfg.prognosis_envs) {
        const double py1 = e.alpha / (e.alpha + e.beta);
        for (int y = 0; y <= 1; ++y) {
            for (std::size_t i = 0; i < kFeatureGridPoints; ++i) {
                const double x = feature_grid(i);
                const double r = expit(x);
                const double lik = y == 1 ? r : 1.0 - r;
                const double prior = y == 1 ? py1 : 1.0 - py1;
                t.class_conditional.emplace_back("prognosis", e.label, y, x,
                                                 prognosis_feature_density(x, e.alpha, e.beta) * lik / prior);
            }
        }
    }
    for (const auto& e : cfg.diagnosis_envs) {
        for (int y = 0; y <= 1; ++y) {
            for (std::size_t i = 0; i < kFeatureGridPoints; ++i) {
                const double x = feature_grid(i);
                t.class_conditional.emplace_back("diagnosis", e.label, y, x, normal_pdf(x - y));
            }
        }
    }
    for (const auto& e : cfg.prognosis_envs) {
        for (std::size_t i = 0; i < kFeatureGridPoints; ++i) {
            t.posterior.emplace_back("prognosis", e.label, feature_grid(i), expit(feature_grid(i)));
        }
    }
    for (const auto& e : cfg.diagnosis_envs) {
        for (std::size_t i = 0; i < kFeatureGridPoints; ++i) {
            const double x = feature_grid(i);
            t.posterior.emplace_back("diagnosis", e.label, x, diagnosis_posterior(x, e.prevalence));
        }
    }
    for (const auto& e : cfg.fork_envs) {
        for (std::size_t i = 0; i < kFeatureGridPoints; ++i) {
            const double x = feature_grid(i);
            t.posterior.emplace_back("fork", e.label, x, fork_posterior(x, e.mu_z));
        }
    }
    return t;
}

} // namespace casemix
