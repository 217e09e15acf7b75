#pragma once

// Command-line front end. `run_cli` is the whole program minus process
// plumbing, so tests drive it in-process.
//
// Exit codes: 0 success, 1 verification or experiment failure,
//             2 usage/config error, 3 I/O or format error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "casemix/datagen.hpp"
#include "casemix/empirical.hpp"
#include "casemix/errors.hpp"
#include "casemix/experiment.hpp"
#include "casemix/metrics.hpp"
#include "casemix/transport.hpp"

namespace casemix::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kIo = 3 };

namespace detail {

inline std::string out_path(const std::string& dir, const std::string& name)
{
    return (std::filesystem::path(dir) / name).string();
}

inline void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

inline void write_text(const std::string& path, const std::string& text)
{
    auto out = csv::open_output(path);
    out << text;
    if (!out) throw IoError("failed writing '" + path + "'");
}

inline std::string dump(const nlohmann::json& j)
{
    return j.dump(2) + "\n";
}

inline std::string fixed(double v, int digits = 4)
{
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

} // namespace detail

struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    std::string config_path;
    std::string out_dir = ".";
};

// Flag > config file > CASEMIX_SEED > built-in default.
inline ExperimentConfig resolve_config(const GlobalOptions& g)
{
    ExperimentConfig cfg;
    bool seed_in_config = false;
    if (!g.config_path.empty()) {
        std::ifstream in(g.config_path, std::ios::binary);
        if (!in) throw IoError("cannot open config '" + g.config_path + "'");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config '" + g.config_path + "' is not valid JSON: " + e.what());
        }
        cfg = config_from_json(j, &seed_in_config);
    }
    if (g.seed) {
        cfg.seed = Seed{*g.seed};
    } else if (!seed_in_config) {
        if (const char* env = std::getenv("CASEMIX_SEED"); env && *env) {
            try {
                std::size_t used = 0;
                const auto v = std::stoull(env, &used);
                if (used != std::string(env).size()) throw std::invalid_argument("trailing");
                cfg.seed = Seed{v};
            } catch (const std::exception&) {
                throw ConfigError(std::string("CASEMIX_SEED is not an unsigned integer: ") + env);
            }
        }
    }
    return cfg;
}

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Case-mix shift simulation and analysis toolkit", "casemix"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--seed", g.seed, "master seed (falls back to CASEMIX_SEED)");
    app.add_option("--config", g.config_path, "JSON experiment config");
    app.add_option("--out", g.out_dir, "output directory")->capture_default_str();

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate one dataset as CSV");
    std::string sim_direction;
    std::string sim_env;
    std::optional<std::size_t> sim_n;
    sim->add_option("--direction", sim_direction, "prognosis | diagnosis | fork");
    sim->add_option("--env", sim_env, "environment name");
    sim->add_option("--n", sim_n, "number of samples (default n_eval)");

    // grid
    auto* grid = app.add_subcommand("grid", "train/evaluate 6 models on 3 environments each");
    std::optional<std::size_t> n_train;
    std::optional<std::size_t> n_eval;
    grid->add_option("--n-train", n_train, "training sample size");
    grid->add_option("--n-eval", n_eval, "evaluation sample size");

    // curves
    auto* curves = app.add_subcommand("curves", "ROC and calibration curves per (train, eval) pair");
    std::size_t bins = 10;
    std::size_t max_roc_points = 1001;
    curves->add_option("--n-train", n_train, "training sample size");
    curves->add_option("--n-eval", n_eval, "evaluation sample size");
    curves->add_option("--bins", bins, "equal-frequency calibration bins")->capture_default_str();
    curves->add_option("--max-roc-points", max_roc_points, "thin ROC files to at most this many points")
        ->capture_default_str();

    // theorems
    auto* theorems = app.add_subcommand("theorems", "exact verification of the invariance theorems");
    std::size_t n_cases = 500;
    bool corrupt = false;
    theorems->add_option("--cases", n_cases, "random cases per theorem")->capture_default_str();
    theorems->add_flag("--corrupt-shift", corrupt, "negative control: use broken shift operators")->group("");

    // empirical
    auto* emp = app.add_subcommand("empirical", "variance-ratio test of relative AUC changes");
    std::string csv_path;
    double confidence = 0.95;
    std::string sidedness = "two-sided";
    bool lenient = false;
    emp->add_option("--csv", csv_path, "validation registry CSV")->required();
    emp->add_option("--confidence", confidence, "confidence level of the ratio interval")->capture_default_str();
    emp->add_option("--sidedness", sidedness, "two-sided | greater")
        ->check(CLI::IsMember({"two-sided", "greater"}))
        ->capture_default_str();
    emp->add_flag("--lenient", lenient, "skip malformed rows instead of failing");

    // densities
    auto* dens = app.add_subcommand("densities", "density and posterior curves per environment");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        auto cfg = resolve_config(g);
        if (n_train) cfg.n_train = *n_train;
        if (n_eval) cfg.n_eval = *n_eval;
        if (!sim_direction.empty()) cfg.direction = parse_direction(sim_direction);
        if (*sim && !sim_env.empty()) {
            cfg.train_env = sim_env;
        }
        cfg.validate();

        if (*sim) {
            const std::size_t n = sim_n.value_or(cfg.n_eval);
            if (n < 1) throw ConfigError("--n must be at least 1");
            const auto seed = derive_seed(cfg.seed, {"simulate", task_name(cfg.direction), cfg.train_env});
            const auto data = generate(cfg, cfg.direction, cfg.train_env, n, seed);
            detail::ensure_dir(g.out_dir);
            const auto path =
                detail::out_path(g.out_dir, "simulate_" + task_name(cfg.direction) + "_" + cfg.train_env + ".csv");
            write_dataset_csv(path, data);
            out << "wrote " << path << "\n"
                << "environment=" << cfg.train_env << " direction=" << task_name(cfg.direction) << " n=" << n
                << " prevalence=" << detail::fixed(data.prevalence()) << "\n";
            return kOk;
        }

        if (*grid || *curves) {
            CellOptions opt;
            opt.keep_curves = static_cast<bool>(*curves);
            opt.calibration_bins = bins;
            if (*curves && bins < 2) throw ConfigError("--bins must be at least 2");
            const auto rows = run_grid(cfg, {Direction::causal, Direction::anti_causal}, opt);
            detail::ensure_dir(g.out_dir);
            if (*grid) {
                detail::write_text(detail::out_path(g.out_dir, "grid.json"), detail::dump(grid_to_json(rows)));
                std::ostringstream csv_text;
                write_grid_csv(csv_text, rows);
                detail::write_text(detail::out_path(g.out_dir, "grid.csv"), csv_text.str());
                out << "direction  train      eval       auc     ici\n";
                for (const auto& r : rows) {
                    out << std::left << std::setw(11) << task_name(r.direction) << std::setw(11) << r.train_env
                        << std::setw(11) << r.eval_env << detail::fixed(r.auc) << "  " << detail::fixed(r.ici) << "\n";
                }
            } else {
                for (const auto& r : rows) {
                    const auto stem = task_name(r.direction) + "_" + r.train_env + "_" + r.eval_env + ".csv";
                    std::ostringstream roc_text;
                    write_roc_csv(roc_text, thin_roc(*r.roc, max_roc_points));
                    detail::write_text(detail::out_path(g.out_dir, "roc_" + stem), roc_text.str());
                    std::ostringstream cal_text;
                    write_calibration_csv(cal_text, *r.calibration);
                    detail::write_text(detail::out_path(g.out_dir, "calibration_" + stem), cal_text.str());
                }
                out << "wrote " << 2 * rows.size() << " curve files to " << g.out_dir << "\n";
            }
            return kOk;
        }

        if (*theorems) {
            if (n_cases < 1) throw ConfigError("--cases must be at least 1");
            TheoremHooks hooks;
            if (corrupt) {
                // Perturb the conditionals the shifts are supposed to preserve.
                hooks.x_shift = [](const DiscreteJoint& j, std::span<const double> px) {
                    auto shifted = shift_x_marginal(j, px);
                    auto mass = shifted.mass();
                    mass[0] = {mass[0][0] * 0.5, mass[0][1] * 1.5};
                    double total = 0.0;
                    for (const auto& m : mass) total += m[0] + m[1];
                    for (auto& m : mass) m = {m[0] / total, m[1] / total};
                    return DiscreteJoint(shifted.x_values(), std::move(mass));
                };
                hooks.y_shift = [](const DiscreteJoint& j, double py1) {
                    auto mass = j.mass();
                    const auto n = mass.size();
                    for (auto& m : mass) m = {(1.0 - py1) / static_cast<double>(n), py1 / static_cast<double>(n)};
                    return DiscreteJoint(j.x_values(), std::move(mass));
                };
            }
            const auto batch = run_theorem_batch(n_cases, cfg.seed, hooks);
            nlohmann::json j{{"n_cases", n_cases},
                             {"seed", cfg.seed.value},
                             {"tolerance", kTheoremTolerance},
                             {"all_pass", batch.all_pass()},
                             {"max_abs_diff", batch.max_abs_diff()},
                             {"ici_changed_fraction", batch.ici_changed_fraction()},
                             {"calibration", batch.calibration},
                             {"discrimination", batch.discrimination}};
            detail::ensure_dir(g.out_dir);
            detail::write_text(detail::out_path(g.out_dir, "theorems.json"), detail::dump(j));
            out << "calibration cases: " << batch.calibration.size()
                << "  discrimination cases: " << batch.discrimination.size() << "\n"
                << "max_abs_diff=" << batch.max_abs_diff() << " all_pass=" << (batch.all_pass() ? "true" : "false")
                << "\n";
            return batch.all_pass() ? kOk : kFailure;
        }

        if (*emp) {
            const auto ingest = ingest_csv(csv_path, !lenient);
            for (const auto& r : ingest.rejected) {
                err << "warning: " << csv_path << " line " << r.line << ": " << r.reason << "\n";
            }
            const auto report = analyze_records(ingest.records, confidence,
                                                sidedness == "greater" ? Sidedness::greater : Sidedness::two_sided,
                                                ingest.rejected.size());
            const auto text = detail::dump(to_json(report));
            detail::ensure_dir(g.out_dir);
            detail::write_text(detail::out_path(g.out_dir, "empirical.json"), text);
            out << text;
            return kOk;
        }

        if (*dens) {
            const auto t = compute_densities(cfg);
            detail::ensure_dir(g.out_dir);
            std::ostringstream a;
            a << "env,p,density\n";
            for (const auto& [env, p, d] : t.risk_marginal) {
                a << env << ',' << csv::format_double(p) << ',' << csv::format_double(d) << '\n';
            }
            detail::write_text(detail::out_path(g.out_dir, "density_risk_marginal.csv"), a.str());
            std::ostringstream b;
            b << "task,env,y,x,density\n";
            for (const auto& [task, env, y, x, d] : t.class_conditional) {
                b << task << ',' << env << ',' << y << ',' << csv::format_double(x) << ',' << csv::format_double(d)
                  << '\n';
            }
            detail::write_text(detail::out_path(g.out_dir, "density_class_conditional.csv"), b.str());
            std::ostringstream c;
            c << "task,env,x,risk\n";
            for (const auto& [task, env, x, r] : t.posterior) {
                c << task << ',' << env << ',' << csv::format_double(x) << ',' << csv::format_double(r) << '\n';
            }
            detail::write_text(detail::out_path(g.out_dir, "density_posterior.csv"), c.str());
            out << "wrote density curves to " << g.out_dir << "\n";
            return kOk;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kUsage;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << "\n";
        return kIo;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kUsage;
}

} // namespace casemix::cli
