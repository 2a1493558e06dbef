// Command-line front end: fit, evar, frontier, kkt-check, simulate.
//
// Conventions, printed with every report: the CLI exposes a confidence level
// (e.g. --alpha 0.95 for the 95% level) and maps it to the risk functional's
// parameter alpha = 1 - confidence. Returns are gains; EVaR and VaR are loss
// quantities (positive = loss).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "evarport/data_io.hpp"
#include "evarport/estimate.hpp"
#include "evarport/json_io.hpp"
#include "evarport/model.hpp"
#include "evarport/optimize.hpp"
#include "evarport/risk.hpp"

using namespace evarport;
using nlohmann::json;

namespace {

enum class Command { FIT, EVAR, FRONTIER, KKT_CHECK, SIMULATE };

struct RunConfig {
    Command command = Command::EVAR;
    int model_kind = 0;               // 1 or 2; 0 = take it from the params file
    double confidence = 0.95;         // CLI-facing level; alpha = 1 - confidence
    double target_min = 0, target_max = 0;
    int target_count = 0;
    std::vector<std::string> prices_paths;
    std::string params_path;
    std::string out_path;
    std::uint64_t seed = 2024;
    TruncationPolicy truncation;      // density truncation overrides (library-level)
    std::string format = "csv";
    std::string risk = "both";        // frontier curves: evar | stdev | both
    int jobs = 0;                     // 0 = hardware concurrency
    std::vector<double> weights;
    long count = 0;                   // simulate rows
    int starts = 16;                  // fit restarts
    std::optional<double> s_value;    // kkt-check point
    std::optional<double> target;     // kkt-check / evar target return
};

double functional_alpha(const RunConfig& config) { return 1.0 - config.confidence; }

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write '" + path + "'");
    out << content;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

FittedParams load_params(const RunConfig& config) {
    FittedParams params = params_from_json(read_file(config.params_path));
    if (config.model_kind == 1 && !std::holds_alternative<Model1Params>(params))
        throw Error(ErrorCode::InvalidArgument, "--model 1 but the params file holds model 2");
    if (config.model_kind == 2 && !std::holds_alternative<Model2Params>(params))
        throw Error(ErrorCode::InvalidArgument, "--model 2 but the params file holds model 1");
    return params;
}

Vector weights_vector(const RunConfig& config, int n) {
    if (static_cast<int>(config.weights.size()) != n)
        throw Error(ErrorCode::InvalidArgument,
                    "--weights needs " + std::to_string(n) + " comma-separated values");
    Vector w(n);
    for (int i = 0; i < n; ++i) w(i) = config.weights[static_cast<std::size_t>(i)];
    if (w.minCoeff() < -1e-12)
        throw Error(ErrorCode::InvalidArgument, "weights must be nonnegative");
    if (std::abs(w.sum() - 1.0) > 1e-8)
        throw Error(ErrorCode::InvalidArgument, "weights must sum to 1");
    return w;
}

void print_convention(const RunConfig& config) {
    std::printf("# confidence %.6g (EVaR %.4g%%), functional alpha = %.6g; "
                "returns are gains, risk numbers are losses\n",
                config.confidence, 100.0 * config.confidence, functional_alpha(config));
}

json convention_block(const RunConfig& config) {
    json j;
    j["confidence"] = config.confidence;
    j["alpha"] = functional_alpha(config);
    j["sign_convention"] = "returns are gains; EVaR/VaR are loss quantities";
    return j;
}

int run_fit(const RunConfig& config) {
    PriceSeries prices = load_prices(config.prices_paths);
    ReturnSample returns = to_log_returns(prices);
    if (prices.dropped_rows > 0)
        std::fprintf(stderr, "warning: dropped %ld incomplete rows\n", prices.dropped_rows);
    ModelKind kind = config.model_kind == 1 ? ModelKind::MODEL1 : ModelKind::MODEL2;
    ElsProblem problem = ElsProblem::from_sample(returns, kind);
    FitOptions opts;
    opts.starts = config.starts;
    opts.seed = config.seed;
    FitResult fit = fit_els(problem, opts);
    write_file(config.out_path, fit_result_to_json(fit));
    std::printf("# fitted model %d on %ld observations, objective %.10g -> %s\n",
                config.model_kind, fit.n_obs, fit.objective, config.out_path.c_str());
    return 0;
}

int run_evar(const RunConfig& config) {
    FittedParams params = load_params(config);
    RiskLevel level(functional_alpha(config));
    print_convention(config);

    auto report_for = [&](const auto& p) {
        Vector w = weights_vector(config, p.n);
        auto kappa = [&] {
            if constexpr (std::is_same_v<std::decay_t<decltype(p)>, Model1Params>)
                return kappa_model1(p);
            else
                return kappa_model2(p);
        }();
        EvarResult r = evar_analytic(kappa, w, level);
        Vector mean;
        Matrix cov;
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, Model1Params>) {
            mean = mean_model1(p);
            cov = covariance_model1(p);
        } else {
            mean = mean_model2(p);
            cov = covariance_model2(p);
        }
        json rec = convention_block(config);
        rec["evar"] = r.value;
        rec["s_star"] = r.s_star;
        rec["iterations"] = r.iterations;
        rec["converged"] = r.converged;
        rec["portfolio_mean"] = mean.dot(w);
        rec["portfolio_stdev"] = stdev_portfolio(cov, w);
        json warr = json::array();
        for (int i = 0; i < p.n; ++i) warr.push_back(w(i));
        rec["weights"] = warr;
        return std::pair<json, EvarResult>(rec, r);
    };
    auto [rec, result] = std::holds_alternative<Model1Params>(params)
                             ? report_for(std::get<Model1Params>(params))
                             : report_for(std::get<Model2Params>(params));
    std::string text;
    if (config.format == "json") {
        text = rec.dump(2) + "\n";
    } else {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "evar,s_star,converged\n%.12g,%.12g,%d\n", result.value,
                      result.s_star, result.converged ? 1 : 0);
        text = buf;
    }
    if (config.out_path.empty())
        std::fputs(text.c_str(), stdout);
    else
        write_file(config.out_path, text);
    return 0;
}

std::vector<double> target_grid(const RunConfig& config) {
    std::vector<double> targets;
    if (config.target_count == 1) {
        targets.push_back(config.target_min);
        return targets;
    }
    for (int k = 0; k < config.target_count; ++k)
        targets.push_back(config.target_min + (config.target_max - config.target_min) * k /
                                                  (config.target_count - 1));
    return targets;
}

std::string suffixed_path(const std::string& base, const std::string& tag) {
    std::filesystem::path p(base);
    std::filesystem::path out = p.parent_path() / (p.stem().string() + "_" + tag);
    out += p.extension();
    return out.string();
}

int run_frontier(const RunConfig& config) {
    FittedParams params = load_params(config);
    RiskLevel level(functional_alpha(config));
    std::vector<double> targets = target_grid(config);
    int jobs = config.jobs > 0 ? config.jobs
                               : std::max(1u, std::thread::hardware_concurrency());
    print_convention(config);

    auto sweep = [&](RiskKind kind) {
        SolveOptions opts;
        opts.seed = config.seed;
        if (std::holds_alternative<Model1Params>(params))
            return efficient_frontier(std::get<Model1Params>(params), level, targets, kind, jobs,
                                      opts);
        return efficient_frontier(std::get<Model2Params>(params), level, targets, kind, jobs,
                                  opts);
    };

    std::vector<FrontierPoint> evar_curve, stdev_curve;
    if (config.risk == "evar" || config.risk == "both") evar_curve = sweep(RiskKind::EVAR);
    if (config.risk == "stdev" || config.risk == "both") stdev_curve = sweep(RiskKind::STDEV);

    if (config.format == "json") {
        json doc = convention_block(config);
        if (!evar_curve.empty()) doc["evar"] = json::parse(frontier_to_json(evar_curve));
        if (!stdev_curve.empty()) doc["stdev"] = json::parse(frontier_to_json(stdev_curve));
        write_file(config.out_path, doc.dump(2) + "\n");
        std::printf("# frontier (%zu targets) -> %s\n", targets.size(),
                    config.out_path.c_str());
    } else {
        if (config.risk == "both") {
            std::string evar_path = suffixed_path(config.out_path, "evar");
            std::string stdev_path = suffixed_path(config.out_path, "stdev");
            write_file(evar_path, frontier_to_csv(evar_curve));
            write_file(stdev_path, frontier_to_csv(stdev_curve));
            std::printf("# frontier (%zu targets) -> %s, %s\n", targets.size(),
                        evar_path.c_str(), stdev_path.c_str());
        } else {
            const auto& curve = config.risk == "evar" ? evar_curve : stdev_curve;
            write_file(config.out_path, frontier_to_csv(curve));
            std::printf("# frontier (%zu targets) -> %s\n", targets.size(),
                        config.out_path.c_str());
        }
    }
    for (const auto& pt : evar_curve)
        if (!pt.error.empty())
            std::fprintf(stderr, "warning: target %.6g failed: %s\n", pt.target_return,
                         pt.error.c_str());
    return 0;
}

int run_kkt_check(const RunConfig& config) {
    FittedParams params = load_params(config);
    RiskLevel level(functional_alpha(config));
    print_convention(config);

    auto check = [&](const auto& p) {
        Vector w = weights_vector(config, p.n);
        auto kappa = [&] {
            if constexpr (std::is_same_v<std::decay_t<decltype(p)>, Model1Params>)
                return kappa_model1(p);
            else
                return kappa_model2(p);
        }();
        double s = config.s_value ? *config.s_value
                                  : evar_analytic(kappa, w, level).s_star;
        Vector mean;
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, Model1Params>)
            mean = mean_model1(p);
        else
            mean = mean_model2(p);
        Portfolio portfolio{w, config.target ? *config.target : mean.dot(w)};
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, Model1Params>) {
            Multipliers m = recover_multipliers_model1(p, level, portfolio, s);
            return kkt_check_model1(p, level, portfolio, s, m);
        } else {
            Multipliers m = recover_multipliers_model2(p, level, portfolio, s);
            return kkt_check_model2(p, level, portfolio, s, m);
        }
    };
    KktReport report = std::holds_alternative<Model1Params>(params)
                           ? check(std::get<Model1Params>(params))
                           : check(std::get<Model2Params>(params));
    std::string text = kkt_report_to_json(report) + "\n";
    if (config.out_path.empty())
        std::fputs(text.c_str(), stdout);
    else
        write_file(config.out_path, text);
    return 0;
}

int run_simulate(const RunConfig& config) {
    FittedParams params = load_params(config);
    ReturnSample sample = std::holds_alternative<Model1Params>(params)
                              ? sample_model1(std::get<Model1Params>(params), config.count,
                                              config.seed)
                              : sample_model2(std::get<Model2Params>(params), config.count,
                                              config.seed);
    write_file(config.out_path, returns_to_csv(sample));
    std::printf("# simulated %ld rows x %ld assets -> %s\n",
                static_cast<long>(sample.rows()), static_cast<long>(sample.cols()),
                config.out_path.c_str());
    return 0;
}

int run(const RunConfig& config) {
    switch (config.command) {
        case Command::FIT: return run_fit(config);
        case Command::EVAR: return run_evar(config);
        case Command::FRONTIER: return run_frontier(config);
        case Command::KKT_CHECK: return run_kkt_check(config);
        case Command::SIMULATE: return run_simulate(config);
    }
    return 2;
}

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
            return 2;
        case ErrorCode::ParseError:
        case ErrorCode::NonPositivePrice:
        case ErrorCode::EmptyIntersection:
        case ErrorCode::TooFewRows:
        case ErrorCode::EmptySample:
            return 3;
        default:
            return 4;
    }
}

void print_error_json(const std::string& code, const std::string& message) {
    json err;
    err["error"]["code"] = code;
    err["error"]["message"] = message;
    std::fprintf(stderr, "%s\n", err.dump().c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"EVaR portfolio toolkit for jump-diffusion return models"};
    app.require_subcommand(1);
    RunConfig config;

    auto add_common = [&](CLI::App* cmd, bool with_alpha) {
        if (with_alpha)
            cmd->add_option("--alpha", config.confidence,
                            "confidence level, e.g. 0.95 for EVaR 95% (functional alpha is "
                            "1 - confidence)")
                ->check(CLI::Range(1e-9, 1.0 - 1e-9));
        cmd->add_option("--seed", config.seed, "random seed");
    };

    std::string weights_arg, targets_arg;

    CLI::App* fit = app.add_subcommand("fit", "estimate model parameters from price data");
    fit->add_option("--model", config.model_kind, "model kind (1 or 2)")
        ->required()
        ->check(CLI::IsMember({1, 2}));
    fit->add_option("--prices", config.prices_paths, "input price CSV file(s)")->required();
    fit->add_option("--out", config.out_path, "output parameter JSON")->required();
    fit->add_option("--starts", config.starts, "multi-start count");
    add_common(fit, false);

    CLI::App* evar = app.add_subcommand("evar", "portfolio EVaR from fitted parameters");
    evar->add_option("--params", config.params_path, "parameter JSON")->required();
    evar->add_option("--weights", weights_arg, "comma-separated portfolio weights")->required();
    evar->add_option("--out", config.out_path, "output file (stdout when omitted)");
    evar->add_option("--format", config.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    add_common(evar, true);

    CLI::App* frontier = app.add_subcommand("frontier", "efficient frontier sweep");
    frontier->add_option("--params", config.params_path, "parameter JSON")->required();
    frontier->add_option("--targets", targets_arg, "target grid min:max:count")->required();
    frontier->add_option("--out", config.out_path, "output file")->required();
    frontier->add_option("--format", config.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    frontier->add_option("--risk", config.risk, "curves to compute")
        ->check(CLI::IsMember({"evar", "stdev", "both"}));
    frontier->add_option("--jobs", config.jobs, "parallel workers (0 = all cores)");
    add_common(frontier, true);

    CLI::App* kkt = app.add_subcommand("kkt-check", "KKT residuals at a candidate point");
    kkt->add_option("--params", config.params_path, "parameter JSON")->required();
    kkt->add_option("--weights", weights_arg, "comma-separated portfolio weights")->required();
    double s_opt = 0, target_opt = 0;
    auto* s_flag = kkt->add_option("--s", s_opt, "candidate s (defaults to the optimal s)");
    auto* t_flag =
        kkt->add_option("--target", target_opt, "target return (defaults to the implied mean)");
    kkt->add_option("--out", config.out_path, "output file (stdout when omitted)");
    add_common(kkt, true);

    CLI::App* simulate = app.add_subcommand("simulate", "draw synthetic return rows");
    simulate->add_option("--params", config.params_path, "parameter JSON")->required();
    simulate->add_option("--count", config.count, "number of rows")
        ->required()
        ->check(CLI::PositiveNumber);
    simulate->add_option("--out", config.out_path, "output CSV")->required();
    add_common(simulate, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::stringstream dummy;
        app.exit(e, dummy, dummy);
        print_error_json("CONFIG", e.what());
        return 2;
    }

    try {
        if (!weights_arg.empty()) {
            std::stringstream ss(weights_arg);
            std::string piece;
            while (std::getline(ss, piece, ','))
                config.weights.push_back(std::stod(piece));
        }
        if (!targets_arg.empty()) {
            std::stringstream ss(targets_arg);
            std::string lo, hi, count;
            if (!std::getline(ss, lo, ':') || !std::getline(ss, hi, ':') ||
                !std::getline(ss, count, ':'))
                throw Error(ErrorCode::InvalidArgument, "--targets must be min:max:count");
            config.target_min = std::stod(lo);
            config.target_max = std::stod(hi);
            config.target_count = std::stoi(count);
            if (config.target_count < 1)
                throw Error(ErrorCode::InvalidArgument, "--targets count must be >= 1");
        }
        if (fit->parsed()) config.command = Command::FIT;
        if (evar->parsed()) config.command = Command::EVAR;
        if (frontier->parsed()) config.command = Command::FRONTIER;
        if (kkt->parsed()) {
            config.command = Command::KKT_CHECK;
            if (s_flag->count()) config.s_value = s_opt;
            if (t_flag->count()) config.target = target_opt;
        }
        if (simulate->parsed()) config.command = Command::SIMULATE;
        return run(config);
    } catch (const Error& e) {
        print_error_json(error_code_name(e.code()), e.what());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        print_error_json("INTERNAL", e.what());
        return 4;
    }
}
