// Acceptance suite: one pass/fail line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <sstream>
#include <string>
#include <vector>

#include "evarport/estimate.hpp"
#include "evarport/json_io.hpp"
#include "evarport/model.hpp"
#include "evarport/optimize.hpp"
#include "evarport/risk.hpp"
#include "oracles.hpp"

using namespace evarport;

namespace {

int failures = 0;

void criterion(const std::string& name, const std::function<bool(std::string&)>& body) {
    std::string detail;
    bool ok = false;
    try {
        ok = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %s%s%s\n", ok ? "PASS" : "FAIL", name.c_str(),
                detail.empty() ? "" : " — ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

Model1Params random_model1(int n, Rng& rng) {
    Model1Params p;
    p.n = n;
    p.mu_tilde = Vector::NullaryExpr(n, [&](Eigen::Index) { return 0.02 * (rng.uniform() - 0.5); });
    p.sigma = 0.005 + 0.035 * rng.uniform();
    p.lambda = Vector::NullaryExpr(n, [&](Eigen::Index) { return 1.5 * rng.uniform(); });
    p.theta = Vector::NullaryExpr(n, [&](Eigen::Index) { return 0.06 * (rng.uniform() - 0.5); });
    p.sigma_jump =
        Vector::NullaryExpr(n, [&](Eigen::Index) { return 0.005 + 0.045 * rng.uniform(); });
    p.gamma = 1.5 * rng.uniform();
    p.mu = Vector::NullaryExpr(n, [&](Eigen::Index) { return 0.04 * (rng.uniform() - 0.5); });
    p.A = oracles::random_psd(n, 2e-4, rng);
    return p;
}

Model2Params random_model2(int n, Rng& rng) {
    Model2Params p;
    p.n = n;
    p.mu_tilde = Vector::NullaryExpr(n, [&](Eigen::Index) { return 0.02 * (rng.uniform() - 0.5); });
    p.Q = oracles::random_psd(n, 4e-4, rng);
    p.lambda = 1.5 * rng.uniform();
    p.mu = Vector::NullaryExpr(n, [&](Eigen::Index) { return 0.04 * (rng.uniform() - 0.5); });
    p.A = oracles::random_psd(n, 2e-4, rng);
    return p;
}

Model1Params load_fixture() {
    std::ifstream in(std::string(EVARPORT_DATA_DIR) + "/model1_synthetic3.json");
    std::stringstream ss;
    ss << in.rdbuf();
    return model1_from_json(ss.str());
}

Model2Params chunky_model2() {
    Model2Params p;
    p.n = 3;
    p.mu_tilde = Vector{{0.05, 0.09, 0.13}};
    p.Q = Matrix{{0.04, 0.01, 0.005}, {0.01, 0.0625, 0.015}, {0.005, 0.015, 0.09}};
    p.lambda = 0.5;
    p.mu = Vector{{-0.05, -0.02, -0.08}};
    p.A = Matrix{{0.01, 0.002, 0.001}, {0.002, 0.02, 0.004}, {0.001, 0.004, 0.03}};
    return p;
}

Model2Params recovery_model2() {
    Model2Params p;
    p.n = 3;
    p.mu_tilde = Vector{{0.002, -0.0005, 0.001}};
    p.Q = Matrix{{4e-4, 1.5e-4, 1e-4}, {1.5e-4, 5e-4, 1.2e-4}, {1e-4, 1.2e-4, 3e-4}};
    p.lambda = 0.6;
    p.mu = Vector{{-0.01, 0.006, 0.004}};
    p.A = Matrix{{2e-4, 6e-5, 4e-5}, {6e-5, 1.5e-4, 5e-5}, {4e-5, 5e-5, 1e-4}};
    return p;
}

bool gaussian_closed_form(std::string& detail) {
    auto start = std::chrono::steady_clock::now();
    Rng rng(101, 0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        double m = 0.2 * (rng.uniform() - 0.5);
        double v = 0.01 + rng.uniform();
        double alpha = 0.01 + 0.9 * rng.uniform();
        Model2Params p;
        p.n = 1;
        p.mu_tilde = Vector{{m}};
        p.Q = Matrix{{v}};
        p.lambda = 0.0;
        p.mu = Vector::Zero(1);
        p.A = Matrix::Zero(1, 1);
        double got = evar_analytic(kappa_model2(p), Vector::Ones(1), RiskLevel(alpha)).value;
        worst = std::max(worst, std::abs(got - oracles::gaussian_evar(m, v, alpha)));
    }
    Model1Params unit;
    unit.n = 1;
    unit.mu_tilde = Vector::Zero(1);
    unit.sigma = 1.0;
    unit.lambda = Vector::Zero(1);
    unit.theta = Vector::Zero(1);
    unit.sigma_jump = Vector::Zero(1);
    unit.gamma = 0.0;
    unit.mu = Vector::Zero(1);
    unit.A = Matrix::Zero(1, 1);
    double fixed = evar_analytic(kappa_model1(unit), Vector::Ones(1), RiskLevel(0.05)).value;
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char buf[160];
    std::snprintf(buf, sizeof(buf), "max |err| %.2e, EVaR(N(0,1),0.05) = %.6f, %.2fs", worst,
                  fixed, elapsed);
    detail = buf;
    return worst < 1e-8 && std::abs(fixed - 2.447747) < 1e-6 && elapsed < 1.0;
}

bool laplace_oracle(std::string& detail) {
    const long n_draws = 1000000;
    const int sets = 20, directions = 10;
    auto run_model = [&](int which) {
        int misses = 0;
        Rng rng(200 + which, 0);
        for (int set = 0; set < sets; ++set) {
            Matrix returns;
            std::function<double(const Vector&)> kappa;
            if (which == 1) {
                Model1Params p = random_model1(3, rng);
                returns = sample_model1(p, n_draws, 3000 + set).returns;
                kappa = kappa_model1(p);
            } else {
                Model2Params p = random_model2(3, rng);
                returns = sample_model2(p, n_draws, 4000 + set).returns;
                kappa = kappa_model2(p);
            }
            for (int d = 0; d < directions; ++d) {
                Vector u(3);
                for (int i = 0; i < 3; ++i) u(i) = 4.0 * (rng.uniform() - 0.5);
                auto est = oracles::log_empirical_mgf(returns, u);
                if (std::abs(kappa(u) - est.value) > 3.0 * std::max(est.standard_error, 1e-14))
                    ++misses;
            }
        }
        return misses;
    };
    auto future1 = std::async(std::launch::async, run_model, 1);
    int misses2 = run_model(2);
    int misses1 = future1.get();
    int total = 2 * sets * directions;
    int misses = misses1 + misses2;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%d/%d outside 3 SE (budget %d)", misses, total, total / 20);
    detail = buf;
    return misses <= total / 20; // >= 95% within 3 SE
}

bool density_normalization(std::string& detail) {
    Model1Params p1;
    p1.n = 1;
    p1.mu_tilde = Vector{{0.002}};
    p1.sigma = 0.02;
    p1.lambda = Vector{{0.7}};
    p1.theta = Vector{{-0.02}};
    p1.sigma_jump = Vector{{0.04}};
    p1.gamma = 0.4;
    p1.mu = Vector{{0.01}};
    p1.A = Matrix{{3e-4}};
    double m1 = mean_model1(p1)(0);
    double sd1 = std::sqrt(covariance_model1(p1)(0, 0));
    double err1 = std::abs(oracles::simpson([&](double x) { return density_model1(p1, Vector{{x}}); },
                                            m1 - 12 * sd1, m1 + 12 * sd1, 4000) -
                           1.0);

    Model2Params p2;
    p2.n = 1;
    p2.mu_tilde = Vector{{-0.001}};
    p2.Q = Matrix{{4e-4}};
    p2.lambda = 1.2;
    p2.mu = Vector{{0.008}};
    p2.A = Matrix{{2e-4}};
    double m2 = mean_model2(p2)(0);
    double sd2 = std::sqrt(covariance_model2(p2)(0, 0));
    double err2 = std::abs(oracles::simpson([&](double x) { return density_model2(p2, Vector{{x}}); },
                                            m2 - 12 * sd2, m2 + 12 * sd2, 4000) -
                           1.0);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "|integral-1|: model1 %.2e, model2 %.2e", err1, err2);
    detail = buf;
    return err1 < 1e-6 && err2 < 1e-6;
}

bool elliptical_coincidence(std::string& detail) {
    Model2Params p = chunky_model2();
    p.lambda = 0.0;
    p.mu = Vector::Zero(3);
    p.A = Matrix::Zero(3, 3);
    RiskLevel level(0.05);
    Vector means = mean_model2(p);
    double lo = means.minCoeff(), hi = means.maxCoeff();
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
        double target = lo + (hi - lo) * (0.05 + 0.9 * k / 9.0);
        EvarSolution sol = solve_evar_model2(p, level, target);
        Portfolio mv = solve_min_variance(p.Q, means, target);
        worst = std::max(worst, (sol.portfolio.weights - mv.weights).cwiseAbs().maxCoeff());
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "max weight gap %.2e", worst);
    detail = buf;
    return worst < 1e-4;
}

bool kkt_sufficiency(std::string& detail) {
    RiskLevel level(0.05);
    Model1Params p1 = load_fixture();
    Model2Params p2 = chunky_model2();
    double worst_norm = 0.0;
    Vector means1 = mean_model1(p1);
    for (double frac : {0.2, 0.5, 0.8}) {
        double target = means1.minCoeff() + frac * (means1.maxCoeff() - means1.minCoeff());
        EvarSolution sol = solve_evar_model1(p1, level, target);
        worst_norm = std::max({worst_norm, sol.kkt.stationarity_inf_norm,
                               sol.kkt.primal_feasibility, sol.kkt.complementarity,
                               sol.kkt.dual_feasibility});
    }
    Vector means2 = mean_model2(p2);
    for (double frac : {0.3, 0.7}) {
        double target = means2.minCoeff() + frac * (means2.maxCoeff() - means2.minCoeff());
        EvarSolution sol = solve_evar_model2(p2, level, target);
        worst_norm = std::max({worst_norm, sol.kkt.stationarity_inf_norm,
                               sol.kkt.primal_feasibility, sol.kkt.complementarity,
                               sol.kkt.dual_feasibility});
    }
    // 20 random restarts must agree on the objective.
    double target = means2.minCoeff() + 0.45 * (means2.maxCoeff() - means2.minCoeff());
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int k = 0; k < 20; ++k) {
        SolveOptions opts;
        opts.random_starts = 2;
        opts.seed = 9000 + static_cast<std::uint64_t>(k);
        double objective = solve_evar_model2(p2, level, target, opts).objective;
        lo = std::min(lo, objective);
        hi = std::max(hi, objective);
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "worst KKT norm %.2e, restart spread %.2e", worst_norm,
                  hi - lo);
    detail = buf;
    return worst_norm <= 1e-6 && (hi - lo) <= 1e-6;
}

bool grid_oracle(std::string& detail) {
    RiskLevel level(0.05);
    double worst = 0.0;
    Model1Params p1 = load_fixture();
    auto kappa1 = kappa_model1(p1);
    Vector means1 = mean_model1(p1);
    for (double frac : {0.3, 0.65}) {
        double target = means1.minCoeff() + frac * (means1.maxCoeff() - means1.minCoeff());
        EvarSolution sol = solve_evar_model1(p1, level, target);
        auto grid = oracles::grid_search_segment(
            feasible_vertices(means1, target), 0.01,
            [&](const Vector& w) { return evar_analytic(kappa1, w, level).value; });
        worst = std::max(worst, std::abs(sol.objective - grid.value));
    }
    Model2Params p2 = chunky_model2();
    auto kappa2 = kappa_model2(p2);
    Vector means2 = mean_model2(p2);
    double target2 = means2.minCoeff() + 0.5 * (means2.maxCoeff() - means2.minCoeff());
    EvarSolution sol2 = solve_evar_model2(p2, level, target2);
    auto grid2 = oracles::grid_search_segment(
        feasible_vertices(means2, target2), 0.01,
        [&](const Vector& w) { return evar_analytic(kappa2, w, level).value; });
    worst = std::max(worst, std::abs(sol2.objective - grid2.value));
    char buf[64];
    std::snprintf(buf, sizeof(buf), "max objective gap %.2e", worst);
    detail = buf;
    return worst < 1e-4;
}

bool els_recovery(std::string& detail) {
    const long n_rows = 5000;
    Model2Params truth = recovery_model2();
    ReturnSample data = sample_model2(truth, n_rows, 2024);
    FitResult fit = fit_els(ElsProblem::from_sample(data, ModelKind::MODEL2));
    Vector true_mean = mean_model2(truth);
    Matrix true_cov = covariance_model2(truth);
    double worst_mean_z = 0.0, worst_cov_rel = 0.0;
    for (int i = 0; i < 3; ++i) {
        worst_mean_z = std::max(worst_mean_z, std::abs(fit.implied_mean(i) - true_mean(i)) /
                                                  std::sqrt(true_cov(i, i) / n_rows));
        for (int j = 0; j < 3; ++j)
            worst_cov_rel =
                std::max(worst_cov_rel, std::abs(fit.implied_cov(i, j) - true_cov(i, j)) /
                                            std::abs(true_cov(i, j)));
    }

    // Gaussian special case: the fit must reproduce the sample moments.
    Model2Params gauss = truth;
    gauss.lambda = 0.0;
    ReturnSample gdata = sample_model2(gauss, n_rows, 2025);
    ElsProblem gproblem = ElsProblem::from_sample(gdata, ModelKind::MODEL2);
    FitResult gfit = fit_els(gproblem);
    double mean_gap = (gfit.implied_mean - gproblem.sample_mean).cwiseAbs().maxCoeff();
    double cov_rel = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            cov_rel = std::max(cov_rel,
                               std::abs(gfit.implied_cov(i, j) - gproblem.sample_scatter(i, j)) /
                                   std::abs(gproblem.sample_scatter(i, j)));
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "mean %.2f SE, cov %.1f%%; gaussian mean gap %.1e, cov rel %.1e", worst_mean_z,
                  100 * worst_cov_rel, mean_gap, cov_rel);
    detail = buf;
    return worst_mean_z < 3.0 && worst_cov_rel < 0.15 && mean_gap < 1e-6 && cov_rel < 1e-4;
}

bool frontier_shape(std::string& detail) {
    Model1Params p = load_fixture();
    RiskLevel level(0.05);
    Vector means = mean_model1(p);
    double lo = means.minCoeff(), hi = means.maxCoeff();
    std::vector<double> targets;
    for (int k = 0; k < 10; ++k) targets.push_back(lo + (hi - lo) * (0.02 + 0.96 * k / 9.0));
    auto points = efficient_frontier(p, level, targets, RiskKind::EVAR, 2);
    int valley = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!points[i].converged) {
            detail = "point " + std::to_string(i) + " failed: " + points[i].error;
            return false;
        }
        if (std::abs(points[i].weights.sum() - 1.0) > 1e-10) {
            detail = "weights do not sum to 1";
            return false;
        }
        if (points[i].evar_value < points[valley].evar_value) valley = static_cast<int>(i);
    }
    bool unimodal = true;
    for (int i = 0; i + 1 <= valley; ++i)
        if (points[i + 1].evar_value > points[i].evar_value + 1e-9) unimodal = false;
    for (std::size_t i = valley; i + 1 < points.size(); ++i)
        if (points[i + 1].evar_value < points[i].evar_value - 1e-9) unimodal = false;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "valley at target %.4f (index %d), EVaR %.4f -> %.4f -> %.4f",
                  points[valley].target_return, valley, points.front().evar_value,
                  points[valley].evar_value, points.back().evar_value);
    detail = buf;
    return unimodal && valley > 0 && valley + 1 < static_cast<int>(points.size());
}

bool gradient_checks(std::string& detail) {
    RiskLevel level(0.05);
    double worst = 0.0;
    auto run = [&](const EvarObjective& obj, std::uint64_t seed) {
        Vector means = obj.means;
        double target = means.minCoeff() + 0.5 * (means.maxCoeff() - means.minCoeff());
        auto vertices = feasible_vertices(means, target);
        Rng rng(seed, 1);
        for (int trial = 0; trial < 100; ++trial) {
            Vector w = random_feasible_point(vertices, seed, static_cast<std::uint64_t>(trial));
            double s = 0.5 + 30.0 * rng.uniform();
            Vector gw;
            double gs;
            obj.gradient(w, s, gw, gs);
            Vector fd(w.size() + 1);
            const double h = 1e-6;
            for (int i = 0; i < w.size(); ++i) {
                Vector up = w, dn = w;
                up(i) += h;
                dn(i) -= h;
                fd(i) = (obj.value(up, s) - obj.value(dn, s)) / (2 * h);
            }
            fd(w.size()) = (obj.value(w, s + h) - obj.value(w, s - h)) / (2 * h);
            Vector analytic(w.size() + 1);
            analytic.head(w.size()) = gw;
            analytic(w.size()) = gs;
            double rel = (analytic - fd).cwiseAbs().maxCoeff() /
                         std::max(1.0, analytic.cwiseAbs().maxCoeff());
            worst = std::max(worst, rel);
        }
    };
    run(make_objective(load_fixture(), level), 71);
    run(make_objective(chunky_model2(), level), 72);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "worst relative error %.2e", worst);
    detail = buf;
    return worst <= 1e-5;
}

bool coherence_axioms(std::string& detail) {
    RiskLevel level(0.05);
    Model1Params p1 = load_fixture();
    Model2Params p2 = chunky_model2();
    const double c = 0.0125;
    Vector w1 = Vector::Constant(3, 1.0 / 3.0);

    Model1Params p1_shift = p1;
    p1_shift.mu_tilde.array() += c;
    double t1 = std::abs((evar_analytic(kappa_model1(p1), w1, level).value -
                          evar_analytic(kappa_model1(p1_shift), w1, level).value) -
                         c);
    Model2Params p2_shift = p2;
    p2_shift.mu_tilde.array() += c;
    double t2 = std::abs((evar_analytic(kappa_model2(p2), w1, level).value -
                          evar_analytic(kappa_model2(p2_shift), w1, level).value) -
                         c);

    auto kappa = kappa_model1(p1);
    double base = evar_analytic(kappa, w1, level).value;
    double homo = 0.0;
    for (double scale : {0.5, 2.0, 7.0}) {
        auto scaled = [&kappa, scale](const Vector& u) { return kappa(scale * u); };
        double got = evar_analytic(scaled, w1, level).value;
        homo = std::max(homo, std::abs(got - scale * base) / std::abs(scale * base));
    }

    bool monotone = true;
    double previous = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 10; ++k) {
        double value = evar_analytic(kappa, w1, RiskLevel(k / 11.0)).value;
        if (value > previous + 1e-12) monotone = false;
        previous = value;
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "translation %.1e/%.1e, homogeneity rel %.1e, monotone %s", t1,
                  t2, homo, monotone ? "yes" : "no");
    detail = buf;
    return t1 < 1e-9 && t2 < 1e-9 && homo < 1e-9 && monotone;
}

} // namespace

int main() {
    criterion("gaussian-closed-form", gaussian_closed_form);
    criterion("laplace-mgf-oracle", laplace_oracle);
    criterion("density-normalization", density_normalization);
    criterion("elliptical-coincidence", elliptical_coincidence);
    criterion("kkt-sufficiency", kkt_sufficiency);
    criterion("grid-oracle", grid_oracle);
    criterion("els-recovery", els_recovery);
    criterion("frontier-shape-regression", frontier_shape);
    criterion("gradient-checks", gradient_checks);
    criterion("coherence-axioms", coherence_axioms);
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
