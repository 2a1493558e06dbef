#include "evarport/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <thread>

#include "evarport/rng.hpp"

namespace evarport {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kActiveTol = 1e-8;

double safe_value(const EvarObjective& obj, const Vector& w, double s) {
    try {
        double v = obj.value(w, s);
        return std::isfinite(v) ? v : kInf;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ExponentOverflow) return kInf;
        throw;
    }
}

} // namespace

double EvarObjective::value(const Vector& w, double s) const {
    return (kappa(s * w) - std::log(alpha)) / s;
}

void EvarObjective::gradient(const Vector& w, double s, Vector& grad_w, double& grad_s) const {
    const double f = value(w, s);
    grad_w = kappa_grad(s * w);
    grad_s = (grad_w.dot(w) - f) / s;
}

EvarObjective make_objective(const Model1Params& p, RiskLevel level) {
    EvarObjective obj;
    obj.kappa = kappa_model1(p);
    obj.kappa_grad = [p](const Vector& u) { return laplace_gradient_model1(p, u); };
    obj.means = mean_model1(p);
    obj.alpha = level.alpha;
    return obj;
}

EvarObjective make_objective(const Model2Params& p, RiskLevel level) {
    EvarObjective obj;
    obj.kappa = kappa_model2(p);
    obj.kappa_grad = [p](const Vector& u) { return laplace_gradient_model2(p, u); };
    obj.means = mean_model2(p);
    obj.alpha = level.alpha;
    return obj;
}

std::vector<Vector> feasible_vertices(const Vector& means, double mu_star) {
    const int n = static_cast<int>(means.size());
    const double scale = std::max({1.0, means.cwiseAbs().maxCoeff(), std::abs(mu_star)});
    const double tol = 1e-10 * scale;
    std::vector<Vector> vertices;
    for (int i = 0; i < n; ++i) {
        if (std::abs(means(i) - mu_star) <= tol) {
            Vector v = Vector::Zero(n);
            v(i) = 1.0;
            vertices.push_back(v);
        }
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double d = means(i) - means(j);
            if (std::abs(d) <= tol) continue;
            double t = (mu_star - means(j)) / d; // weight on asset i
            if (t < -1e-12 || t > 1.0 + 1e-12) continue;
            t = std::clamp(t, 0.0, 1.0);
            Vector v = Vector::Zero(n);
            v(i) = t;
            v(j) = 1.0 - t;
            vertices.push_back(v);
        }
    }
    if (vertices.empty())
        throw Error(ErrorCode::InfeasibleTarget,
                    "target return " + std::to_string(mu_star) + " outside attainable range [" +
                        std::to_string(means.minCoeff()) + ", " + std::to_string(means.maxCoeff()) +
                        "]");
    return vertices;
}

Vector random_feasible_point(const std::vector<Vector>& vertices, std::uint64_t seed,
                             std::uint64_t stream) {
    Rng rng(seed, stream);
    Vector coeff(static_cast<Eigen::Index>(vertices.size()));
    for (Eigen::Index k = 0; k < coeff.size(); ++k) coeff(k) = -std::log(rng.uniform());
    coeff /= coeff.sum();
    Vector point = Vector::Zero(vertices.front().size());
    for (std::size_t k = 0; k < vertices.size(); ++k) point += coeff(static_cast<Eigen::Index>(k)) * vertices[k];
    return point;
}

// ---------------------------------------------------------------------------
// Minimum-variance portfolio: primal active-set QP
// ---------------------------------------------------------------------------

Portfolio solve_min_variance(const Matrix& cov, const Vector& means, double mu_star) {
    const int n = static_cast<int>(means.size());
    if (cov.rows() != n || cov.cols() != n)
        throw Error(ErrorCode::InvalidArgument, "covariance size mismatch");
    auto vertices = feasible_vertices(means, mu_star);
    Vector x = Vector::Zero(n);
    for (const auto& v : vertices) x += v;
    x /= static_cast<double>(vertices.size());

    Matrix Aeq(2, n);
    Aeq.row(0) = means.transpose();
    Aeq.row(1) = Vector::Ones(n).transpose();
    Eigen::Vector2d beq(mu_star, 1.0);

    std::vector<bool> active(n, false);
    for (int i = 0; i < n; ++i) active[i] = x(i) <= 1e-14;

    const int max_iter = 100 * (n + 2);
    for (int iter = 0; iter < max_iter; ++iter) {
        std::vector<int> free_idx;
        for (int i = 0; i < n; ++i)
            if (!active[i]) free_idx.push_back(i);
        const int nf = static_cast<int>(free_idx.size());

        Vector g = cov * x;
        Matrix kkt = Matrix::Zero(nf + 2, nf + 2);
        Vector rhs = Vector::Zero(nf + 2);
        for (int a = 0; a < nf; ++a) {
            for (int b = 0; b < nf; ++b) kkt(a, b) = cov(free_idx[a], free_idx[b]);
            kkt(a, nf) = means(free_idx[a]);
            kkt(a, nf + 1) = 1.0;
            kkt(nf, a) = means(free_idx[a]);
            kkt(nf + 1, a) = 1.0;
            rhs(a) = -g(free_idx[a]);
        }
        // Keep equalities satisfied exactly even if x drifted.
        rhs(nf) = -(Aeq.row(0).dot(x) - beq(0));
        rhs(nf + 1) = -(Aeq.row(1).dot(x) - beq(1));

        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(kkt);
        Vector sol = cod.solve(rhs);
        Vector p = Vector::Zero(n);
        for (int a = 0; a < nf; ++a) p(free_idx[a]) = sol(a);
        Eigen::Vector2d eta(sol(nf), sol(nf + 1));

        const double p_norm = p.cwiseAbs().maxCoeff();
        if (p_norm <= 1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff())) {
            // Bound multipliers; negative means the bound blocks descent.
            Vector nu = cov * x + Aeq.transpose() * eta;
            int worst = -1;
            double worst_val = -1e-10;
            for (int i = 0; i < n; ++i) {
                if (active[i] && nu(i) < worst_val) {
                    worst_val = nu(i);
                    worst = i;
                }
            }
            if (worst < 0) break; // KKT satisfied
            active[worst] = false;
            continue;
        }
        double step = 1.0;
        int blocking = -1;
        for (int i = 0; i < n; ++i) {
            if (!active[i] && p(i) < -1e-16) {
                double limit = -x(i) / p(i);
                if (limit < step) {
                    step = limit;
                    blocking = i;
                }
            }
        }
        x += step * p;
        if (blocking >= 0) {
            x(blocking) = 0.0;
            active[blocking] = true;
        }
    }
    for (int i = 0; i < n; ++i) x(i) = std::max(x(i), 0.0);
    x /= x.sum();
    return Portfolio{x, mu_star};
}

// ---------------------------------------------------------------------------
// Joint (weights, s) EVaR solver
// ---------------------------------------------------------------------------

namespace {

struct JointProblem {
    const EvarObjective& obj;
    Vector means;
    double mu_star;
    double s_floor;
    int n;

    Eigen::Vector2d constraints(const Vector& w) const {
        return {means.dot(w) - mu_star, w.sum() - 1.0};
    }
};

/// x = [w; s] packed; projection onto the box {w >= 0, s >= s_floor}.
void project_box(Vector& x, double s_floor) {
    const auto n = x.size() - 1;
    for (Eigen::Index i = 0; i < n; ++i) x(i) = std::max(x(i), 0.0);
    x(n) = std::max(x(n), s_floor);
}

struct AugLag {
    const JointProblem& prob;
    Eigen::Vector2d eta{0.0, 0.0};
    double rho = 10.0;

    double value(const Vector& x) const {
        const int n = prob.n;
        Vector w = x.head(n);
        double s = x(n);
        double f = safe_value(prob.obj, w, s);
        if (!std::isfinite(f)) return kInf;
        Eigen::Vector2d h = prob.constraints(w);
        return f + eta.dot(h) + 0.5 * rho * h.squaredNorm();
    }

    Vector gradient(const Vector& x) const {
        const int n = prob.n;
        Vector w = x.head(n);
        double s = x(n);
        Vector gw;
        double gs = 0;
        prob.obj.gradient(w, s, gw, gs);
        Eigen::Vector2d h = prob.constraints(w);
        Eigen::Vector2d lam = eta + rho * h;
        Vector g(n + 1);
        g.head(n) = gw + lam(0) * prob.means + lam(1) * Vector::Ones(n);
        g(n) = gs;
        return g;
    }
};

/// Spectral projected gradient with Armijo backtracking on the box.
/// Returns the final projected-gradient residual.
double projected_gradient_minimize(const AugLag& al, Vector& x, double tol, int max_iter) {
    project_box(x, al.prob.s_floor);
    double fx = al.value(x);
    if (!std::isfinite(fx)) {
        // Pull s down until the objective is finite.
        while (!std::isfinite(fx) && x(x.size() - 1) > al.prob.s_floor * 2) {
            x(x.size() - 1) *= 0.25;
            project_box(x, al.prob.s_floor);
            fx = al.value(x);
        }
        if (!std::isfinite(fx)) return kInf;
    }
    Vector g = al.gradient(x);
    double step = 1.0 / std::max(1.0, g.cwiseAbs().maxCoeff());
    double residual = kInf;
    for (int iter = 0; iter < max_iter; ++iter) {
        Vector probe = x - g;
        project_box(probe, al.prob.s_floor);
        residual = (x - probe).cwiseAbs().maxCoeff();
        if (residual <= tol) break;
        Vector trial = x - step * g;
        project_box(trial, al.prob.s_floor);
        Vector d = trial - x;
        double gd = g.dot(d);
        double f_trial = al.value(trial);
        int backtracks = 0;
        while ((!std::isfinite(f_trial) || f_trial > fx + 1e-4 * gd) && backtracks < 60) {
            step *= 0.5;
            trial = x - step * g;
            project_box(trial, al.prob.s_floor);
            d = trial - x;
            gd = g.dot(d);
            f_trial = al.value(trial);
            ++backtracks;
        }
        if (!std::isfinite(f_trial) || d.cwiseAbs().maxCoeff() == 0.0) break;
        Vector g_new = al.gradient(trial);
        Vector dg = g_new - g;
        double dd = d.squaredNorm();
        double dgd = d.dot(dg);
        step = (dgd > 1e-18 * dd) ? std::clamp(dd / dgd, 1e-12, 1e12) : step * 2.0;
        x = trial;
        fx = f_trial;
        g = g_new;
    }
    return residual;
}

/// Central-difference Hessian of the joint objective over the given
/// coordinate set, using the analytic gradient.
Matrix fd_hessian(const JointProblem& prob, const Vector& x, const std::vector<int>& coords) {
    const int n = prob.n;
    const int k = static_cast<int>(coords.size());
    Matrix H(k, k);
    auto grad_at = [&](const Vector& xx) {
        Vector gw;
        double gs;
        prob.obj.gradient(xx.head(n), std::max(xx(n), prob.s_floor), gw, gs);
        Vector g(n + 1);
        g.head(n) = gw;
        g(n) = gs;
        return g;
    };
    for (int c = 0; c < k; ++c) {
        double h = 1e-6 * std::max(1.0, std::abs(x(coords[c])));
        Vector xp = x, xm = x;
        xp(coords[c]) += h;
        xm(coords[c]) -= h;
        if (coords[c] == n) xm(n) = std::max(xm(n), prob.s_floor);
        Vector gp = grad_at(xp);
        Vector gm = grad_at(xm);
        for (int r = 0; r < k; ++r) H(r, c) = (gp(coords[r]) - gm(coords[r])) / (xp(coords[c]) - xm(coords[c]));
    }
    return 0.5 * (H + H.transpose());
}

/// Active-set Newton polish on the equality-constrained KKT system.
void newton_polish(const JointProblem& prob, Vector& x, Eigen::Vector2d& eta) {
    const int n = prob.n;
    std::vector<bool> active(n, false);
    for (int i = 0; i < n; ++i) active[i] = x(i) <= kActiveTol;

    for (int round = 0; round < 8; ++round) {
        for (int iter = 0; iter < 30; ++iter) {
            std::vector<int> free_coords;
            for (int i = 0; i < n; ++i)
                if (!active[i]) free_coords.push_back(i);
            free_coords.push_back(n); // s is free (floor is never binding at an optimum)
            const int k = static_cast<int>(free_coords.size());

            Vector gw;
            double gs;
            prob.obj.gradient(x.head(n), x(n), gw, gs);
            Vector grad(n + 1);
            grad.head(n) = gw;
            grad(n) = gs;
            Eigen::Vector2d h = prob.constraints(x.head(n));

            Matrix H = fd_hessian(prob, x, free_coords);
            Matrix kkt = Matrix::Zero(k + 2, k + 2);
            Vector rhs = Vector::Zero(k + 2);
            kkt.topLeftCorner(k, k) = H;
            kkt.diagonal().head(k).array() += 1e-12;
            for (int c = 0; c < k; ++c) {
                int idx = free_coords[c];
                double a0 = idx < n ? prob.means(idx) : 0.0;
                double a1 = idx < n ? 1.0 : 0.0;
                kkt(c, k) = a0;
                kkt(c, k + 1) = a1;
                kkt(k, c) = a0;
                kkt(k + 1, c) = a1;
                rhs(c) = -grad(idx);
            }
            rhs(k) = -h(0);
            rhs(k + 1) = -h(1);

            Eigen::CompleteOrthogonalDecomposition<Matrix> cod(kkt);
            Vector sol = cod.solve(rhs);
            Vector dx = Vector::Zero(n + 1);
            for (int c = 0; c < k; ++c) dx(free_coords[c]) = sol(c);
            Eigen::Vector2d eta_new(sol(k), sol(k + 1));

            // Step back to the boundary if a free weight would go negative.
            double tau = 1.0;
            for (int i = 0; i < n; ++i) {
                if (!active[i] && dx(i) < 0.0) tau = std::min(tau, -x(i) / dx(i));
            }
            if (x(n) + dx(n) < prob.s_floor) {
                double limit = (prob.s_floor - x(n)) / dx(n);
                tau = std::min(tau, limit);
            }

            double f_old = safe_value(prob.obj, x.head(n), x(n));
            Vector x_trial = x + tau * dx;
            project_box(x_trial, prob.s_floor);
            double f_new = safe_value(prob.obj, x_trial.head(n), x_trial(n));
            double h_old = h.cwiseAbs().maxCoeff();
            double h_new = prob.constraints(x_trial.head(n)).cwiseAbs().maxCoeff();
            // Accept if the merit (objective + feasibility) does not blow up.
            if (!std::isfinite(f_new) || (f_new - f_old) + 1e3 * (h_new - h_old) > 1e-9 * std::max(1.0, std::abs(f_old)) + 1e-14) {
                // Damped retry.
                bool accepted = false;
                for (double shrink : {0.5, 0.25, 0.1, 0.01}) {
                    x_trial = x + shrink * tau * dx;
                    project_box(x_trial, prob.s_floor);
                    f_new = safe_value(prob.obj, x_trial.head(n), x_trial(n));
                    h_new = prob.constraints(x_trial.head(n)).cwiseAbs().maxCoeff();
                    if (std::isfinite(f_new) &&
                        (f_new - f_old) + 1e3 * (h_new - h_old) <= 1e-9 * std::max(1.0, std::abs(f_old)) + 1e-14) {
                        accepted = true;
                        break;
                    }
                }
                if (!accepted) break;
            }
            x = x_trial;
            eta = eta_new;
            for (int i = 0; i < n; ++i) {
                if (!active[i] && x(i) <= 1e-12) {
                    x(i) = 0.0;
                    active[i] = true;
                }
            }
            if (dx.cwiseAbs().maxCoeff() * tau <= 1e-13 && h.cwiseAbs().maxCoeff() <= 1e-12) break;
        }

        // Release actives whose multiplier says the bound is not binding.
        Vector gw;
        double gs;
        prob.obj.gradient(x.head(n), x(n), gw, gs);
        int worst = -1;
        double worst_val = -1e-9;
        for (int i = 0; i < n; ++i) {
            if (!active[i]) continue;
            double nu = gw(i) + eta(0) * prob.means(i) + eta(1);
            if (nu < worst_val) {
                worst_val = nu;
                worst = i;
            }
        }
        if (worst < 0) break;
        active[worst] = false;
    }
}

struct Candidate {
    Vector x; // [w; s]
    double objective = kInf;
    Eigen::Vector2d eta{0.0, 0.0};
};

bool lexicographically_smaller(const Vector& a, const Vector& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a(i) < b(i)) return true;
        if (a(i) > b(i)) return false;
    }
    return false;
}

template <class Params>
EvarSolution solve_evar_impl(const Params& p, RiskLevel level, double mu_star,
                             const SolveOptions& opts) {
    validate(p);
    EvarObjective obj = make_objective(p, level);
    const int n = static_cast<int>(obj.means.size());
    const double scale = std::max({1.0, obj.means.cwiseAbs().maxCoeff(), std::abs(mu_star)});
    if (mu_star < obj.means.minCoeff() - 1e-10 * scale ||
        mu_star > obj.means.maxCoeff() + 1e-10 * scale)
        throw Error(ErrorCode::InfeasibleTarget,
                    "target return " + std::to_string(mu_star) + " outside [" +
                        std::to_string(obj.means.minCoeff()) + ", " +
                        std::to_string(obj.means.maxCoeff()) + "]");

    JointProblem prob{obj, obj.means, mu_star, opts.s_floor, n};
    auto vertices = feasible_vertices(obj.means, mu_star);

    auto kappa = obj.kappa;
    auto s_for = [&](const Vector& w) {
        EvarResult r = evar_analytic(kappa, w, level);
        return r.s_star;
    };

    std::vector<Vector> starts;
    {
        Matrix cov;
        if constexpr (std::is_same_v<Params, Model1Params>) cov = covariance_model1(p);
        else cov = covariance_model2(p);
        try {
            starts.push_back(solve_min_variance(cov, obj.means, mu_star).weights);
        } catch (const Error&) {
            // fall through to vertex starts
        }
    }
    Vector barycenter = Vector::Zero(n);
    for (const auto& v : vertices) barycenter += v;
    starts.push_back(barycenter / static_cast<double>(vertices.size()));
    for (int k = 0; k < opts.random_starts; ++k)
        starts.push_back(random_feasible_point(vertices, opts.seed, static_cast<std::uint64_t>(k)));

    Candidate best;
    bool degenerate = false;
    for (const auto& w0 : starts) {
        Vector x(n + 1);
        x.head(n) = w0;
        x(n) = std::max(s_for(w0), opts.s_floor);

        AugLag al{prob};
        double inner_tol = 1e-4;
        double h_prev = kInf;
        for (int outer = 0; outer < opts.max_outer; ++outer) {
            double residual = projected_gradient_minimize(al, x, inner_tol, opts.max_inner);
            Eigen::Vector2d h = prob.constraints(x.head(n));
            double h_norm = h.cwiseAbs().maxCoeff();
            if (h_norm <= 1e-11 && residual <= 1e-8) break;
            al.eta += al.rho * h;
            if (h_norm > 0.25 * h_prev && outer > 0)
                al.rho = std::min(al.rho * 10.0, 1e12);
            h_prev = h_norm;
            inner_tol = std::max(inner_tol * 0.2, 1e-9);
        }
        Eigen::Vector2d eta = al.eta;
        newton_polish(prob, x, eta);

        double f = safe_value(obj, x.head(n), x(n));
        Eigen::Vector2d h = prob.constraints(x.head(n));
        if (!std::isfinite(f) || h.cwiseAbs().maxCoeff() > 1e-8) continue;
        bool take = best.x.size() == 0 || f < best.objective - 1e-9;
        if (!take && f <= best.objective + 1e-9) {
            if ((x.head(n) - best.x.head(n)).cwiseAbs().maxCoeff() > 1e-6)
                degenerate = true; // distinct weights tied at the optimum
            if (lexicographically_smaller(x.head(n), best.x.head(n)))
                take = true; // keep the lexicographically smallest weights
        }
        if (take) {
            best.objective = f;
            best.x = x;
            best.eta = eta;
        }
    }
    if (best.x.size() == 0)
        throw Error(ErrorCode::SolverStall, "no start produced a feasible solution");

    Portfolio portfolio{best.x.head(n), mu_star};
    // Snap tiny boundary noise before reporting.
    for (int i = 0; i < n; ++i)
        if (portfolio.weights(i) < 0 && portfolio.weights(i) > -1e-12) portfolio.weights(i) = 0.0;

    Multipliers mult = [&] {
        if constexpr (std::is_same_v<Params, Model1Params>)
            return recover_multipliers_model1(p, level, portfolio, best.x(n));
        else
            return recover_multipliers_model2(p, level, portfolio, best.x(n));
    }();
    KktReport report = [&] {
        if constexpr (std::is_same_v<Params, Model1Params>)
            return kkt_check_model1(p, level, portfolio, best.x(n), mult);
        else
            return kkt_check_model2(p, level, portfolio, best.x(n), mult);
    }();

    if (report.stationarity_inf_norm > opts.stationarity_tol && opts.throw_on_stall)
        throw Error(ErrorCode::SolverStall,
                    "stationarity " + std::to_string(report.stationarity_inf_norm) +
                        " above tolerance; best objective " + std::to_string(best.objective));

    EvarResult evar;
    evar.value = best.objective;
    evar.s_star = best.x(n);
    evar.converged = report.stationarity_inf_norm <= opts.stationarity_tol;
    evar.status = EvarStatus::Converged;
    return EvarSolution{portfolio, evar, report, best.objective, degenerate};
}

template <class Params>
KktReport kkt_check_impl(const Params& p, RiskLevel level, const Portfolio& portfolio, double s,
                         const Multipliers& multipliers) {
    EvarObjective obj = make_objective(p, level);
    const int n = static_cast<int>(obj.means.size());
    const Vector& w = portfolio.weights;
    Vector gw;
    double gs;
    obj.gradient(w, s, gw, gs);

    Vector stationarity(n + 1);
    stationarity.head(n) = gw + multipliers.eta(0) * obj.means +
                           multipliers.eta(1) * Vector::Ones(n) - multipliers.nu.head(n);
    stationarity(n) = gs - multipliers.nu(n);

    KktReport report;
    report.multipliers = multipliers;
    report.stationarity_inf_norm = stationarity.cwiseAbs().maxCoeff();
    double h1 = obj.means.dot(w) - portfolio.target_return;
    double h2 = w.sum() - 1.0;
    double bound_violation = std::max(0.0, -std::min(w.minCoeff(), s));
    report.primal_feasibility = std::max({std::abs(h1), std::abs(h2), bound_violation});
    double comp = 0.0;
    for (int i = 0; i < n; ++i) comp = std::max(comp, std::abs(multipliers.nu(i) * (-w(i))));
    comp = std::max(comp, std::abs(multipliers.nu(n) * (-s)));
    report.complementarity = comp;
    report.dual_feasibility = std::max(0.0, -multipliers.nu.minCoeff());
    return report;
}

template <class Params>
Multipliers recover_multipliers_impl(const Params& p, RiskLevel level, const Portfolio& portfolio,
                                     double s) {
    EvarObjective obj = make_objective(p, level);
    const int n = static_cast<int>(obj.means.size());
    const Vector& w = portfolio.weights;
    Vector gw;
    double gs;
    obj.gradient(w, s, gw, gs);

    // Least-squares fit of (eta, nu) to the stationarity system
    // grad f + eta1 means + eta2 1 - nu = 0, with nu supported on the active
    // bounds and kept nonnegative. Nonnegativity needs a Lawson-Hanson style
    // loop: columns enter while their stationarity residual is positive and
    // leave when their fitted coefficient turns negative.
    std::vector<int> active;
    for (int i = 0; i < n; ++i)
        if (w(i) <= kActiveTol) active.push_back(i);

    std::vector<bool> in_set(active.size(), false);
    Eigen::Vector2d eta = Eigen::Vector2d::Zero();
    Vector nu = Vector::Zero(n + 1);
    const double scale = std::max(1.0, gw.cwiseAbs().maxCoeff());
    for (int round = 0; round < 4 * (n + 2); ++round) {
        int cols = 2;
        std::vector<int> col_of(active.size(), -1);
        for (std::size_t k = 0; k < active.size(); ++k)
            if (in_set[k]) col_of[k] = cols++;
        Matrix M = Matrix::Zero(n, cols);
        for (int i = 0; i < n; ++i) {
            M(i, 0) = obj.means(i);
            M(i, 1) = 1.0;
        }
        for (std::size_t k = 0; k < active.size(); ++k)
            if (in_set[k]) M(active[k], col_of[k]) = -1.0;
        Vector sol = M.completeOrthogonalDecomposition().solve(Vector(-gw));
        eta = sol.head(2);

        // Remove the most negative fitted multiplier, if any.
        int worst = -1;
        double worst_val = -1e-12 * scale;
        for (std::size_t k = 0; k < active.size(); ++k) {
            if (in_set[k] && sol(col_of[k]) < worst_val) {
                worst_val = sol(col_of[k]);
                worst = static_cast<int>(k);
            }
        }
        if (worst >= 0) {
            in_set[static_cast<std::size_t>(worst)] = false;
            continue;
        }

        // Bring in the active bound whose stationarity residual is most
        // positive; a nonnegative coefficient there can zero the row.
        Vector residual = gw + eta(0) * obj.means + eta(1) * Vector::Ones(n);
        for (std::size_t k = 0; k < active.size(); ++k)
            if (in_set[k]) residual(active[k]) = 0.0; // fitted rows are exact
        int enter = -1;
        double enter_val = 1e-12 * scale;
        for (std::size_t k = 0; k < active.size(); ++k) {
            if (!in_set[k] && residual(active[k]) > enter_val) {
                enter_val = residual(active[k]);
                enter = static_cast<int>(k);
            }
        }
        if (enter < 0) {
            for (std::size_t k = 0; k < active.size(); ++k)
                if (in_set[k]) nu(active[k]) = std::max(0.0, sol(col_of[k]));
            break;
        }
        in_set[static_cast<std::size_t>(enter)] = true;
    }

    Multipliers m;
    m.eta = eta;
    m.nu = nu;
    if (s <= 1e-7) m.nu(n) = std::max(0.0, gs);
    return m;
}

} // namespace

EvarSolution solve_evar_model1(const Model1Params& p, RiskLevel level, double mu_star,
                               const SolveOptions& opts) {
    return solve_evar_impl(p, level, mu_star, opts);
}

EvarSolution solve_evar_model2(const Model2Params& p, RiskLevel level, double mu_star,
                               const SolveOptions& opts) {
    return solve_evar_impl(p, level, mu_star, opts);
}

KktReport kkt_check_model1(const Model1Params& p, RiskLevel level, const Portfolio& portfolio,
                           double s, const Multipliers& multipliers) {
    return kkt_check_impl(p, level, portfolio, s, multipliers);
}

KktReport kkt_check_model2(const Model2Params& p, RiskLevel level, const Portfolio& portfolio,
                           double s, const Multipliers& multipliers) {
    return kkt_check_impl(p, level, portfolio, s, multipliers);
}

Multipliers recover_multipliers_model1(const Model1Params& p, RiskLevel level,
                                       const Portfolio& portfolio, double s) {
    return recover_multipliers_impl(p, level, portfolio, s);
}

Multipliers recover_multipliers_model2(const Model2Params& p, RiskLevel level,
                                       const Portfolio& portfolio, double s) {
    return recover_multipliers_impl(p, level, portfolio, s);
}

namespace {

template <class Params>
std::vector<FrontierPoint> frontier_impl(const Params& p, RiskLevel level,
                                         const std::vector<double>& targets, RiskKind kind,
                                         int jobs, const SolveOptions& opts) {
    validate(p);
    Matrix cov;
    Vector means;
    if constexpr (std::is_same_v<Params, Model1Params>) {
        cov = covariance_model1(p);
        means = mean_model1(p);
    } else {
        cov = covariance_model2(p);
        means = mean_model2(p);
    }
    auto kappa = [&] {
        if constexpr (std::is_same_v<Params, Model1Params>) return kappa_model1(p);
        else return kappa_model2(p);
    }();

    std::vector<FrontierPoint> points(targets.size());
    auto solve_one = [&](std::size_t idx) {
        FrontierPoint& pt = points[idx];
        pt.target_return = targets[idx];
        try {
            if (kind == RiskKind::EVAR) {
                SolveOptions point_opts = opts;
                point_opts.throw_on_stall = false;
                EvarSolution sol = [&] {
                    if constexpr (std::is_same_v<Params, Model1Params>)
                        return solve_evar_model1(p, level, targets[idx], point_opts);
                    else
                        return solve_evar_model2(p, level, targets[idx], point_opts);
                }();
                pt.weights = sol.portfolio.weights;
                pt.s_star = sol.evar.s_star;
                pt.evar_value = sol.objective;
                pt.stdev_value = stdev_portfolio(cov, sol.portfolio.weights);
                pt.converged = sol.evar.converged;
            } else {
                Portfolio mv = solve_min_variance(cov, means, targets[idx]);
                EvarResult ev = evar_analytic(kappa, mv.weights, level);
                pt.weights = mv.weights;
                pt.s_star = ev.s_star;
                pt.evar_value = ev.value;
                pt.stdev_value = stdev_portfolio(cov, mv.weights);
                pt.converged = true;
            }
        } catch (const Error& e) {
            pt.error = e.what();
            pt.converged = false;
            pt.evar_value = std::numeric_limits<double>::quiet_NaN();
            pt.stdev_value = std::numeric_limits<double>::quiet_NaN();
        }
    };

    jobs = std::max(1, jobs);
    if (jobs == 1 || targets.size() <= 1) {
        for (std::size_t i = 0; i < targets.size(); ++i) solve_one(i);
    } else {
        std::vector<std::thread> workers;
        std::size_t count = targets.size();
        for (int t = 0; t < jobs; ++t) {
            workers.emplace_back([&, t] {
                for (std::size_t i = static_cast<std::size_t>(t); i < count;
                     i += static_cast<std::size_t>(jobs))
                    solve_one(i);
            });
        }
        for (auto& th : workers) th.join();
    }
    return points;
}

} // namespace

std::vector<FrontierPoint> efficient_frontier(const Model1Params& p, RiskLevel level,
                                              const std::vector<double>& targets, RiskKind kind,
                                              int jobs, const SolveOptions& opts) {
    return frontier_impl(p, level, targets, kind, jobs, opts);
}

std::vector<FrontierPoint> efficient_frontier(const Model2Params& p, RiskLevel level,
                                              const std::vector<double>& targets, RiskKind kind,
                                              int jobs, const SolveOptions& opts) {
    return frontier_impl(p, level, targets, kind, jobs, opts);
}

std::string frontier_to_csv(const std::vector<FrontierPoint>& points) {
    Eigen::Index n = 0;
    for (const auto& pt : points)
        if (pt.weights.size() > 0) n = pt.weights.size();
    std::string out = "target_return,evar,stdev,s_star";
    for (Eigen::Index i = 0; i < n; ++i) out += ",w_" + std::to_string(i + 1);
    out += "\n";
    char buf[64];
    auto append = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        out += buf;
    };
    for (const auto& pt : points) {
        append(pt.target_return);
        out += ",";
        append(pt.evar_value);
        out += ",";
        append(pt.stdev_value);
        out += ",";
        append(pt.s_star);
        for (Eigen::Index i = 0; i < n; ++i) {
            out += ",";
            append(pt.weights.size() > i ? pt.weights(i) : std::numeric_limits<double>::quiet_NaN());
        }
        out += "\n";
    }
    return out;
}

} // namespace evarport
