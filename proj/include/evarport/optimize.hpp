#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evarport/model.hpp"
#include "evarport/risk.hpp"

namespace evarport {

/// Long-only, fully invested weight vector with its target return.
struct Portfolio {
    Vector weights;
    double target_return = 0;
};

struct Multipliers {
    Vector nu;  // n+1 inequality multipliers (weights >= 0, s >= 0)
    Eigen::Vector2d eta; // equality multipliers (return, budget)
};

struct KktReport {
    double stationarity_inf_norm = 0;
    double primal_feasibility = 0; // max constraint violation
    double complementarity = 0;    // max |nu_k g_k|
    double dual_feasibility = 0;   // max(0, -min nu_k)
    Multipliers multipliers;
};

struct FrontierPoint {
    double target_return = 0;
    Vector weights;
    double s_star = 0;
    double evar_value = 0;
    double stdev_value = 0;
    bool converged = false;
    std::string error; // per-point failure note; empty on success
};

enum class RiskKind { EVAR, STDEV };

struct SolveOptions {
    int random_starts = 8;     // feasible restarts in addition to the QP warm start
    std::uint64_t seed = 2024;
    double stationarity_tol = 1e-6;
    double feasibility_tol = 1e-10;
    double s_floor = 1e-8;
    int max_outer = 60;        // augmented-Lagrangian rounds
    int max_inner = 4000;      // projected-gradient steps per round
    bool throw_on_stall = true;
};

struct EvarSolution {
    Portfolio portfolio;
    EvarResult evar;
    KktReport kkt;
    double objective = 0;
    // Distinct weight vectors tied at the optimum (within 1e-9); the
    // lexicographically smallest one is returned.
    bool degenerate_optimum = false;
};

/// Joint (weights, s) minimization of the portfolio EVaR objective under the
/// simplex and target-return constraints: augmented-Lagrangian outer loop,
/// projected-gradient inner iterations, active-set Newton polish.
/// Throws Error{InfeasibleTarget} if mu_star is outside [min mean, max mean],
/// Error{SolverStall} if the KKT tolerance cannot be met.
EvarSolution solve_evar_model1(const Model1Params& p, RiskLevel level, double mu_star,
                               const SolveOptions& opts = {});
EvarSolution solve_evar_model2(const Model2Params& p, RiskLevel level, double mu_star,
                               const SolveOptions& opts = {});

/// Markowitz minimum-variance weights for the same constraint set, via a
/// primal active-set QP. Throws Error{InfeasibleTarget}.
Portfolio solve_min_variance(const Matrix& cov, const Vector& means, double mu_star);

/// Evaluates the KKT residuals of the EVaR problem at (portfolio, s) with the
/// supplied multipliers. Reports magnitudes only; judgement is the caller's.
KktReport kkt_check_model1(const Model1Params& p, RiskLevel level, const Portfolio& portfolio,
                           double s, const Multipliers& multipliers);
KktReport kkt_check_model2(const Model2Params& p, RiskLevel level, const Portfolio& portfolio,
                           double s, const Multipliers& multipliers);

/// Least-squares multiplier recovery from the stationarity system, with the
/// inequality multipliers clamped to be nonnegative.
Multipliers recover_multipliers_model1(const Model1Params& p, RiskLevel level,
                                       const Portfolio& portfolio, double s);
Multipliers recover_multipliers_model2(const Model2Params& p, RiskLevel level,
                                       const Portfolio& portfolio, double s);

/// One frontier point per target, solved independently (optionally in
/// parallel); per-point failures are recorded on the point, not thrown.
/// Every point carries both risk numbers for cross-plotting.
std::vector<FrontierPoint> efficient_frontier(const Model1Params& p, RiskLevel level,
                                              const std::vector<double>& targets, RiskKind kind,
                                              int jobs = 1, const SolveOptions& opts = {});
std::vector<FrontierPoint> efficient_frontier(const Model2Params& p, RiskLevel level,
                                              const std::vector<double>& targets, RiskKind kind,
                                              int jobs = 1, const SolveOptions& opts = {});

/// CSV with header target_return,evar,stdev,s_star,w_1..w_n.
std::string frontier_to_csv(const std::vector<FrontierPoint>& points);

/// Vertices of the feasible polytope {w >= 0, sum w = 1, means.w = mu_star}
/// (basic solutions with at most two nonzero weights). Used for feasible
/// starts; throws Error{InfeasibleTarget} when the polytope is empty.
std::vector<Vector> feasible_vertices(const Vector& means, double mu_star);

/// Random convex combination of the feasible vertices.
Vector random_feasible_point(const std::vector<Vector>& vertices, std::uint64_t seed,
                             std::uint64_t stream);

// Portfolio EVaR objective f(w, s) and its analytic gradient, bound to a
// model; the same expressions the solver and the KKT checker consume.
struct EvarObjective {
    std::function<double(const Vector&)> kappa;
    std::function<Vector(const Vector&)> kappa_grad;
    Vector means; // model-implied asset means (return-constraint coefficients)
    double alpha = 0.05;

    double value(const Vector& w, double s) const;
    void gradient(const Vector& w, double s, Vector& grad_w, double& grad_s) const;
};

EvarObjective make_objective(const Model1Params& p, RiskLevel level);
EvarObjective make_objective(const Model2Params& p, RiskLevel level);

} // namespace evarport
