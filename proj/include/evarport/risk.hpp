#pragma once

#include <functional>

#include "evarport/errors.hpp"
#include "evarport/types.hpp"

namespace evarport {

/// Confidence parameter of the entropic value-at-risk functional,
/// EVaR_alpha(X) = inf_{s>0} (ln E[exp(-s X)] - ln alpha)/s.
/// Smaller alpha means a more conservative risk number; alpha = 0.05
/// corresponds to the 95% level.
struct RiskLevel {
    double alpha;
    explicit RiskLevel(double a);
};

enum class EvarStatus {
    Converged,
    // Objective still decreasing at the bracket cap: the infimum is the
    // s -> infinity limit (essential-supremum case); value/s_star report
    // the cap evaluation.
    NoInteriorMinimum,
};

struct EvarResult {
    double value = 0;  // EVaR in return units (loss is positive)
    double s_star = 0; // minimizing s
    int iterations = 0;
    bool converged = false;
    EvarStatus status = EvarStatus::Converged;
};

struct EvarOptions {
    double s_init = 1.0;
    double bracket_factor = 4.0;
    double s_min = 1e-8;
    double s_max = 1e6;
    double bracket_width = 1e-12; // golden-section stop, relative to the midpoint
};

/// Minimizes f(s) = (kappa(s * weights) - ln alpha)/s over s > 0 by geometric
/// bracketing, golden-section refinement and one finite-difference Newton
/// polish. Overflow in kappa is treated as +infinity while searching.
EvarResult evar_analytic(const std::function<double(const Vector&)>& kappa, const Vector& weights,
                         RiskLevel level, const EvarOptions& opts = {});

/// Same minimization with the empirical log-MGF of the portfolio returns
/// (log-sum-exp evaluation). Throws Error{EmptySample} on empty input.
EvarResult evar_empirical(const ReturnSample& sample, const Vector& weights, RiskLevel level,
                          const EvarOptions& opts = {});

/// Empirical alpha-quantile of the loss -w.R; lower-quantile convention
/// (smallest loss value whose empirical CDF reaches 1 - alpha).
double var_empirical(const ReturnSample& sample, const Vector& weights, RiskLevel level);

/// sqrt(w' cov w). Throws Error{NegativeQuadraticForm} if the quadratic form
/// is below -1e-12; tiny negatives are clamped to zero.
double stdev_portfolio(const Matrix& cov, const Vector& weights);

/// The scalar objective f(s) used by both EVaR paths; exposed for tests.
double evar_objective(const std::function<double(const Vector&)>& kappa, const Vector& weights,
                      double alpha, double s);

} // namespace evarport
