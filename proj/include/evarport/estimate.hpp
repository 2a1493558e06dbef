#pragma once

#include <cstdint>
#include <variant>

#include "evarport/model.hpp"

namespace evarport {

enum class ModelKind { MODEL1, MODEL2 };

/// Extended-least-squares fitting problem. The sample mean and scatter are
/// precomputed once; the objective is O(1) in the number of observations
/// because the model-implied moments do not vary across rows.
struct ElsProblem {
    ModelKind kind = ModelKind::MODEL2;
    int n = 0;        // assets
    long n_obs = 0;   // observations
    Vector sample_mean;
    Matrix sample_scatter; // (1/N) sum (y_i - ybar)(y_i - ybar)'

    static ElsProblem from_sample(const ReturnSample& data, ModelKind kind);
};

using FittedParams = std::variant<Model1Params, Model2Params>;

struct FitResult {
    FittedParams params;
    double objective = 0;
    long iterations = 0; // objective evaluations of the winning start
    bool converged = false;
    long n_obs = 0;
    // Fit diagnostics: model-implied moments next to the sample moments.
    Vector implied_mean;
    Matrix implied_cov;
    Vector sample_mean;
    Matrix sample_cov;
};

struct FitOptions {
    int starts = 16;
    std::uint64_t seed = 7;
    long max_evaluations = 20000; // per start
    double simplex_tol = 1e-8;    // simplex diameter
    double objective_tol = 1e-10; // objective spread across the simplex
    // Starts whose objective lands within this window of the best are tied;
    // ties go to the smallest total jump intensity (the moment maps do not
    // identify the jump decomposition, so parsimony breaks the tie).
    double tie_window = 1e-6;
};

/// ELS objective sum_i [(y_i - mu) G^-1 (y_i - mu)' + ln|G|] evaluated in
/// trace form. Throws Error{SingularG} if G is not positive definite.
double els_objective(const ElsProblem& problem, const Model1Params& params);
double els_objective(const ElsProblem& problem, const Model2Params& params);

/// Multi-start Nelder-Mead minimization of the ELS objective over an
/// unconstrained reparameterization. Throws Error{AllStartsFailed} if no
/// start produces a finite objective.
FitResult fit_els(const ElsProblem& problem, const FitOptions& opts = {});

/// Bijections between valid parameters and unconstrained optimizer space:
/// softplus for scalars that must stay positive, Cholesky-style triangular
/// factors with softplus diagonals for the covariance blocks.
struct Model1Reparam {
    int n;
    explicit Model1Reparam(int assets) : n(assets) {}
    int dim() const { return 5 * n + 2 + n * (n + 1) / 2; }
    Vector pack(const Model1Params& p) const;
    Model1Params unpack(const Vector& x) const;
};

struct Model2Reparam {
    int n;
    explicit Model2Reparam(int assets) : n(assets) {}
    int dim() const { return 2 * n + 1 + n * (n + 1); }
    Vector pack(const Model2Params& p) const;
    Model2Params unpack(const Vector& x) const;
};

double softplus(double x);
double softplus_inverse(double y);

} // namespace evarport
