#pragma once

#include <cstdint>
#include <functional>

#include "evarport/errors.hpp"
#include "evarport/types.hpp"

namespace evarport {

/// Jump-diffusion return model with independent per-asset diffusion
/// (common volatility), per-asset compound-Poisson jumps and a systemic
/// multivariate compound-Poisson jump:
///   R_i = X_i + sum_{k<=N_i} Y_ki + sum_{k<=M} W_ki,
///   X_i ~ N(mu_tilde_i, sigma^2), N_i ~ Pois(lambda_i),
///   Y_ki ~ N(theta_i, sigma_jump_i^2), M ~ Pois(gamma), W_k ~ N(mu, A).
struct Model1Params {
    int n = 0;
    Vector mu_tilde;   // per-asset diffusion mean
    double sigma = 0;  // common diffusion standard deviation
    Vector lambda;     // per-asset jump intensities
    Vector theta;      // per-asset jump-size means
    Vector sigma_jump; // per-asset jump-size standard deviations
    double gamma = 0;  // systemic jump intensity
    Vector mu;         // systemic jump mean
    Matrix A;          // systemic jump covariance (symmetric PSD)
};

/// Correlated-diffusion model with a single systemic compound-Poisson jump:
///   R = X + sum_{k<=M} W_k,  X ~ N(mu_tilde, Q), M ~ Pois(lambda), W_k ~ N(mu, A).
struct Model2Params {
    int n = 0;
    Vector mu_tilde;
    Matrix Q;          // diffusion covariance (symmetric PSD)
    double lambda = 0; // jump intensity
    Vector mu;         // jump mean
    Matrix A;          // jump covariance (symmetric PSD)
};

/// Controls how the infinite Poisson sums in the density evaluators are cut off.
struct TruncationPolicy {
    double tail_mass = 1e-10; // max Poisson mass discarded per summation index
    int max_terms = 64;       // hard cap on retained terms per index
};

/// Throws Error{InvalidArgument} if the invariants do not hold
/// (symmetry within 1e-12, eigenvalues >= -1e-10, nonnegative scalars).
void validate(const Model1Params& p);
void validate(const Model2Params& p);
void validate(const TruncationPolicy& t);

// Exact first and second moments of the per-period return vector.
Vector mean_model1(const Model1Params& p);
Matrix covariance_model1(const Model1Params& p);
Vector mean_model2(const Model2Params& p);
Matrix covariance_model2(const Model2Params& p);

/// Laplace exponent log E[exp(-u.R)]. Throws Error{ExponentOverflow} if any
/// exponent argument exceeds exp_cap.
double laplace_exponent_model1(const Model1Params& p, const Vector& u, double exp_cap = 700.0);
double laplace_exponent_model2(const Model2Params& p, const Vector& u, double exp_cap = 700.0);

/// Gradient of the Laplace exponent with respect to u.
Vector laplace_gradient_model1(const Model1Params& p, const Vector& u, double exp_cap = 700.0);
Vector laplace_gradient_model2(const Model2Params& p, const Vector& u, double exp_cap = 700.0);

/// Joint density of the return vector at r, evaluated by truncating the
/// Poisson mixture. Throws Error{SingularCovariance} if a retained term's
/// covariance is not positive definite, Error{TruncationBudgetExceeded} if
/// max_terms is reached before the tail-mass target.
double density_model1(const Model1Params& p, const Vector& r, const TruncationPolicy& t = {});
double density_model2(const Model2Params& p, const Vector& r, const TruncationPolicy& t = {});

/// Monte Carlo samplers; each row is an independent draw, deterministic
/// given (seed). Rows use per-row substreams so chunked parallel generation
/// would produce identical output.
ReturnSample sample_model1(const Model1Params& p, long count, std::uint64_t seed);
ReturnSample sample_model2(const Model2Params& p, long count, std::uint64_t seed);

/// The Laplace exponent as a callable of the direction u (binds a copy of
/// the parameters); the form consumed by the risk module.
std::function<double(const Vector&)> kappa_model1(const Model1Params& p, double exp_cap = 700.0);
std::function<double(const Vector&)> kappa_model2(const Model2Params& p, double exp_cap = 700.0);

/// Cholesky factor with an escalating diagonal jitter fallback (starting at
/// 1e-12 of the mean diagonal) for semidefinite inputs.
Matrix cholesky_with_jitter(const Matrix& m);

} // namespace evarport
