#include "evarport/model.hpp"

#include <cmath>
#include <vector>

#include "evarport/rng.hpp"

namespace evarport {

namespace {

void check_symmetric_psd(const Matrix& m, const char* name) {
    if (m.rows() != m.cols())
        throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be square");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw Error(ErrorCode::InvalidArgument, std::string(name) + " is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10)
        throw Error(ErrorCode::InvalidArgument,
                    std::string(name) + " has an eigenvalue below -1e-10");
}

void check_size(const Vector& v, int n, const char* name) {
    if (v.size() != n)
        throw Error(ErrorCode::InvalidArgument, std::string(name) + " has wrong length");
}

double guarded_exp_arg(double x, double cap) {
    if (!(x <= cap))
        throw Error(ErrorCode::ExponentOverflow, "exponent argument " + std::to_string(x) +
                                                     " exceeds cap " + std::to_string(cap));
    return x;
}

/// Poisson pmf table for k = 0..K where K is the smallest index whose
/// cumulative mass reaches 1 - tail_mass.
std::vector<double> poisson_weights(double mean, const TruncationPolicy& t) {
    std::vector<double> w;
    if (mean <= 0.0) {
        w.push_back(1.0);
        return w;
    }
    double p = std::exp(-mean);
    double cum = p;
    w.push_back(p);
    while (cum < 1.0 - t.tail_mass) {
        if (static_cast<int>(w.size()) >= t.max_terms)
            throw Error(ErrorCode::TruncationBudgetExceeded,
                        "max_terms=" + std::to_string(t.max_terms) +
                            " reached before tail mass target (mean=" + std::to_string(mean) + ")");
        p *= mean / static_cast<double>(w.size());
        cum += p;
        w.push_back(p);
    }
    return w;
}

double gaussian_density(const Vector& r, const Vector& mean, const Matrix& cov) {
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::SingularCovariance,
                    "mixture term covariance is not positive definite");
    const auto& L = llt.matrixL();
    Vector z = L.solve(r - mean);
    double log_det_half = 0.0;
    for (Eigen::Index i = 0; i < cov.rows(); ++i) log_det_half += std::log(L(i, i));
    double log_pdf = -0.5 * z.squaredNorm() - log_det_half -
                     0.5 * static_cast<double>(cov.rows()) * std::log(2.0 * M_PI);
    return std::exp(log_pdf);
}

} // namespace

void validate(const Model1Params& p) {
    if (p.n <= 0) throw Error(ErrorCode::InvalidArgument, "asset count must be positive");
    check_size(p.mu_tilde, p.n, "mu_tilde");
    check_size(p.lambda, p.n, "lambda");
    check_size(p.theta, p.n, "theta");
    check_size(p.sigma_jump, p.n, "sigma_jump");
    check_size(p.mu, p.n, "mu");
    if (p.sigma < 0) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
    if (p.gamma < 0) throw Error(ErrorCode::InvalidArgument, "gamma must be >= 0");
    if (p.lambda.minCoeff() < 0)
        throw Error(ErrorCode::InvalidArgument, "lambda must be elementwise >= 0");
    if (p.sigma_jump.minCoeff() < 0)
        throw Error(ErrorCode::InvalidArgument, "sigma_jump must be elementwise >= 0");
    if (p.A.rows() != p.n) throw Error(ErrorCode::InvalidArgument, "A has wrong size");
    check_symmetric_psd(p.A, "A");
}

void validate(const Model2Params& p) {
    if (p.n <= 0) throw Error(ErrorCode::InvalidArgument, "asset count must be positive");
    check_size(p.mu_tilde, p.n, "mu_tilde");
    check_size(p.mu, p.n, "mu");
    if (p.lambda < 0) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
    if (p.Q.rows() != p.n) throw Error(ErrorCode::InvalidArgument, "Q has wrong size");
    if (p.A.rows() != p.n) throw Error(ErrorCode::InvalidArgument, "A has wrong size");
    check_symmetric_psd(p.Q, "Q");
    check_symmetric_psd(p.A, "A");
}

void validate(const TruncationPolicy& t) {
    if (!(t.tail_mass > 0.0 && t.tail_mass < 1.0))
        throw Error(ErrorCode::InvalidArgument, "tail_mass must lie in (0,1)");
    if (t.max_terms < 1) throw Error(ErrorCode::InvalidArgument, "max_terms must be >= 1");
}

Vector mean_model1(const Model1Params& p) {
    return p.mu_tilde + p.lambda.cwiseProduct(p.theta) + p.gamma * p.mu;
}

Matrix covariance_model1(const Model1Params& p) {
    Matrix cov = p.gamma * (p.A + p.mu * p.mu.transpose());
    for (int i = 0; i < p.n; ++i)
        cov(i, i) += p.sigma * p.sigma +
                     p.lambda(i) * (p.theta(i) * p.theta(i) + p.sigma_jump(i) * p.sigma_jump(i));
    return cov;
}

Vector mean_model2(const Model2Params& p) { return p.mu_tilde + p.lambda * p.mu; }

Matrix covariance_model2(const Model2Params& p) {
    return p.Q + p.lambda * (p.A + p.mu * p.mu.transpose());
}

double laplace_exponent_model1(const Model1Params& p, const Vector& u, double exp_cap) {
    double value = -u.dot(p.mu_tilde) + 0.5 * p.sigma * p.sigma * u.squaredNorm();
    value += p.gamma *
             std::expm1(guarded_exp_arg(-u.dot(p.mu) + 0.5 * u.dot(p.A * u), exp_cap));
    for (int k = 0; k < p.n; ++k)
        value += p.lambda(k) *
                 std::expm1(guarded_exp_arg(
                     -p.theta(k) * u(k) + 0.5 * p.sigma_jump(k) * p.sigma_jump(k) * u(k) * u(k),
                     exp_cap));
    return value;
}

double laplace_exponent_model2(const Model2Params& p, const Vector& u, double exp_cap) {
    double value = -u.dot(p.mu_tilde) + 0.5 * u.dot(p.Q * u);
    value += p.lambda *
             std::expm1(guarded_exp_arg(-u.dot(p.mu) + 0.5 * u.dot(p.A * u), exp_cap));
    return value;
}

Vector laplace_gradient_model1(const Model1Params& p, const Vector& u, double exp_cap) {
    Vector grad = -p.mu_tilde + p.sigma * p.sigma * u;
    Vector Au = p.A * u;
    double systemic = std::exp(guarded_exp_arg(-u.dot(p.mu) + 0.5 * u.dot(Au), exp_cap));
    grad += p.gamma * systemic * (Au - p.mu);
    for (int k = 0; k < p.n; ++k) {
        double sk2 = p.sigma_jump(k) * p.sigma_jump(k);
        double own = std::exp(
            guarded_exp_arg(-p.theta(k) * u(k) + 0.5 * sk2 * u(k) * u(k), exp_cap));
        grad(k) += p.lambda(k) * own * (sk2 * u(k) - p.theta(k));
    }
    return grad;
}

Vector laplace_gradient_model2(const Model2Params& p, const Vector& u, double exp_cap) {
    Vector Au = p.A * u;
    double jump = std::exp(guarded_exp_arg(-u.dot(p.mu) + 0.5 * u.dot(Au), exp_cap));
    return -p.mu_tilde + p.Q * u + p.lambda * jump * (Au - p.mu);
}

double density_model1(const Model1Params& p, const Vector& r, const TruncationPolicy& t) {
    validate(t);
    check_size(r, p.n, "r");
    std::vector<std::vector<double>> own_weights(p.n);
    for (int i = 0; i < p.n; ++i) own_weights[i] = poisson_weights(p.lambda(i), t);
    std::vector<double> systemic_weights = poisson_weights(p.gamma, t);

    // Nested product loop over the per-asset jump counts; odometer-style.
    std::vector<int> counts(p.n, 0);
    double total = 0.0;
    const double sigma2 = p.sigma * p.sigma;
    while (true) {
        double own_w = 1.0;
        for (int i = 0; i < p.n; ++i) own_w *= own_weights[i][counts[i]];
        Vector base_mean = p.mu_tilde;
        Vector base_var = Vector::Constant(p.n, sigma2);
        for (int i = 0; i < p.n; ++i) {
            base_mean(i) += counts[i] * p.theta(i);
            base_var(i) += counts[i] * p.sigma_jump(i) * p.sigma_jump(i);
        }
        for (std::size_t m = 0; m < systemic_weights.size(); ++m) {
            Matrix cov = static_cast<double>(m) * p.A;
            cov.diagonal() += base_var;
            Vector mean = base_mean + static_cast<double>(m) * p.mu;
            total += own_w * systemic_weights[m] * gaussian_density(r, mean, cov);
        }
        int idx = 0;
        while (idx < p.n) {
            if (++counts[idx] < static_cast<int>(own_weights[idx].size())) break;
            counts[idx] = 0;
            ++idx;
        }
        if (idx == p.n) break;
    }
    return total;
}

double density_model2(const Model2Params& p, const Vector& r, const TruncationPolicy& t) {
    validate(t);
    check_size(r, p.n, "r");
    std::vector<double> weights = poisson_weights(p.lambda, t);
    double total = 0.0;
    for (std::size_t m = 0; m < weights.size(); ++m) {
        Matrix cov = p.Q + static_cast<double>(m) * p.A;
        Vector mean = p.mu_tilde + static_cast<double>(m) * p.mu;
        total += weights[m] * gaussian_density(r, mean, cov);
    }
    return total;
}

Matrix cholesky_with_jitter(const Matrix& m) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    const double base = std::max(m.diagonal().mean(), 1.0e-300);
    for (double jitter = 1e-12 * base; jitter <= 1e-4 * base; jitter *= 10.0) {
        Matrix shifted = m;
        shifted.diagonal().array() += jitter;
        llt.compute(shifted);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    throw Error(ErrorCode::SingularCovariance, "Cholesky failed even with jitter");
}

namespace {

ReturnSample make_sample(int n, long count) {
    if (count < 1) throw Error(ErrorCode::InvalidArgument, "count must be >= 1");
    ReturnSample sample;
    sample.asset_names.reserve(n);
    for (int i = 0; i < n; ++i) sample.asset_names.push_back("asset_" + std::to_string(i + 1));
    sample.returns.resize(count, n);
    return sample;
}

} // namespace

ReturnSample sample_model1(const Model1Params& p, long count, std::uint64_t seed) {
    validate(p);
    ReturnSample sample = make_sample(p.n, count);
    const bool has_systemic = p.gamma > 0.0 && (p.A.cwiseAbs().maxCoeff() > 0.0 ||
                                                p.mu.cwiseAbs().maxCoeff() > 0.0);
    Matrix La;
    if (has_systemic) La = cholesky_with_jitter(p.A);
    Vector row(p.n), z(p.n);
    for (long r = 0; r < count; ++r) {
        Rng rng(seed, static_cast<std::uint64_t>(r));
        for (int i = 0; i < p.n; ++i) row(i) = p.mu_tilde(i) + p.sigma * rng.normal();
        // Conditional on the jump count the compound sum is Gaussian; draw it
        // directly instead of summing individual jumps.
        for (int i = 0; i < p.n; ++i) {
            if (p.lambda(i) <= 0.0) continue;
            double k = static_cast<double>(rng.poisson(p.lambda(i)));
            if (k > 0.0)
                row(i) += k * p.theta(i) + std::sqrt(k) * p.sigma_jump(i) * rng.normal();
        }
        if (has_systemic) {
            double m = static_cast<double>(rng.poisson(p.gamma));
            if (m > 0.0) {
                for (int i = 0; i < p.n; ++i) z(i) = rng.normal();
                row += m * p.mu + std::sqrt(m) * (La * z);
            }
        }
        sample.returns.row(r) = row;
    }
    return sample;
}

ReturnSample sample_model2(const Model2Params& p, long count, std::uint64_t seed) {
    validate(p);
    ReturnSample sample = make_sample(p.n, count);
    Matrix Lq = cholesky_with_jitter(p.Q);
    const bool has_jump = p.lambda > 0.0 && (p.A.cwiseAbs().maxCoeff() > 0.0 ||
                                             p.mu.cwiseAbs().maxCoeff() > 0.0);
    Matrix La;
    if (has_jump) La = cholesky_with_jitter(p.A);
    Vector row(p.n), z(p.n);
    for (long r = 0; r < count; ++r) {
        Rng rng(seed, static_cast<std::uint64_t>(r));
        for (int i = 0; i < p.n; ++i) z(i) = rng.normal();
        row = p.mu_tilde + Lq * z;
        if (has_jump) {
            double m = static_cast<double>(rng.poisson(p.lambda));
            if (m > 0.0) {
                for (int i = 0; i < p.n; ++i) z(i) = rng.normal();
                row += m * p.mu + std::sqrt(m) * (La * z);
            }
        }
        sample.returns.row(r) = row;
    }
    return sample;
}

std::function<double(const Vector&)> kappa_model1(const Model1Params& p, double exp_cap) {
    return [p, exp_cap](const Vector& u) { return laplace_exponent_model1(p, u, exp_cap); };
}

std::function<double(const Vector&)> kappa_model2(const Model2Params& p, double exp_cap) {
    return [p, exp_cap](const Vector& u) { return laplace_exponent_model2(p, u, exp_cap); };
}

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
        case ErrorCode::ExponentOverflow: return "EXPONENT_OVERFLOW";
        case ErrorCode::SingularCovariance: return "SINGULAR_COVARIANCE";
        case ErrorCode::TruncationBudgetExceeded: return "TRUNCATION_BUDGET_EXCEEDED";
        case ErrorCode::EmptySample: return "EMPTY_SAMPLE";
        case ErrorCode::NegativeQuadraticForm: return "NEGATIVE_QUADRATIC_FORM";
        case ErrorCode::NoInteriorMinimum: return "NO_INTERIOR_MINIMUM";
        case ErrorCode::InfeasibleTarget: return "INFEASIBLE_TARGET";
        case ErrorCode::SolverStall: return "SOLVER_STALL";
        case ErrorCode::SingularG: return "SINGULAR_G";
        case ErrorCode::AllStartsFailed: return "ALL_STARTS_FAILED";
        case ErrorCode::ParseError: return "PARSE_ERROR";
        case ErrorCode::NonPositivePrice: return "NON_POSITIVE_PRICE";
        case ErrorCode::EmptyIntersection: return "EMPTY_INTERSECTION";
        case ErrorCode::TooFewRows: return "TOO_FEW_ROWS";
    }
    return "UNKNOWN";
}

} // namespace evarport
