#include "evarport/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "evarport/rng.hpp"

namespace evarport {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double softplus_inverse(double y) {
    y = std::max(y, 1e-12); // zero-valued parameters map to a deep negative raw
    return y > 30.0 ? y : std::log(std::expm1(y));
}

ElsProblem ElsProblem::from_sample(const ReturnSample& data, ModelKind kind) {
    if (data.returns.rows() < 1) throw Error(ErrorCode::EmptySample, "no observations");
    if (!data.returns.allFinite())
        throw Error(ErrorCode::InvalidArgument, "return sample contains non-finite entries");
    ElsProblem problem;
    problem.kind = kind;
    problem.n = static_cast<int>(data.returns.cols());
    problem.n_obs = data.returns.rows();
    problem.sample_mean = data.returns.colwise().mean();
    Matrix centered = data.returns.rowwise() - problem.sample_mean.transpose();
    problem.sample_scatter =
        (centered.transpose() * centered) / static_cast<double>(problem.n_obs);
    return problem;
}

namespace {

/// N * (ln|G| + tr(G^-1 S) + d' G^-1 d) with d = ybar - mu; equal to the
/// row-by-row sum because the model-implied moments are constant across rows.
double els_objective_moments(const ElsProblem& problem, const Vector& mu, const Matrix& G) {
    Eigen::LLT<Matrix> llt(G);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::SingularG, "implied covariance is not positive definite");
    double log_det = 0.0;
    for (int i = 0; i < problem.n; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
    Matrix Ginv_S = llt.solve(problem.sample_scatter);
    Vector d = problem.sample_mean - mu;
    double quad = d.dot(llt.solve(d));
    return static_cast<double>(problem.n_obs) * (log_det + Ginv_S.trace() + quad);
}

} // namespace

double els_objective(const ElsProblem& problem, const Model1Params& params) {
    if (params.n != problem.n) throw Error(ErrorCode::InvalidArgument, "asset count mismatch");
    return els_objective_moments(problem, mean_model1(params), covariance_model1(params));
}

double els_objective(const ElsProblem& problem, const Model2Params& params) {
    if (params.n != problem.n) throw Error(ErrorCode::InvalidArgument, "asset count mismatch");
    return els_objective_moments(problem, mean_model2(params), covariance_model2(params));
}

// ---------------------------------------------------------------------------
// Reparameterization
// ---------------------------------------------------------------------------

namespace {

int tri_size(int n) { return n * (n + 1) / 2; }

void pack_tri(const Matrix& m, double* out) {
    Matrix L = cholesky_with_jitter(m);
    int k = 0;
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c <= r; ++c)
            out[k++] = (r == c) ? softplus_inverse(L(r, c)) : L(r, c);
}

Matrix unpack_tri(int n, const double* in) {
    Matrix L = Matrix::Zero(n, n);
    int k = 0;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c <= r; ++c) {
            double v = in[k++];
            L(r, c) = (r == c) ? softplus(v) : v;
        }
    }
    return L * L.transpose();
}

} // namespace

Vector Model1Reparam::pack(const Model1Params& p) const {
    Vector x(dim());
    int k = 0;
    for (int i = 0; i < n; ++i) x(k++) = p.mu_tilde(i);
    x(k++) = softplus_inverse(p.sigma);
    for (int i = 0; i < n; ++i) x(k++) = softplus_inverse(p.lambda(i));
    for (int i = 0; i < n; ++i) x(k++) = p.theta(i);
    for (int i = 0; i < n; ++i) x(k++) = softplus_inverse(p.sigma_jump(i));
    x(k++) = softplus_inverse(p.gamma);
    for (int i = 0; i < n; ++i) x(k++) = p.mu(i);
    pack_tri(p.A, x.data() + k);
    return x;
}

Model1Params Model1Reparam::unpack(const Vector& x) const {
    Model1Params p;
    p.n = n;
    int k = 0;
    p.mu_tilde = x.segment(k, n);
    k += n;
    p.sigma = softplus(x(k++));
    p.lambda.resize(n);
    for (int i = 0; i < n; ++i) p.lambda(i) = softplus(x(k++));
    p.theta = x.segment(k, n);
    k += n;
    p.sigma_jump.resize(n);
    for (int i = 0; i < n; ++i) p.sigma_jump(i) = softplus(x(k++));
    p.gamma = softplus(x(k++));
    p.mu = x.segment(k, n);
    k += n;
    p.A = unpack_tri(n, x.data() + k);
    return p;
}

Vector Model2Reparam::pack(const Model2Params& p) const {
    Vector x(dim());
    int k = 0;
    for (int i = 0; i < n; ++i) x(k++) = p.mu_tilde(i);
    pack_tri(p.Q, x.data() + k);
    k += tri_size(n);
    x(k++) = softplus_inverse(p.lambda);
    for (int i = 0; i < n; ++i) x(k++) = p.mu(i);
    pack_tri(p.A, x.data() + k);
    return x;
}

Model2Params Model2Reparam::unpack(const Vector& x) const {
    Model2Params p;
    p.n = n;
    int k = 0;
    p.mu_tilde = x.segment(k, n);
    k += n;
    p.Q = unpack_tri(n, x.data() + k);
    k += tri_size(n);
    p.lambda = softplus(x(k++));
    p.mu = x.segment(k, n);
    k += n;
    p.A = unpack_tri(n, x.data() + k);
    return p;
}

// ---------------------------------------------------------------------------
// Nelder-Mead
// ---------------------------------------------------------------------------

namespace {

struct NmOutcome {
    Vector x;
    double f = kInf;
    long evals = 0;
    bool converged = false;
};

NmOutcome nelder_mead(const std::function<double(const Vector&)>& fn, const Vector& x0,
                      long max_evals, double simplex_tol, double objective_tol) {
    const int n = static_cast<int>(x0.size());
    std::vector<Vector> xs(n + 1, x0);
    std::vector<double> fs(n + 1);
    long evals = 0;
    auto eval = [&](const Vector& x) {
        ++evals;
        return fn(x);
    };
    for (int i = 1; i <= n; ++i) {
        double& c = xs[i](i - 1);
        c = (c != 0.0) ? c * 1.05 : 0.00025; // fminsearch-style initial spread
    }
    for (int i = 0; i <= n; ++i) fs[i] = eval(xs[i]);

    std::vector<int> order(n + 1);
    NmOutcome out;
    while (evals < max_evals) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });
        int lo = order[0], hi = order[n], next_hi = order[n - 1];

        double f_spread = fs[hi] - fs[lo];
        double x_spread = 0.0;
        for (int i = 0; i <= n; ++i)
            x_spread = std::max(x_spread, (xs[i] - xs[lo]).cwiseAbs().maxCoeff());
        if (std::isfinite(fs[lo]) && f_spread <= objective_tol && x_spread <= simplex_tol) {
            out.converged = true;
            break;
        }

        Vector centroid = Vector::Zero(n);
        for (int i = 0; i <= n; ++i)
            if (i != hi) centroid += xs[i];
        centroid /= static_cast<double>(n);

        Vector reflected = centroid + (centroid - xs[hi]);
        double f_reflected = eval(reflected);
        if (f_reflected < fs[lo]) {
            Vector expanded = centroid + 2.0 * (centroid - xs[hi]);
            double f_expanded = eval(expanded);
            if (f_expanded < f_reflected) {
                xs[hi] = expanded;
                fs[hi] = f_expanded;
            } else {
                xs[hi] = reflected;
                fs[hi] = f_reflected;
            }
        } else if (f_reflected < fs[next_hi]) {
            xs[hi] = reflected;
            fs[hi] = f_reflected;
        } else {
            bool outside = f_reflected < fs[hi];
            Vector contracted =
                outside ? centroid + 0.5 * (reflected - centroid) : centroid + 0.5 * (xs[hi] - centroid);
            double f_contracted = eval(contracted);
            if (f_contracted < (outside ? f_reflected : fs[hi])) {
                xs[hi] = contracted;
                fs[hi] = f_contracted;
            } else {
                for (int i = 0; i <= n; ++i) {
                    if (i == lo) continue;
                    xs[i] = xs[lo] + 0.5 * (xs[i] - xs[lo]);
                    fs[i] = eval(xs[i]);
                }
            }
        }
    }
    int lo = 0;
    for (int i = 1; i <= n; ++i)
        if (fs[i] < fs[lo]) lo = i;
    out.x = xs[lo];
    out.f = fs[lo];
    out.evals = evals;
    return out;
}

// ---------------------------------------------------------------------------
// Start construction
// ---------------------------------------------------------------------------

Model1Params moment_matched_model1(const ElsProblem& prob, double intensity) {
    const int n = prob.n;
    Model1Params p;
    p.n = n;
    p.mu_tilde = prob.sample_mean;
    p.theta = Vector::Zero(n);
    p.mu = Vector::Zero(n);
    p.lambda = Vector::Constant(n, intensity);
    p.gamma = intensity;

    const Matrix& S = prob.sample_scatter;
    Matrix off = S;
    off.diagonal().setZero();
    // Route the off-diagonal structure through the systemic jump: A = (off + cI)/gamma.
    Eigen::SelfAdjointEigenSolver<Matrix> es(off, Eigen::EigenvaluesOnly);
    double c = std::max(0.0, -es.eigenvalues().minCoeff()) + 1e-10 * std::max(1.0, S.trace());
    p.A = (off + c * Matrix::Identity(n, n)) / p.gamma;

    double smallest_diag = kInf;
    for (int i = 0; i < n; ++i) smallest_diag = std::min(smallest_diag, S(i, i) - c);
    double sigma2 = std::max(1e-12, 0.5 * smallest_diag);
    p.sigma = std::sqrt(sigma2);
    p.sigma_jump.resize(n);
    for (int i = 0; i < n; ++i) {
        double residual = std::max(1e-12 * std::max(1.0, S(i, i)), S(i, i) - sigma2 - c);
        p.sigma_jump(i) = std::sqrt(residual / p.lambda(i));
    }
    return p;
}

Model2Params moment_matched_model2(const ElsProblem& prob, double intensity) {
    const int n = prob.n;
    Model2Params p;
    p.n = n;
    p.mu_tilde = prob.sample_mean;
    p.lambda = intensity;
    p.mu = Vector::Zero(n);
    double scale = std::max(prob.sample_scatter.trace() / n, 1e-12);
    p.A = 1e-8 * scale * Matrix::Identity(n, n);
    p.Q = prob.sample_scatter - p.lambda * p.A;
    p.Q.diagonal().array() += 1e-10 * scale; // keep the start strictly positive definite
    return p;
}

double total_intensity(const FittedParams& params) {
    if (std::holds_alternative<Model1Params>(params)) {
        const auto& p = std::get<Model1Params>(params);
        return p.gamma + p.lambda.sum();
    }
    return std::get<Model2Params>(params).lambda;
}

} // namespace

FitResult fit_els(const ElsProblem& problem, const FitOptions& opts) {
    const int n = problem.n;
    if (problem.n_obs < n + 2)
        throw Error(ErrorCode::InvalidArgument, "need at least n+2 observations to fit");

    const bool model1 = problem.kind == ModelKind::MODEL1;
    Model1Reparam rep1(n);
    Model2Reparam rep2(n);

    auto objective_raw = [&](const Vector& raw) -> double {
        try {
            if (model1) return els_objective(problem, rep1.unpack(raw));
            return els_objective(problem, rep2.unpack(raw));
        } catch (const Error&) {
            return kInf;
        }
    };

    std::vector<Vector> starts;
    if (model1) {
        starts.push_back(rep1.pack(moment_matched_model1(problem, 1e-3)));
        starts.push_back(rep1.pack(moment_matched_model1(problem, 0.1)));
    } else {
        starts.push_back(rep2.pack(moment_matched_model2(problem, 1e-3)));
        starts.push_back(rep2.pack(moment_matched_model2(problem, 0.1)));
    }
    const Vector base = starts.back();
    Rng rng(opts.seed, 0);
    while (static_cast<int>(starts.size()) < std::max(opts.starts, 2)) {
        Vector perturbed = base;
        for (Eigen::Index i = 0; i < perturbed.size(); ++i)
            perturbed(i) += 0.3 * std::max(1.0, std::abs(perturbed(i))) * rng.normal();
        starts.push_back(perturbed);
    }

    struct RunResult {
        NmOutcome nm;
        FittedParams params;
        double intensity = kInf;
    };
    std::vector<RunResult> runs;
    for (const auto& start : starts) {
        NmOutcome nm = nelder_mead(objective_raw, start, opts.max_evaluations, opts.simplex_tol,
                                   opts.objective_tol);
        if (!std::isfinite(nm.f)) continue;
        RunResult run;
        run.nm = nm;
        if (model1) run.params = rep1.unpack(nm.x);
        else run.params = rep2.unpack(nm.x);
        run.intensity = total_intensity(run.params);
        runs.push_back(std::move(run));
    }
    if (runs.empty())
        throw Error(ErrorCode::AllStartsFailed, "every start failed to produce a finite objective");

    double best_f = kInf;
    for (const auto& run : runs) best_f = std::min(best_f, run.nm.f);
    // The jump decomposition is not identified by two moments; among starts
    // tied on the objective, prefer the smallest total jump intensity.
    const double window = opts.tie_window * std::max(1.0, std::abs(best_f));
    const RunResult* winner = nullptr;
    for (const auto& run : runs) {
        if (run.nm.f > best_f + window) continue;
        if (!winner || run.intensity < winner->intensity) winner = &run;
    }

    FitResult result;
    result.params = winner->params;
    result.objective = winner->nm.f;
    result.iterations = winner->nm.evals;
    result.converged = winner->nm.converged;
    result.n_obs = problem.n_obs;
    if (model1) {
        const auto& p = std::get<Model1Params>(result.params);
        result.implied_mean = mean_model1(p);
        result.implied_cov = covariance_model1(p);
    } else {
        const auto& p = std::get<Model2Params>(result.params);
        result.implied_mean = mean_model2(p);
        result.implied_cov = covariance_model2(p);
    }
    result.sample_mean = problem.sample_mean;
    result.sample_cov = problem.sample_scatter;
    return result;
}

} // namespace evarport
