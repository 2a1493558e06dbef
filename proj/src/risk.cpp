#include "evarport/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace evarport {

RiskLevel::RiskLevel(double a) : alpha(a) {
    if (!(a > 0.0 && a < 1.0))
        throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0,1)");
}

double evar_objective(const std::function<double(const Vector&)>& kappa, const Vector& weights,
                      double alpha, double s) {
    return (kappa(s * weights) - std::log(alpha)) / s;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Minimizes a quasiconvex f over s > 0: geometric bracket expansion from
/// s_init (factors x4 and /4), golden-section refinement, one
/// finite-difference Newton polish. f may return +inf; overflow regions are
/// treated as infinitely bad during bracketing.
EvarResult minimize_over_s(const std::function<double(double)>& f, const EvarOptions& opts) {
    EvarResult result;
    int evals = 0;
    auto eval = [&](double s) {
        ++evals;
        return f(s);
    };
    auto finish = [&](double value, double s, bool converged) {
        result.value = value;
        result.s_star = s;
        result.iterations = evals;
        result.converged = converged;
        result.status = converged ? EvarStatus::Converged : EvarStatus::NoInteriorMinimum;
        return result;
    };

    double b = std::clamp(opts.s_init, opts.s_min, opts.s_max);
    double fb = eval(b);
    while (!std::isfinite(fb) && b > opts.s_min) {
        b = std::max(b / opts.bracket_factor, opts.s_min);
        fb = eval(b);
    }
    if (!std::isfinite(fb))
        throw Error(ErrorCode::ExponentOverflow, "objective overflows at every bracket point");

    double a = b, fa = fb, c = b, fc = fb;
    bool at_cap = false, at_floor = false;
    double up = std::min(b * opts.bracket_factor, opts.s_max);
    double f_up = b < opts.s_max ? eval(up) : fb;
    if (b < opts.s_max && f_up < fb) {
        // Walk upward while the objective decreases. Reaching the cap on a
        // downhill step does not preclude an interior minimum between the
        // last two ladder points; that is settled after refinement.
        a = b;
        fa = fb;
        b = up;
        fb = f_up;
        while (true) {
            if (b >= opts.s_max) {
                at_cap = true;
                c = b;
                fc = fb;
                break;
            }
            c = std::min(b * opts.bracket_factor, opts.s_max);
            fc = eval(c);
            if (!(fc < fb)) break;
            a = b;
            fa = fb;
            b = c;
            fb = fc;
        }
    } else {
        // Walk downward while the objective decreases.
        c = up;
        fc = f_up;
        a = std::max(b / opts.bracket_factor, opts.s_min);
        fa = b > opts.s_min ? eval(a) : fb;
        while (fa < fb) {
            if (a <= opts.s_min) {
                at_floor = true;
                b = a;
                fb = fa;
                break;
            }
            c = b;
            fc = fb;
            b = a;
            fb = fa;
            a = std::max(a / opts.bracket_factor, opts.s_min);
            fa = eval(a);
        }
    }

    // Golden-section refinement on [a, c]; b tracks the best point seen.
    double best_s = b, best_f = fb;
    auto consider = [&](double s, double v) {
        if (v < best_f) {
            best_f = v;
            best_s = s;
        }
    };
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = c - inv_phi * (c - a);
    double x2 = a + inv_phi * (c - a);
    double f1 = eval(x1);
    double f2 = eval(x2);
    consider(x1, f1);
    consider(x2, f2);
    for (int iter = 0; iter < 400; ++iter) {
        if ((c - a) <= opts.bracket_width * std::max(1.0, std::abs(best_s))) break;
        bool keep_left = std::isfinite(f1) && (!std::isfinite(f2) || f1 <= f2);
        if (keep_left) {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - inv_phi * (c - a);
            f1 = eval(x1);
            consider(x1, f1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (c - a);
            f2 = eval(x2);
            consider(x2, f2);
        }
    }

    // The refined minimum landing on a cap with a downhill slope means the
    // infimum is the limit beyond the cap, not an interior minimum.
    if (at_cap && best_s >= opts.s_max * (1.0 - 1e-6)) {
        double probe = eval(opts.s_max * (1.0 - 1e-7));
        double f_cap = eval(opts.s_max);
        if (f_cap <= probe) return finish(f_cap, opts.s_max, false);
    }
    if (at_floor && best_s <= opts.s_min * (1.0 + 1e-6)) {
        double probe = eval(opts.s_min * (1.0 + 1e-7));
        double f_floor = eval(opts.s_min);
        if (f_floor <= probe) return finish(f_floor, opts.s_min, false);
    }

    // One Newton polish on finite-difference derivatives.
    double h = 1e-7 * std::max(1.0, std::abs(best_s));
    double f_plus = eval(best_s + h);
    double f_minus = eval(std::max(best_s - h, opts.s_min));
    double d1 = (f_plus - f_minus) / (2.0 * h);
    double d2 = (f_plus - 2.0 * best_f + f_minus) / (h * h);
    if (std::isfinite(d1) && std::isfinite(d2) && d2 > 0.0) {
        double cand = best_s - d1 / d2;
        if (cand > opts.s_min && cand < opts.s_max) consider(cand, eval(cand));
    }
    return finish(best_f, best_s, true);
}

std::function<double(double)> guard_overflow(std::function<double(double)> raw) {
    return [raw = std::move(raw)](double s) -> double {
        try {
            double v = raw(s);
            return std::isfinite(v) ? v : kInf;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ExponentOverflow) return kInf;
            throw;
        }
    };
}

} // namespace

EvarResult evar_analytic(const std::function<double(const Vector&)>& kappa, const Vector& weights,
                         RiskLevel level, const EvarOptions& opts) {
    const double ln_alpha = std::log(level.alpha);
    auto f = guard_overflow([&kappa, &weights, ln_alpha](double s) {
        return (kappa(s * weights) - ln_alpha) / s;
    });
    return minimize_over_s(f, opts);
}

EvarResult evar_empirical(const ReturnSample& sample, const Vector& weights, RiskLevel level,
                          const EvarOptions& opts) {
    if (sample.returns.rows() == 0) throw Error(ErrorCode::EmptySample, "empty return sample");
    if (sample.returns.cols() != weights.size())
        throw Error(ErrorCode::InvalidArgument, "weights length does not match sample width");
    const Vector x = sample.returns * weights;
    const double n = static_cast<double>(x.size());
    const double ln_alpha = std::log(level.alpha);
    auto f = guard_overflow([&x, n, ln_alpha](double s) {
        // log-sum-exp evaluation of the empirical log-MGF of exp(-s x)
        double m = (-s * x.array()).maxCoeff();
        double acc = ((-s * x.array() - m).exp()).sum();
        double log_mgf = m + std::log(acc / n);
        return (log_mgf - ln_alpha) / s;
    });
    return minimize_over_s(f, opts);
}

double var_empirical(const ReturnSample& sample, const Vector& weights, RiskLevel level) {
    if (sample.returns.rows() == 0) throw Error(ErrorCode::EmptySample, "empty return sample");
    if (sample.returns.cols() != weights.size())
        throw Error(ErrorCode::InvalidArgument, "weights length does not match sample width");
    Vector losses = -(sample.returns * weights);
    std::vector<double> sorted(losses.data(), losses.data() + losses.size());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<long>(std::ceil((1.0 - level.alpha) * n));
    rank = std::clamp<long>(rank, 1, static_cast<long>(sorted.size()));
    return sorted[static_cast<std::size_t>(rank - 1)];
}

double stdev_portfolio(const Matrix& cov, const Vector& weights) {
    if (cov.rows() != weights.size() || cov.cols() != weights.size())
        throw Error(ErrorCode::InvalidArgument, "covariance/weights size mismatch");
    double q = weights.dot(cov * weights);
    if (q < -1e-12)
        throw Error(ErrorCode::NegativeQuadraticForm, "quadratic form is " + std::to_string(q));
    return std::sqrt(std::max(q, 0.0));
}

} // namespace evarport
