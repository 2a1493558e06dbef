#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "evarport/data_io.hpp"
#include "evarport/estimate.hpp"
#include "evarport/json_io.hpp"
#include "evarport/model.hpp"
#include "evarport/optimize.hpp"
#include "evarport/risk.hpp"

namespace py = pybind11;
using namespace evarport;

namespace {

RiskLevel level_of(double alpha) { return RiskLevel(alpha); }

template <class Params>
EvarResult evar_for(const Params& p, const Vector& weights, double alpha) {
    if constexpr (std::is_same_v<Params, Model1Params>)
        return evar_analytic(kappa_model1(p), weights, level_of(alpha));
    else
        return evar_analytic(kappa_model2(p), weights, level_of(alpha));
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "EVaR portfolio toolkit for jump-diffusion return models";

    py::register_exception<Error>(m, "EvarportError");

    py::class_<Model1Params>(m, "Model1Params")
        .def(py::init([](Vector mu_tilde, double sigma, Vector lambda, Vector theta,
                         Vector sigma_jump, double gamma, Vector mu, Matrix A) {
                 Model1Params p;
                 p.n = static_cast<int>(mu_tilde.size());
                 p.mu_tilde = std::move(mu_tilde);
                 p.sigma = sigma;
                 p.lambda = std::move(lambda);
                 p.theta = std::move(theta);
                 p.sigma_jump = std::move(sigma_jump);
                 p.gamma = gamma;
                 p.mu = std::move(mu);
                 p.A = std::move(A);
                 validate(p);
                 return p;
             }),
             py::arg("mu_tilde"), py::arg("sigma"), py::arg("lambda_"), py::arg("theta"),
             py::arg("sigma_jump"), py::arg("gamma"), py::arg("mu"), py::arg("A"))
        .def_readonly("n", &Model1Params::n)
        .def_readonly("mu_tilde", &Model1Params::mu_tilde)
        .def_readonly("sigma", &Model1Params::sigma)
        .def_readonly("lambda_", &Model1Params::lambda)
        .def_readonly("theta", &Model1Params::theta)
        .def_readonly("sigma_jump", &Model1Params::sigma_jump)
        .def_readonly("gamma", &Model1Params::gamma)
        .def_readonly("mu", &Model1Params::mu)
        .def_readonly("A", &Model1Params::A)
        .def("to_json", &model1_to_json)
        .def_static("from_json", &model1_from_json)
        .def("mean", &mean_model1)
        .def("covariance", &covariance_model1)
        .def("__repr__", [](const Model1Params& p) {
            return "<Model1Params n=" + std::to_string(p.n) + ">";
        });

    py::class_<Model2Params>(m, "Model2Params")
        .def(py::init([](Vector mu_tilde, Matrix Q, double lambda, Vector mu, Matrix A) {
                 Model2Params p;
                 p.n = static_cast<int>(mu_tilde.size());
                 p.mu_tilde = std::move(mu_tilde);
                 p.Q = std::move(Q);
                 p.lambda = lambda;
                 p.mu = std::move(mu);
                 p.A = std::move(A);
                 validate(p);
                 return p;
             }),
             py::arg("mu_tilde"), py::arg("Q"), py::arg("lambda_"), py::arg("mu"), py::arg("A"))
        .def_readonly("n", &Model2Params::n)
        .def_readonly("mu_tilde", &Model2Params::mu_tilde)
        .def_readonly("Q", &Model2Params::Q)
        .def_readonly("lambda_", &Model2Params::lambda)
        .def_readonly("mu", &Model2Params::mu)
        .def_readonly("A", &Model2Params::A)
        .def("to_json", &model2_to_json)
        .def_static("from_json", &model2_from_json)
        .def("mean", &mean_model2)
        .def("covariance", &covariance_model2)
        .def("__repr__", [](const Model2Params& p) {
            return "<Model2Params n=" + std::to_string(p.n) + ">";
        });

    py::class_<TruncationPolicy>(m, "TruncationPolicy")
        .def(py::init([](double tail_mass, int max_terms) {
                 TruncationPolicy t{tail_mass, max_terms};
                 validate(t);
                 return t;
             }),
             py::arg("tail_mass") = 1e-10, py::arg("max_terms") = 64)
        .def_readonly("tail_mass", &TruncationPolicy::tail_mass)
        .def_readonly("max_terms", &TruncationPolicy::max_terms);

    py::class_<ReturnSample>(m, "ReturnSample")
        .def(py::init([](Matrix returns, std::vector<std::string> names) {
                 ReturnSample s;
                 if (names.empty())
                     for (Eigen::Index i = 0; i < returns.cols(); ++i)
                         names.push_back("asset_" + std::to_string(i + 1));
                 s.asset_names = std::move(names);
                 s.returns = std::move(returns);
                 return s;
             }),
             py::arg("returns"), py::arg("asset_names") = std::vector<std::string>{})
        .def_readonly("asset_names", &ReturnSample::asset_names)
        .def_readonly("returns", &ReturnSample::returns)
        .def("to_csv", &returns_to_csv, py::arg("dates") = std::vector<std::string>{});

    py::class_<EvarResult>(m, "EvarResult")
        .def_readonly("value", &EvarResult::value)
        .def_readonly("s_star", &EvarResult::s_star)
        .def_readonly("iterations", &EvarResult::iterations)
        .def_readonly("converged", &EvarResult::converged)
        .def("__repr__", [](const EvarResult& r) {
            return "<EvarResult value=" + std::to_string(r.value) + ">";
        });

    py::class_<Portfolio>(m, "Portfolio")
        .def_readonly("weights", &Portfolio::weights)
        .def_readonly("target_return", &Portfolio::target_return);

    py::class_<Multipliers>(m, "Multipliers")
        .def_readonly("nu", &Multipliers::nu)
        .def_property_readonly("eta", [](const Multipliers& mlt) {
            return std::vector<double>{mlt.eta(0), mlt.eta(1)};
        });

    py::class_<KktReport>(m, "KktReport")
        .def_readonly("stationarity_inf_norm", &KktReport::stationarity_inf_norm)
        .def_readonly("primal_feasibility", &KktReport::primal_feasibility)
        .def_readonly("complementarity", &KktReport::complementarity)
        .def_readonly("dual_feasibility", &KktReport::dual_feasibility)
        .def_readonly("multipliers", &KktReport::multipliers)
        .def("to_json", &kkt_report_to_json);

    py::class_<EvarSolution>(m, "EvarSolution")
        .def_readonly("portfolio", &EvarSolution::portfolio)
        .def_readonly("evar", &EvarSolution::evar)
        .def_readonly("kkt", &EvarSolution::kkt)
        .def_readonly("objective", &EvarSolution::objective)
        .def_readonly("degenerate_optimum", &EvarSolution::degenerate_optimum);

    py::class_<FrontierPoint>(m, "FrontierPoint")
        .def_readonly("target_return", &FrontierPoint::target_return)
        .def_readonly("weights", &FrontierPoint::weights)
        .def_readonly("s_star", &FrontierPoint::s_star)
        .def_readonly("evar", &FrontierPoint::evar_value)
        .def_readonly("stdev", &FrontierPoint::stdev_value)
        .def_readonly("converged", &FrontierPoint::converged)
        .def_readonly("error", &FrontierPoint::error);

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("params", &FitResult::params)
        .def_readonly("objective", &FitResult::objective)
        .def_readonly("iterations", &FitResult::iterations)
        .def_readonly("converged", &FitResult::converged)
        .def_readonly("n_obs", &FitResult::n_obs)
        .def_readonly("implied_mean", &FitResult::implied_mean)
        .def_readonly("implied_cov", &FitResult::implied_cov)
        .def_readonly("sample_mean", &FitResult::sample_mean)
        .def_readonly("sample_cov", &FitResult::sample_cov)
        .def("to_json", &fit_result_to_json);

    py::class_<PriceSeries>(m, "PriceSeries")
        .def_readonly("asset_names", &PriceSeries::asset_names)
        .def_readonly("dates", &PriceSeries::dates)
        .def_readonly("closes", &PriceSeries::closes)
        .def_readonly("dropped_rows", &PriceSeries::dropped_rows);

    // moments and transforms
    m.def("mean_model1", &mean_model1);
    m.def("covariance_model1", &covariance_model1);
    m.def("mean_model2", &mean_model2);
    m.def("covariance_model2", &covariance_model2);
    m.def("laplace_exponent_model1", &laplace_exponent_model1, py::arg("params"), py::arg("u"),
          py::arg("exp_cap") = 700.0);
    m.def("laplace_exponent_model2", &laplace_exponent_model2, py::arg("params"), py::arg("u"),
          py::arg("exp_cap") = 700.0);
    m.def("density_model1", &density_model1, py::arg("params"), py::arg("r"),
          py::arg("truncation") = TruncationPolicy{});
    m.def("density_model2", &density_model2, py::arg("params"), py::arg("r"),
          py::arg("truncation") = TruncationPolicy{});
    m.def("sample_model1", &sample_model1, py::arg("params"), py::arg("count"), py::arg("seed"));
    m.def("sample_model2", &sample_model2, py::arg("params"), py::arg("count"), py::arg("seed"));

    // risk
    m.def(
        "evar_analytic",
        [](const Model1Params& p, const Vector& w, double alpha) { return evar_for(p, w, alpha); },
        py::arg("params"), py::arg("weights"), py::arg("alpha"));
    m.def(
        "evar_analytic",
        [](const Model2Params& p, const Vector& w, double alpha) { return evar_for(p, w, alpha); },
        py::arg("params"), py::arg("weights"), py::arg("alpha"));
    m.def(
        "evar_empirical",
        [](const ReturnSample& s, const Vector& w, double alpha) {
            return evar_empirical(s, w, level_of(alpha));
        },
        py::arg("sample"), py::arg("weights"), py::arg("alpha"));
    m.def(
        "var_empirical",
        [](const ReturnSample& s, const Vector& w, double alpha) {
            return var_empirical(s, w, level_of(alpha));
        },
        py::arg("sample"), py::arg("weights"), py::arg("alpha"));
    m.def("stdev_portfolio", &stdev_portfolio, py::arg("cov"), py::arg("weights"));

    // optimization
    m.def(
        "solve_evar",
        [](const Model1Params& p, double alpha, double mu_star) {
            return solve_evar_model1(p, level_of(alpha), mu_star);
        },
        py::arg("params"), py::arg("alpha"), py::arg("target_return"));
    m.def(
        "solve_evar",
        [](const Model2Params& p, double alpha, double mu_star) {
            return solve_evar_model2(p, level_of(alpha), mu_star);
        },
        py::arg("params"), py::arg("alpha"), py::arg("target_return"));
    m.def("solve_min_variance", &solve_min_variance, py::arg("cov"), py::arg("means"),
          py::arg("target_return"));
    m.def(
        "efficient_frontier",
        [](const Model1Params& p, double alpha, const std::vector<double>& targets,
           const std::string& kind, int jobs) {
            return efficient_frontier(p, level_of(alpha), targets,
                                      kind == "stdev" ? RiskKind::STDEV : RiskKind::EVAR, jobs);
        },
        py::arg("params"), py::arg("alpha"), py::arg("targets"), py::arg("risk") = "evar",
        py::arg("jobs") = 1);
    m.def(
        "efficient_frontier",
        [](const Model2Params& p, double alpha, const std::vector<double>& targets,
           const std::string& kind, int jobs) {
            return efficient_frontier(p, level_of(alpha), targets,
                                      kind == "stdev" ? RiskKind::STDEV : RiskKind::EVAR, jobs);
        },
        py::arg("params"), py::arg("alpha"), py::arg("targets"), py::arg("risk") = "evar",
        py::arg("jobs") = 1);
    m.def("frontier_to_csv", &frontier_to_csv);

    // estimation
    m.def(
        "fit_els",
        [](const ReturnSample& data, const std::string& model, int starts, std::uint64_t seed) {
            ModelKind kind = model == "1" || model == "model1" ? ModelKind::MODEL1
                                                               : ModelKind::MODEL2;
            FitOptions opts;
            opts.starts = starts;
            opts.seed = seed;
            return fit_els(ElsProblem::from_sample(data, kind), opts);
        },
        py::arg("sample"), py::arg("model") = "model2", py::arg("starts") = 16,
        py::arg("seed") = 7);

    // data ingestion
    m.def("load_prices", py::overload_cast<const std::vector<std::string>&>(&load_prices),
          py::arg("paths"));
    m.def("load_prices", py::overload_cast<const std::string&>(&load_prices), py::arg("path"));
    m.def("to_log_returns", &to_log_returns, py::arg("prices"));

    m.attr("__version__") = "0.1.0";
}
