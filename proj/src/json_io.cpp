#include "evarport/json_io.hpp"

#include <json.hpp>

namespace evarport {

namespace {

using nlohmann::json;

json vector_to_json(const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

Vector vector_from_json(const json& arr, const char* name) {
    if (!arr.is_array())
        throw Error(ErrorCode::ParseError, std::string(name) + " must be an array");
    Vector v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number())
            throw Error(ErrorCode::ParseError, std::string(name) + " must hold numbers");
        v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    }
    return v;
}

Matrix matrix_from_json(const json& rows, const char* name) {
    if (!rows.is_array() || rows.empty())
        throw Error(ErrorCode::ParseError, std::string(name) + " must be a nested array");
    Matrix m(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        Vector row = vector_from_json(rows[r], name);
        if (row.size() != m.cols())
            throw Error(ErrorCode::ParseError, std::string(name) + " rows have uneven lengths");
        m.row(static_cast<Eigen::Index>(r)) = row;
    }
    return m;
}

const json& require(const json& doc, const char* key) {
    auto it = doc.find(key);
    if (it == doc.end())
        throw Error(ErrorCode::ParseError, std::string("missing field '") + key + "'");
    return *it;
}

double require_number(const json& doc, const char* key) {
    const json& v = require(doc, key);
    if (!v.is_number())
        throw Error(ErrorCode::ParseError, std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

json parse(const std::string& text) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::ParseError, "invalid JSON document");
    return doc;
}

Model1Params model1_from_doc(const json& doc) {
    Model1Params p;
    p.mu_tilde = vector_from_json(require(doc, "mu_tilde"), "mu_tilde");
    p.n = static_cast<int>(p.mu_tilde.size());
    p.sigma = require_number(doc, "sigma");
    p.lambda = vector_from_json(require(doc, "lambda"), "lambda");
    p.theta = vector_from_json(require(doc, "theta"), "theta");
    p.sigma_jump = vector_from_json(require(doc, "sigma_jump"), "sigma_jump");
    p.gamma = require_number(doc, "gamma");
    p.mu = vector_from_json(require(doc, "mu"), "mu");
    p.A = matrix_from_json(require(doc, "A"), "A");
    validate(p);
    return p;
}

Model2Params model2_from_doc(const json& doc) {
    Model2Params p;
    p.mu_tilde = vector_from_json(require(doc, "mu_tilde"), "mu_tilde");
    p.n = static_cast<int>(p.mu_tilde.size());
    p.Q = matrix_from_json(require(doc, "Q"), "Q");
    p.lambda = require_number(doc, "lambda");
    p.mu = vector_from_json(require(doc, "mu"), "mu");
    p.A = matrix_from_json(require(doc, "A"), "A");
    validate(p);
    return p;
}

json model1_to_doc(const Model1Params& p) {
    json doc;
    doc["model"] = 1;
    doc["n"] = p.n;
    doc["mu_tilde"] = vector_to_json(p.mu_tilde);
    doc["sigma"] = p.sigma;
    doc["lambda"] = vector_to_json(p.lambda);
    doc["theta"] = vector_to_json(p.theta);
    doc["sigma_jump"] = vector_to_json(p.sigma_jump);
    doc["gamma"] = p.gamma;
    doc["mu"] = vector_to_json(p.mu);
    doc["A"] = matrix_to_json(p.A);
    return doc;
}

json model2_to_doc(const Model2Params& p) {
    json doc;
    doc["model"] = 2;
    doc["n"] = p.n;
    doc["mu_tilde"] = vector_to_json(p.mu_tilde);
    doc["Q"] = matrix_to_json(p.Q);
    doc["lambda"] = p.lambda;
    doc["mu"] = vector_to_json(p.mu);
    doc["A"] = matrix_to_json(p.A);
    return doc;
}

} // namespace

std::string model1_to_json(const Model1Params& p) { return model1_to_doc(p).dump(2); }

std::string model2_to_json(const Model2Params& p) { return model2_to_doc(p).dump(2); }

Model1Params model1_from_json(const std::string& text) { return model1_from_doc(parse(text)); }

Model2Params model2_from_json(const std::string& text) { return model2_from_doc(parse(text)); }

FittedParams params_from_json(const std::string& text) {
    json doc = parse(text);
    int model = 0;
    if (doc.contains("model") && doc["model"].is_number_integer())
        model = doc["model"].get<int>();
    else
        model = doc.contains("Q") ? 2 : 1; // fall back to the field shape
    if (model == 1) return model1_from_doc(doc);
    if (model == 2) return model2_from_doc(doc);
    throw Error(ErrorCode::ParseError, "field 'model' must be 1 or 2");
}

std::string params_to_json(const FittedParams& params) {
    if (std::holds_alternative<Model1Params>(params))
        return model1_to_json(std::get<Model1Params>(params));
    return model2_to_json(std::get<Model2Params>(params));
}

std::string fit_result_to_json(const FitResult& fit) {
    json doc = std::holds_alternative<Model1Params>(fit.params)
                   ? model1_to_doc(std::get<Model1Params>(fit.params))
                   : model2_to_doc(std::get<Model2Params>(fit.params));
    json meta;
    meta["objective"] = fit.objective;
    meta["iterations"] = fit.iterations;
    meta["converged"] = fit.converged;
    meta["n_obs"] = fit.n_obs;
    meta["implied_mean"] = vector_to_json(fit.implied_mean);
    meta["implied_cov"] = matrix_to_json(fit.implied_cov);
    meta["sample_mean"] = vector_to_json(fit.sample_mean);
    meta["sample_cov"] = matrix_to_json(fit.sample_cov);
    doc["fit"] = meta;
    return doc.dump(2);
}

std::string kkt_report_to_json(const KktReport& report) {
    json doc;
    doc["stationarity_inf_norm"] = report.stationarity_inf_norm;
    doc["primal_feasibility"] = report.primal_feasibility;
    doc["complementarity"] = report.complementarity;
    doc["dual_feasibility"] = report.dual_feasibility;
    doc["multipliers"]["nu"] = vector_to_json(report.multipliers.nu);
    doc["multipliers"]["eta"] =
        json::array({report.multipliers.eta(0), report.multipliers.eta(1)});
    return doc.dump(2);
}

std::string frontier_to_json(const std::vector<FrontierPoint>& points) {
    json arr = json::array();
    for (const auto& pt : points) {
        json rec;
        rec["target_return"] = pt.target_return;
        rec["evar"] = pt.evar_value;
        rec["stdev"] = pt.stdev_value;
        rec["s_star"] = pt.s_star;
        rec["weights"] = vector_to_json(pt.weights);
        rec["converged"] = pt.converged;
        if (!pt.error.empty()) rec["error"] = pt.error;
        arr.push_back(rec);
    }
    return arr.dump(2);
}

} // namespace evarport
