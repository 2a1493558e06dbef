#pragma once

#include <string>
#include <vector>

#include "evarport/estimate.hpp"
#include "evarport/model.hpp"
#include "evarport/optimize.hpp"

namespace evarport {

// Parameter documents use the field names of the parameter structs
// (mu_tilde, sigma, lambda, theta, sigma_jump, gamma, mu, A / Q) with
// matrices as row-major nested arrays, plus a "model" discriminator.

std::string model1_to_json(const Model1Params& p);
std::string model2_to_json(const Model2Params& p);

Model1Params model1_from_json(const std::string& text);
Model2Params model2_from_json(const std::string& text);

/// Reads either parameter document; the "model" field (or the field shape)
/// decides which variant is returned.
FittedParams params_from_json(const std::string& text);
std::string params_to_json(const FittedParams& params);

/// Parameter document plus a "fit" block (objective, iterations, converged,
/// n_obs) and moment diagnostics.
std::string fit_result_to_json(const FitResult& fit);

std::string kkt_report_to_json(const KktReport& report);

/// JSON records mirroring FrontierPoint.
std::string frontier_to_json(const std::vector<FrontierPoint>& points);

} // namespace evarport
