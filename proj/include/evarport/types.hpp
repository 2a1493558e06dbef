#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace evarport {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Matrix of observed or simulated per-period log returns, one row per period.
struct ReturnSample {
    std::vector<std::string> asset_names;
    Matrix returns; // rows = periods, cols = assets

    Eigen::Index rows() const { return returns.rows(); }
    Eigen::Index cols() const { return returns.cols(); }
};

} // namespace evarport
