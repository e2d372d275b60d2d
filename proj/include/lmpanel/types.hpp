#pragma once

#include <Eigen/Dense>

namespace lmpanel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;
using Eigen::Index;

} // namespace lmpanel
