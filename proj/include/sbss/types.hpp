#pragma once

#include <Eigen/Dense>

namespace sbss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace sbss
