#pragma once

#include <Eigen/Dense>

namespace stpot {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

}  // namespace stpot
