#pragma once

#include <Eigen/Dense>

namespace mbrl {

// 64-bit floats throughout: determinism and finite-difference testing come
// before speed at this scale.
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

}  // namespace mbrl
