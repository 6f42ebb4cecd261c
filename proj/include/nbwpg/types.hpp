#pragma once

#include <Eigen/Dense>

namespace nbwpg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

// Tolerance used when collapsing nearly equal gains or biases to one value.
inline constexpr double kValueDedupTol = 1e-6;

}  // namespace nbwpg
