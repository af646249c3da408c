#pragma once

#include <Eigen/Core>

namespace pcha {

// Columnwise affine map onto [0,1]^d learned from training data. New points
// are clamped into the cube; a constant training column maps everything to 0.5.
struct ScalingMap {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
};

ScalingMap fit_scaling(const Eigen::MatrixXd& X);

}  // namespace pcha
