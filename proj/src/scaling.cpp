#include "pcha/scaling.hpp"

#include <stdexcept>

namespace pcha {

ScalingMap fit_scaling(const Eigen::MatrixXd& X) {
  if (X.rows() == 0 || X.cols() == 0)
    throw std::invalid_argument("fit_scaling: empty design");
  ScalingMap map;
  map.lo = X.colwise().minCoeff();
  map.hi = X.colwise().maxCoeff();
  return map;
}

Eigen::MatrixXd ScalingMap::apply(const Eigen::MatrixXd& X) const {
  if (X.cols() != lo.size())
    throw std::invalid_argument("ScalingMap::apply: column count mismatch");
  Eigen::MatrixXd out(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double range = hi[j] - lo[j];
    if (range <= 0.0) {
      out.col(j).setConstant(0.5);
    } else {
      out.col(j) = ((X.col(j).array() - lo[j]) / range).cwiseMax(0.0).cwiseMin(1.0);
    }
  }
  return out;
}

}  // namespace pcha
