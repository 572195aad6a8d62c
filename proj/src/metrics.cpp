#include "sht/metrics.hpp"

#include "sht/errors.hpp"

namespace sht {

double relative_estimation_error(const Eigen::VectorXd& theta, const Eigen::VectorXd& truth) {
  if (theta.size() != truth.size()) throw InvalidArgument("estimate and truth differ in size");
  const double scale = truth.norm();
  if (scale == 0.0) throw InvalidArgument("relative error is undefined for a zero ground truth");
  return (theta - truth).norm() / scale;
}

}  // namespace sht
