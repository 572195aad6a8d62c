#pragma once

#include <Eigen/Dense>

namespace sht {

/// ||theta - truth||_2 / ||truth||_2 (Frobenius norm on flattened matrices).
/// Throws InvalidArgument when truth is zero or the sizes differ.
double relative_estimation_error(const Eigen::VectorXd& theta, const Eigen::VectorXd& truth);

}  // namespace sht
