#include "sht/parameter.hpp"

#include <cmath>
#include <utility>

#include "sht/errors.hpp"

namespace sht {

Shape Shape::vector(std::size_t d) {
  if (d == 0) throw InvalidArgument("vector shape needs d >= 1");
  return Shape(d, 1, false);
}

Shape Shape::matrix(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw InvalidArgument("matrix shape needs positive dimensions");
  return Shape(rows, cols, true);
}

std::string Shape::to_string() const {
  if (matrix_) return "matrix(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
  return "vector(" + std::to_string(rows_) + ")";
}

Parameter::Parameter(Shape shape, Eigen::VectorXd values) : shape_(shape), values_(std::move(values)) {
  if (static_cast<std::size_t>(values_.size()) != shape_.size()) {
    throw InvalidArgument("parameter of shape " + shape_.to_string() + " cannot hold " +
                          std::to_string(values_.size()) + " entries");
  }
  if (!all_finite(values_)) throw InvalidArgument("parameter has non-finite entries");
}

Parameter Parameter::zeros(Shape shape) {
  return Parameter(shape, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.size())));
}

Parameter Parameter::from_matrix(const Eigen::MatrixXd& m) {
  Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
  return Parameter(Shape::matrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())),
                   std::move(flat));
}

std::size_t Parameter::nonzeros() const { return count_nonzeros(values_); }

std::size_t count_nonzeros(const Eigen::VectorXd& v) {
  std::size_t c = 0;
  for (Eigen::Index j = 0; j < v.size(); ++j) c += v[j] != 0.0;
  return c;
}

bool all_finite(const Eigen::VectorXd& v) {
  for (Eigen::Index j = 0; j < v.size(); ++j)
    if (!std::isfinite(v[j])) return false;
  return true;
}

}  // namespace sht
