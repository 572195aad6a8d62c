#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Dense>

namespace sht {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Shape of an optimization variable: a length-d vector or a d x p matrix.
/// Matrices are flattened column-major (vec(Theta) stacks columns), so every
/// solver sees a plain vector of length d*p.
class Shape {
 public:
  static Shape vector(std::size_t d);
  static Shape matrix(std::size_t rows, std::size_t cols);

  bool is_matrix() const noexcept { return matrix_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return rows_ * cols_; }

  std::string to_string() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  Shape(std::size_t rows, std::size_t cols, bool matrix) : rows_(rows), cols_(cols), matrix_(matrix) {}

  std::size_t rows_;
  std::size_t cols_;
  bool matrix_;
};

/// An iterate together with its shape. All entries are finite.
class Parameter {
 public:
  Parameter(Shape shape, Eigen::VectorXd values);

  static Parameter zeros(Shape shape);
  static Parameter from_matrix(const Eigen::MatrixXd& m);

  const Shape& shape() const noexcept { return shape_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }

  /// Column-major view; only meaningful for matrix shapes.
  Eigen::Map<const Eigen::MatrixXd> as_matrix() const {
    return {values_.data(), static_cast<Eigen::Index>(shape_.rows()),
            static_cast<Eigen::Index>(shape_.cols())};
  }

  std::size_t nonzeros() const;

 private:
  Shape shape_;
  Eigen::VectorXd values_;
};

std::size_t count_nonzeros(const Eigen::VectorXd& v);
bool all_finite(const Eigen::VectorXd& v);

}  // namespace sht
