#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "sht/parameter.hpp"

namespace sht {

/// Keeps the k largest-magnitude entries of v and zeroes the rest. Among
/// entries of equal magnitude the lower index wins. Kept values are copied
/// bit-for-bit; k >= v.size() returns v.
///
/// Selection is O(d) on average (nth_element on the magnitudes).
/// Throws InvalidArgument for k == 0 and NumericError for non-finite input.
Eigen::VectorXd hard_threshold(const Eigen::VectorXd& v, std::size_t k);

/// In-place form for hot loops; `scratch` is reused across calls.
void hard_threshold_inplace(Eigen::VectorXd& v, std::size_t k, std::vector<double>& scratch);

/// Euclidean projection onto {x : ||x||_2 <= tau}.
Eigen::VectorXd l2_ball_project(const Eigen::VectorXd& v, double tau);
void l2_ball_project_inplace(Eigen::VectorXd& v, double tau);

/// Best rank-k approximation: keeps the k largest singular values of m.
/// Singular-value ties at the cut keep the decomposition's first k.
Eigen::MatrixXd svt(const Eigen::MatrixXd& m, std::size_t k);

/// svt() applied to a column-major flattened matrix of the given shape.
void svt_inplace(Eigen::VectorXd& flat, const Shape& shape, std::size_t k);

/// Proximal map of level * ||.||_1: sign(v_j) max(|v_j| - level, 0).
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double level);
void soft_threshold_inplace(Eigen::VectorXd& v, double level);

/// One of the four projection/thresholding operators with its parameter.
struct ThresholdSpec {
  enum class Kind { hard, l2ball, svt, soft };

  Kind kind;
  std::size_t k = 0;
  double tau = 0.0;
  double level = 0.0;

  static ThresholdSpec hard(std::size_t k);
  static ThresholdSpec l2ball(double tau);
  static ThresholdSpec rank(std::size_t k);
  static ThresholdSpec soft(double level);
};

/// Applies spec to values (interpreted with shape for svt).
Eigen::VectorXd apply_threshold(const ThresholdSpec& spec, const Eigen::VectorXd& values,
                                const Shape& shape);

}  // namespace sht
