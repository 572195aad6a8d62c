#pragma once

// Data-parallel building blocks behind the problem evaluators.
//
// Each kernel exists twice: `serial` is the plain reference loop kept for
// testing, `omp` is the OpenMP version the library actually calls. The omp
// kernels partition work so that every output coordinate is accumulated in
// the same order regardless of the thread count; results are reproducible
// across machines with different core counts.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "sht/parameter.hpp"

namespace sht {
class Problem;
}

namespace sht::kernels {

/// Components per partial sum in the chunked reductions.
inline constexpr std::size_t kComponentChunk = 16;

/// Columns per task in weighted_row_sum.
inline constexpr Eigen::Index kColumnBlock = 256;

/// Nonzero pattern of a parameter vector. Row dot products skip the zero
/// coordinates when at most a quarter of them are nonzero, which is the
/// common case for hard-thresholded iterates.
class SupportIndex {
 public:
  explicit SupportIndex(const Eigen::VectorXd& theta);

  /// <row, theta> for a contiguous row of theta.size() entries.
  double dot(const double* row, const Eigen::VectorXd& theta) const;

 private:
  std::vector<Eigen::Index> nonzero_;
  bool sparse_ = false;
};

namespace serial {

double mean_component_value(const Problem& problem, const Eigen::VectorXd& theta);
void mean_component_gradient(const Problem& problem, const Eigen::VectorXd& theta,
                             Eigen::VectorXd& out);

/// z = A theta, one dot product per row.
void margins(const RowMatrix& a, const Eigen::VectorXd& theta, Eigen::VectorXd& z);

/// out = A^T w accumulated row by row.
void weighted_row_sum(const RowMatrix& a, const Eigen::VectorXd& w, Eigen::VectorXd& out);

}  // namespace serial

namespace omp {

/// Sums chunks of kComponentChunk components in parallel, then adds the
/// chunk partials in index order. Throws NumericError naming the first
/// component whose value is not finite.
double mean_component_value(const Problem& problem, const Eigen::VectorXd& theta);
void mean_component_gradient(const Problem& problem, const Eigen::VectorXd& theta,
                             Eigen::VectorXd& out);

/// Bitwise identical to serial::margins.
void margins(const RowMatrix& a, const Eigen::VectorXd& theta, Eigen::VectorXd& z);

/// Bitwise identical to serial::weighted_row_sum: threads own column blocks
/// and each coordinate is still summed in row order.
void weighted_row_sum(const RowMatrix& a, const Eigen::VectorXd& w, Eigen::VectorXd& out);

}  // namespace omp

}  // namespace sht::kernels
