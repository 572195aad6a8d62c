#pragma once

// Problem builders for the estimation models: sparse linear regression,
// corrupted-design quadratics, sparse logistic regression and low-rank
// matrix sensing.
//
// Batching: component i owns the contiguous rows [i*b, (i+1)*b) of the
// design, with n*b equal to the number of rows exactly.

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sht/parameter.hpp"
#include "sht/problem.hpp"

namespace sht {

struct SquaredLoss {
  static constexpr bool quadratic = true;
  static double value(double margin, double y) {
    const double r = y - margin;
    return 0.5 * r * r;
  }
  static double derivative(double margin, double y) { return margin - y; }
};

/// log(1 + exp(z)) - y z for y in {0, 1}, evaluated without overflow.
struct LogisticLoss {
  static constexpr bool quadratic = false;
  static double value(double margin, double y);
  static double derivative(double margin, double y);
};

double softplus(double z);
double sigmoid(double z);

/// Objective (1/b) sum_{l in S_i} loss(A_l theta, y_l) per component, over a
/// dense row-major design. Full value and gradient go through the parallel
/// row kernels and agree with the component mean up to rounding.
template <class Loss>
class DesignProblem : public Problem {
 public:
  DesignProblem(RowMatrix design, Eigen::VectorXd responses, std::size_t batches, Shape shape);

  double component_value(std::size_t i, const Eigen::VectorXd& theta) const override;
  void component_gradient(std::size_t i, const Eigen::VectorXd& theta, Eigen::VectorXd& out) const override;
  bool component_gradient_difference(std::size_t i, const Eigen::VectorXd& theta, const Eigen::VectorXd& snapshot,
                                     Eigen::VectorXd& out) const override;
  double value(const Eigen::VectorXd& theta) const override;
  void gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& out) const override;
  std::optional<Eigen::MatrixXd> component_hessian(std::size_t i) const override;

  const RowMatrix& design() const noexcept { return design_; }
  const Eigen::VectorXd& responses() const noexcept { return responses_; }

 private:
  RowMatrix design_;
  Eigen::VectorXd responses_;
};

using LeastSquaresProblem = DesignProblem<SquaredLoss>;
using LogisticProblem = DesignProblem<LogisticLoss>;

extern template class DesignProblem<SquaredLoss>;
extern template class DesignProblem<LogisticLoss>;

/// f_i(theta) = 1/2 theta^T G_i theta - c_i^T theta with explicit G_i, c_i.
class QuadraticProblem : public Problem {
 public:
  QuadraticProblem(std::vector<Eigen::MatrixXd> hessians, std::vector<Eigen::VectorXd> linear);

  double component_value(std::size_t i, const Eigen::VectorXd& theta) const override;
  void component_gradient(std::size_t i, const Eigen::VectorXd& theta, Eigen::VectorXd& out) const override;
  std::optional<Eigen::MatrixXd> component_hessian(std::size_t i) const override;

 private:
  std::vector<Eigen::MatrixXd> hessians_;
  std::vector<Eigen::VectorXd> linear_;
};

struct LinearRegressionData {
  RowMatrix design;
  Eigen::VectorXd responses;
  std::size_t batches = 1;
};

struct GlmData {
  RowMatrix design;
  Eigen::VectorXd labels;  // entries in {0, 1}
  std::size_t batches = 1;
  double radius = 0.0;     // tau of the l2 constraint
};

/// Measurements A_1..A_nb, each rows x cols, stored one per row of
/// `measurements` as vec(A_l) (column-major).
struct LowRankData {
  std::size_t rows = 0;
  std::size_t cols = 0;
  RowMatrix measurements;
  Eigen::VectorXd responses;
  std::size_t batches = 1;

  static LowRankData from_matrices(const std::vector<Eigen::MatrixXd>& a, Eigen::VectorXd y,
                                   std::size_t batches);
  Eigen::MatrixXd measurement(std::size_t l) const;
};

/// Missing entries observed with probability 1 - rho.
struct MissingData {
  double rho = 0.0;
};
/// Z = A + W with known row covariance Sigma_W.
struct AdditiveNoise {
  Eigen::MatrixXd sigma_w;
};
/// Z = A (.) U with known E(u) and E(u^T u).
struct MultiplicativeNoise {
  Eigen::VectorXd first_moment;
  Eigen::MatrixXd second_moment;
};
using CorrectionSpec = std::variant<MissingData, AdditiveNoise, MultiplicativeNoise>;

/// F(theta) = 1/2 theta^T G theta - c^T theta with the bias-corrected
/// covariance G. Each batch applies the same correction to its own rows, so
/// the component means recover G and c exactly. G may be indefinite.
class CorruptedQuadratic : public Problem {
 public:
  CorruptedQuadratic(const RowMatrix& z, const Eigen::VectorXd& y, const CorrectionSpec& spec,
                     std::size_t batches);

  double component_value(std::size_t i, const Eigen::VectorXd& theta) const override;
  void component_gradient(std::size_t i, const Eigen::VectorXd& theta, Eigen::VectorXd& out) const override;
  std::optional<Eigen::MatrixXd> component_hessian(std::size_t i) const override;

  /// Dense corrected covariance (d x d).
  Eigen::MatrixXd gamma_hat() const;
  Eigen::VectorXd b_hat() const;

 private:
  void apply_component(std::size_t i, const Eigen::VectorXd& theta, Eigen::VectorXd& out) const;

  RowMatrix z_;                      // rescaled design (missing-data case) or Z
  Eigen::MatrixXd linear_;           // column i is c_i
  Eigen::MatrixXd diagonal_;         // column i is the per-batch diagonal correction (missing)
  Eigen::MatrixXd shared_;           // Sigma_W (additive)
  std::vector<Eigen::MatrixXd> dense_;  // explicit G_i (multiplicative)
};

LeastSquaresProblem make_linear_regression(LinearRegressionData data);
CorruptedQuadratic make_corrupted_quadratic(const RowMatrix& z, const Eigen::VectorXd& y,
                                            const CorrectionSpec& spec, std::size_t batches);
LogisticProblem make_logistic(GlmData data);
LeastSquaresProblem make_lowrank(LowRankData data);

/// Fraction of rows whose predicted probability sigmoid(A_l theta) lands on
/// the wrong side of 1/2; a prediction of exactly 1/2 counts as an error.
double misclassification_rate(const RowMatrix& design, const Eigen::VectorXd& labels,
                              const Eigen::VectorXd& theta);

}  // namespace sht
