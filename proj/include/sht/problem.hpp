#pragma once

#include <cstddef>
#include <optional>

#include <Eigen/Dense>

#include "sht/parameter.hpp"

namespace sht {

/// A decomposable objective F(theta) = (1/n) sum_i f_i(theta).
///
/// Component indices are 0-based: i is valid iff i < num_components().
/// Evaluation is const and must not mutate shared state, so one instance can
/// be read from several threads at once.
///
/// The virtual hooks take raw vectors and do no validation; the free
/// functions below are the checked entry points.
class Problem {
 public:
  virtual ~Problem() = default;

  std::size_t num_components() const noexcept { return n_; }
  std::size_t batch_size() const noexcept { return b_; }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t dim() const noexcept { return shape_.size(); }

  virtual double component_value(std::size_t i, const Eigen::VectorXd& theta) const = 0;

  /// Overwrites out (resized to dim()) with the gradient of f_i at theta.
  virtual void component_gradient(std::size_t i, const Eigen::VectorXd& theta,
                                  Eigen::VectorXd& out) const = 0;

  /// grad f_i(theta) - grad f_i(snapshot) in one pass over the component's
  /// data. Returns false when the problem has no such shortcut; the caller
  /// then takes the difference of two component_gradient() calls.
  virtual bool component_gradient_difference(std::size_t i, const Eigen::VectorXd& theta,
                                             const Eigen::VectorXd& snapshot, Eigen::VectorXd& out) const;

  /// Mean of component values. The default sums components in fixed-size
  /// chunks (possibly in parallel) so the result does not depend on the
  /// thread count.
  virtual double value(const Eigen::VectorXd& theta) const;

  /// Mean of component gradients; same chunking contract as value().
  virtual void gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& out) const;

  /// Hessian of f_i for quadratic problems, empty otherwise.
  virtual std::optional<Eigen::MatrixXd> component_hessian(std::size_t i) const;

  /// Hessian of F for quadratic problems (mean of the component Hessians).
  virtual std::optional<Eigen::MatrixXd> hessian() const;

  /// Planted parameter for synthetic instances.
  const std::optional<Eigen::VectorXd>& ground_truth() const noexcept { return truth_; }
  void set_ground_truth(Eigen::VectorXd truth);

  /// Radius of an l2 constraint carried by the model (logistic), if any.
  std::optional<double> l2_radius() const noexcept { return radius_; }
  void set_l2_radius(double tau);

 protected:
  Problem(Shape shape, std::size_t n, std::size_t b);

 private:
  Shape shape_;
  std::size_t n_;
  std::size_t b_;
  std::optional<Eigen::VectorXd> truth_;
  std::optional<double> radius_;
};

/// Anchor of a variance-reduced inner loop: the snapshot and the full
/// gradient evaluated there.
struct SnapshotState {
  Eigen::VectorXd snapshot;
  Eigen::VectorXd full_gradient;

  static SnapshotState at(const Problem& problem, const Eigen::VectorXd& snapshot);
};

double objective_value(const Problem& problem, const Parameter& theta);
Eigen::VectorXd component_gradient(const Problem& problem, std::size_t i, const Parameter& theta);
Eigen::VectorXd full_gradient(const Problem& problem, const Parameter& theta);

/// grad f_i(theta) - grad f_i(snapshot) + mu.
Eigen::VectorXd vr_gradient(const Problem& problem, std::size_t i, const Parameter& theta,
                            const SnapshotState& state);

/// Scratch buffers for the allocation-free variance-reduced gradient used by
/// the solvers' inner loops.
struct VrWorkspace {
  Eigen::VectorXd at_theta;
  Eigen::VectorXd at_snapshot;
};

/// Unchecked in-place form of vr_gradient(). The two degenerate cases are
/// exact: theta == snapshot returns mu, and n == 1 returns grad f_1(theta).
void vr_gradient_into(const Problem& problem, std::size_t i, const Eigen::VectorXd& theta,
                      const SnapshotState& state, VrWorkspace& ws, Eigen::VectorXd& out);

}  // namespace sht
