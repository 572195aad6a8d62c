#include "sht/problem.hpp"

#include <utility>

#include "sht/errors.hpp"
#include "sht/kernels.hpp"

namespace sht {

Problem::Problem(Shape shape, std::size_t n, std::size_t b) : shape_(shape), n_(n), b_(b) {
  if (n == 0) throw InvalidArgument("a problem needs at least one component");
  if (b == 0) throw InvalidArgument("batch size must be positive");
}

double Problem::value(const Eigen::VectorXd& theta) const {
  return kernels::omp::mean_component_value(*this, theta);
}

void Problem::gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& out) const {
  kernels::omp::mean_component_gradient(*this, theta, out);
}

std::optional<Eigen::MatrixXd> Problem::component_hessian(std::size_t) const { return std::nullopt; }

bool Problem::component_gradient_difference(std::size_t, const Eigen::VectorXd&, const Eigen::VectorXd&,
                                            Eigen::VectorXd&) const {
  return false;
}

std::optional<Eigen::MatrixXd> Problem::hessian() const {
  auto first = component_hessian(0);
  if (!first) return std::nullopt;
  Eigen::MatrixXd sum = std::move(*first);
  for (std::size_t i = 1; i < n_; ++i) sum += *component_hessian(i);
  sum /= static_cast<double>(n_);
  return sum;
}

void Problem::set_ground_truth(Eigen::VectorXd truth) {
  if (static_cast<std::size_t>(truth.size()) != shape_.size())
    throw InvalidArgument("ground truth does not match the parameter shape");
  truth_ = std::move(truth);
}

void Problem::set_l2_radius(double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("l2 radius must be positive");
  radius_ = tau;
}

SnapshotState SnapshotState::at(const Problem& problem, const Eigen::VectorXd& snapshot) {
  SnapshotState s{snapshot, {}};
  problem.gradient(snapshot, s.full_gradient);
  return s;
}

namespace {

void check_shape(const Problem& problem, const Parameter& theta) {
  if (!(theta.shape() == problem.shape()))
    throw InvalidArgument("parameter shape " + theta.shape().to_string() +
                          " does not match problem shape " + problem.shape().to_string());
}

void check_index(const Problem& problem, std::size_t i) {
  if (i >= problem.num_components())
    throw InvalidArgument("component index " + std::to_string(i) + " out of range [0, " +
                          std::to_string(problem.num_components()) + ")");
}

}  // namespace

double objective_value(const Problem& problem, const Parameter& theta) {
  check_shape(problem, theta);
  return problem.value(theta.values());
}

Eigen::VectorXd component_gradient(const Problem& problem, std::size_t i, const Parameter& theta) {
  check_shape(problem, theta);
  check_index(problem, i);
  Eigen::VectorXd g;
  problem.component_gradient(i, theta.values(), g);
  if (!all_finite(g))
    throw NumericError("component " + std::to_string(i) + " produced a non-finite gradient");
  return g;
}

Eigen::VectorXd full_gradient(const Problem& problem, const Parameter& theta) {
  check_shape(problem, theta);
  Eigen::VectorXd g;
  problem.gradient(theta.values(), g);
  return g;
}

Eigen::VectorXd vr_gradient(const Problem& problem, std::size_t i, const Parameter& theta,
                            const SnapshotState& state) {
  check_shape(problem, theta);
  check_index(problem, i);
  if (state.snapshot.size() != theta.values().size() ||
      state.full_gradient.size() != theta.values().size())
    throw InvalidArgument("snapshot state does not match the parameter shape");
  VrWorkspace ws;
  Eigen::VectorXd out;
  vr_gradient_into(problem, i, theta.values(), state, ws, out);
  return out;
}

void vr_gradient_into(const Problem& problem, std::size_t i, const Eigen::VectorXd& theta,
                      const SnapshotState& state, VrWorkspace& ws, Eigen::VectorXd& out) {
  const Eigen::Index d = theta.size();
  // With n == 1, mu is grad f_1(snapshot) itself; the per-coordinate form
  // below then cancels it exactly.
  if (problem.num_components() > 1 &&
      problem.component_gradient_difference(i, theta, state.snapshot, ws.at_theta)) {
    out.resize(d);
    const double* diff = ws.at_theta.data();
    const double* mu = state.full_gradient.data();
    double* o = out.data();
    for (Eigen::Index j = 0; j < d; ++j) o[j] = diff[j] == 0.0 ? mu[j] : diff[j] + mu[j];
    return;
  }
  problem.component_gradient(i, theta, ws.at_theta);
  problem.component_gradient(i, state.snapshot, ws.at_snapshot);
  out.resize(d);
  const double* a = ws.at_theta.data();
  const double* b = ws.at_snapshot.data();
  const double* mu = state.full_gradient.data();
  double* o = out.data();
  for (Eigen::Index j = 0; j < d; ++j) o[j] = (mu[j] == b[j]) ? a[j] : (a[j] - b[j]) + mu[j];
}

}  // namespace sht
