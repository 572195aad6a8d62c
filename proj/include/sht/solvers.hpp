#pragma once

// Serial cardinality-constrained solvers: full-gradient, stochastic-gradient,
// SVRG and SAGA hard thresholding, plus the proximal SVRG baseline for the
// l1-regularized problem.
//
// Every solver records an IterateTrace on the effective-pass axis: a full
// gradient costs one pass and one stochastic (or variance-reduced) gradient
// step costs 1/n. Runs are pure functions of (problem, config, theta0).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sht/parameter.hpp"
#include "sht/problem.hpp"

namespace sht {

enum class SnapshotRule { last_iterate, random_iterate };
enum class Sampling { with_replacement, without_replacement };

struct SolverConfig {
  double step_size = 0.0;
  std::size_t sparsity = 0;        // k; a rank bound for matrix problems
  std::size_t inner_length = 0;    // m; 0 selects m = n
  /// Outer rounds (SVRG-type), iterations (FG) or epochs of n steps
  /// (SG/SAGA). 0 leaves the run bounded by pass_budget alone.
  std::size_t outer_budget = 0;
  std::optional<double> pass_budget;
  SnapshotRule snapshot_rule = SnapshotRule::last_iterate;
  Sampling sampling = Sampling::with_replacement;
  std::uint64_t seed = 0;
  std::optional<double> l2_radius;  // overrides the problem's own radius
  double l1_weight = 0.0;           // prox_svrg only
  double trace_stride = 1.0;        // checkpoint spacing in passes (SG/SAGA/FG)
  /// Stop once the relative objective falls to this level.
  std::optional<double> tolerance;

  std::size_t inner_steps(const Problem& problem) const {
    return inner_length == 0 ? problem.num_components() : inner_length;
  }
  void validate(const Problem& problem) const;
};

struct Checkpoint {
  double passes = 0.0;
  double objective = 0.0;
  /// objective / F(0); the raw objective when F(0) == 0.
  double relative_objective = 0.0;
  std::optional<double> estimation_error;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct IterateTrace {
  std::vector<Checkpoint> checkpoints;
  Parameter final_parameter;
  double final_passes = 0.0;
  std::size_t full_gradient_evals = 0;
  std::size_t stochastic_steps = 0;
  std::size_t iterations = 0;  // outer rounds or single steps, per solver
  bool reached_tolerance = false;
};

/// Gradient table for SAGA: one stored component gradient per index and
/// their running mean. The mean is refreshed from scratch every n
/// replacements to bound drift.
class SagaTable {
 public:
  SagaTable(const Problem& problem, const Eigen::VectorXd& theta);

  std::size_t size() const noexcept { return static_cast<std::size_t>(table_.cols()); }
  auto stored(std::size_t i) const { return table_.col(static_cast<Eigen::Index>(i)); }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }

  void replace(std::size_t i, const Eigen::VectorXd& gradient);

 private:
  void recompute_mean();

  Eigen::MatrixXd table_;
  Eigen::VectorXd mean_;
  std::size_t since_refresh_ = 0;
};

IterateTrace fg_ht(const Problem& problem, const SolverConfig& config, const Parameter& theta0);
IterateTrace sg_ht(const Problem& problem, const SolverConfig& config, const Parameter& theta0);
IterateTrace svrg_ht(const Problem& problem, const SolverConfig& config, const Parameter& theta0);
IterateTrace saga_ht(const Problem& problem, const SolverConfig& config, const Parameter& theta0);
IterateTrace prox_svrg(const Problem& problem, const SolverConfig& config, const Parameter& theta0);

}  // namespace sht
