#pragma once

// Pieces shared by the serial and asynchronous solvers. Not part of the
// stable interface.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sht/problem.hpp"
#include "sht/rng.hpp"
#include "sht/solvers.hpp"

namespace sht::detail {

/// The constraint step: H_k (or R_k for matrix shapes), then the optional
/// l2-ball projection.
class Projector {
 public:
  Projector(const Problem& problem, const SolverConfig& config);

  /// Throws NumericError when v holds non-finite entries.
  void operator()(Eigen::VectorXd& v);

 private:
  Shape shape_;
  std::size_t k_;
  std::optional<double> radius_;
  std::vector<double> scratch_;
};

/// Exact pass bookkeeping from integer evaluation counts.
struct PassCounter {
  std::size_t n = 1;
  std::size_t full = 0;
  std::size_t stochastic = 0;

  double passes() const { return static_cast<double>(full) + static_cast<double>(stochastic) / static_cast<double>(n); }
};

/// Decides whether another unit of work fits the configured budgets.
class Budget {
 public:
  explicit Budget(const SolverConfig& config) : pass_budget_(config.pass_budget), outer_(config.outer_budget) {}

  /// True if a unit costing `cost` passes may start after `done` units.
  bool allows(const PassCounter& counter, double cost, std::size_t done) const {
    if (outer_ != 0 && done >= outer_) return false;
    if (pass_budget_ && counter.passes() + cost > *pass_budget_ + 1e-9) return false;
    return true;
  }

 private:
  std::optional<double> pass_budget_;
  std::size_t outer_;
};

/// Draws component indices with or without replacement from one stream.
class ComponentSampler {
 public:
  ComponentSampler(std::size_t n, Sampling sampling, SplitMix64 rng);

  std::size_t next();

 private:
  std::size_t n_;
  Sampling sampling_;
  SplitMix64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

/// Accumulates checkpoints, normalizes by F(0), tracks estimation error and
/// enforces the divergence guard (objective above 1e12 times its starting
/// scale, or non-finite).
class TraceRecorder {
 public:
  TraceRecorder(const Problem& problem, const SolverConfig& config, const Eigen::VectorXd& theta0);

  /// Returns true once the tolerance is met.
  bool record(double passes, const Eigen::VectorXd& theta, std::size_t iteration);

  bool has_checkpoint_at(double passes) const {
    return !checkpoints_.empty() && checkpoints_.back().passes == passes;
  }

  IterateTrace finish(const Eigen::VectorXd& theta, const PassCounter& counter, std::size_t iterations);

  double objective(const Eigen::VectorXd& theta) const;

 private:
  const Problem& problem_;
  const SolverConfig& config_;
  double reference_ = 1.0;
  double guard_ = 0.0;
  bool reached_ = false;
  std::vector<Checkpoint> checkpoints_;
};

[[noreturn]] void rethrow_as_divergence(const std::exception& e, std::size_t iteration, double step_size);

}  // namespace sht::detail
