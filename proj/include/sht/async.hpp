#pragma once

// ASVRG-HT: SVRG-HT where each inner step reads a possibly stale iterate and
// updates only a random block of q coordinates before thresholding.
//
// Two modes:
//   simulated  single-threaded, with an explicit delay schedule; fully
//              deterministic. Zero delay with q = d reproduces svrg_ht
//              bit-for-bit.
//   threaded   OpenMP workers share one parameter array of atomics (relaxed
//              per-coordinate loads and stores, no locks). Each worker reads
//              the shared vector, takes a block-restricted variance-reduced
//              step, applies H_k to its local copy and writes back only the
//              coordinates that changed. Between updates the shared vector may
//              hold more than k nonzeros; snapshots are thresholded at the
//              round barrier.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sht/parameter.hpp"
#include "sht/problem.hpp"
#include "sht/solvers.hpp"

namespace sht {

enum class AsyncMode { simulated, threaded };

struct AsyncConfig {
  std::size_t workers = 1;
  std::size_t block_size = 0;  // q; 0 selects q = k (capped at d)
  std::size_t max_staleness = 0;
  AsyncMode mode = AsyncMode::simulated;
  std::uint64_t seed = 0;
  /// Scale the block-restricted gradient by d/q so it stays unbiased. Off by
  /// default: the printed algorithm does not rescale.
  bool rescale_block = false;
  /// Monte-Carlo trials for the Delta estimate in the diagnostics; 0 skips it.
  std::size_t delta_trials = 200;
  /// Empirical smoothness constant used for Gamma; absent leaves Gamma unset.
  std::optional<double> rho_plus;

  std::size_t block(std::size_t d, std::size_t k) const;
};

struct AsyncDiagnostics {
  std::size_t realized_max_staleness = 0;
  double delta_estimate = 0.0;
  std::optional<double> gamma;
  bool regime_violation = false;
  double wall_seconds = 0.0;
};

/// Maps inner step t of outer round r to the index t' of the iterate it reads
/// (iterates are numbered from 0 = the round's starting point).
using DelaySchedule = std::function<std::size_t(std::size_t round, std::size_t t)>;

/// Every step reads the iterate `delay` steps back (clamped at the round start).
DelaySchedule fixed_delay(std::size_t delay);

/// Delays drawn uniformly from {0, ..., max_delay}, seeded.
DelaySchedule random_delay(std::size_t max_delay, std::uint64_t seed);

/// Simulated mode. Throws InvalidArgument if the schedule returns t' > t or
/// t' < t - max_staleness.
std::pair<IterateTrace, AsyncDiagnostics> asvrg_ht_sim(const Problem& problem, const SolverConfig& config,
                                                       const AsyncConfig& async, const DelaySchedule& schedule,
                                                       const Parameter& theta0);

/// Threaded mode.
std::pair<IterateTrace, AsyncDiagnostics> asvrg_ht(const Problem& problem, const SolverConfig& config,
                                                   const AsyncConfig& async, const Parameter& theta0);

/// Monte-Carlo estimate of the smallest Delta with E||v_e||^2 <= Delta ||v||^2
/// over uniform size-q coordinate subsets e, maximized over random dense,
/// sparse and gradient-direction test vectors. Clamped to [0, 1].
double measure_delta(const Problem& problem, std::size_t q, std::size_t trials, std::uint64_t seed);

/// The same estimate over caller-supplied test vectors.
double delta_for_vectors(const std::vector<Eigen::VectorXd>& probes, std::size_t q, std::size_t trials,
                         std::uint64_t seed);

/// (1 + rho Delta s^2 eta) / (1 - 2 rho^2 Delta s^2 eta^2) with s the
/// staleness; empty when the denominator is not positive.
std::optional<double> async_gamma(double rho_plus, double delta, std::size_t staleness, double eta);

}  // namespace sht
