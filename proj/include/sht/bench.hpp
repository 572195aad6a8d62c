#pragma once

// Experiment plumbing shared by the command-line tool and the acceptance
// suite: solver dispatch, trace CSV output, and the sweep driver.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sht/async.hpp"
#include "sht/datagen.hpp"
#include "sht/solvers.hpp"

namespace sht {

enum class SolverKind { fg_ht, sg_ht, svrg_ht, saga_ht, prox_svrg, asvrg_sim, asvrg };

std::string to_string(SolverKind kind);
/// Accepts the names printed by to_string; throws InvalidArgument otherwise.
SolverKind solver_from_string(const std::string& name);

struct RunOutcome {
  enum class Status { ok, diverged };

  Status status = Status::ok;
  std::optional<IterateTrace> trace;  // absent when the run diverged
  std::optional<AsyncDiagnostics> diagnostics;
  std::string message;
  double wall_seconds = 0.0;

  /// Last checkpoint's estimation error, +inf when diverged or absent.
  double final_error() const;
  /// First checkpoint whose relative objective is at most tol.
  std::optional<double> passes_to(double tol) const;
};

/// Runs one solver from theta0 = 0. Divergence is captured, not thrown.
/// For the simulated asynchronous solver the schedule is a fixed delay of
/// async.max_staleness.
RunOutcome run_solver(const Problem& problem, SolverKind kind, const SolverConfig& config,
                      const AsyncConfig& async = {});

/// Trace CSV: header `passes,objective,rel_objective,rel_est_error`, numbers
/// in shortest round-trip form, the error field empty when absent.
std::string trace_csv(const IterateTrace& trace);
std::string format_number(double v);

struct SolverEntry {
  SolverKind kind = SolverKind::svrg_ht;
  std::vector<double> etas;
  std::vector<double> lambdas;  // prox_svrg only; each run uses every eta too
  std::size_t k = 0;            // 0 inherits the experiment's k
  std::size_t m = 0;
  std::size_t workers = 1;
  std::size_t block_size = 0;
  std::size_t max_staleness = 0;
};

struct ExperimentConfig {
  GenerationSpec instance;  // base spec; seed is replaced per run seed
  std::optional<std::filesystem::path> instance_file;
  std::vector<double> correlations;  // empty keeps instance.correlation
  std::vector<double> sigmas;        // empty keeps instance.sigma
  std::vector<std::size_t> batch_counts;  // empty keeps instance.batches
  std::vector<SolverEntry> solvers;
  std::vector<std::uint64_t> seeds;
  std::size_t k = 100;
  double pass_budget = 500.0;
  /// Relative-objective level for passes_to_tol; also stops runs early
  /// when stop_at_tolerance is set.
  std::optional<double> tolerance;
  bool stop_at_tolerance = false;
  double trace_stride = 1.0;
  std::size_t threads = 1;
  std::optional<std::filesystem::path> out_dir;

  void validate() const;
};

/// Parses the JSON schema documented in the README. Throws ParseError.
ExperimentConfig experiment_from_json(const std::string& text);

struct SummaryRow {
  std::string solver;
  std::size_t n = 0;
  std::size_t b = 0;
  double c = 0.0;
  double sigma = 0.0;
  std::string param;  // "eta=..;lambda=.."
  double eta = 0.0;
  std::optional<double> lambda;
  double median_err = 0.0;
  double mean_err = 0.0;
  std::optional<double> passes_to_tol;  // median over seeds that reached it
  double wall_s = 0.0;
  std::size_t diverged = 0;
  std::string status;  // "ok" or "diverged:<count>"
  /// Per-seed final errors in seed order (+inf for diverged runs).
  std::vector<double> errors;
  /// Per-seed final relative objectives in seed order.
  std::vector<double> final_objectives;
};

struct SweepResult {
  std::vector<SummaryRow> grid;  // every (solver, setting, parameter)
  std::vector<SummaryRow> best;  // per (solver, setting), lowest median error
  bool any_diverged = false;
};

/// Runs the cross product solver x setting x parameter x seed, `threads`
/// cells at a time. Results do not depend on the thread count. When out_dir
/// is set, writes summary.csv, grid.csv and traces/<run>.csv.
SweepResult run_sweep(const ExperimentConfig& config);

/// `solver,n,b,c,sigma,param,median_err,mean_err,passes_to_tol,wall_s,status`
std::string summary_csv(const std::vector<SummaryRow>& rows);

double median(std::vector<double> values);

}  // namespace sht
