#include "sht/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "sht/errors.hpp"
#include "sht/metrics.hpp"
#include "sht/solver_support.hpp"
#include "sht/thresholding.hpp"

namespace sht {

void SolverConfig::validate(const Problem& problem) const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw InvalidArgument("step size must be positive and finite");
  if (sparsity == 0) throw InvalidArgument("sparsity k must be at least 1");
  if (outer_budget == 0 && !pass_budget) throw InvalidArgument("set an outer budget or a pass budget");
  if (pass_budget && !(*pass_budget > 0.0)) throw InvalidArgument("pass budget must be positive");
  if (!(trace_stride > 0.0)) throw InvalidArgument("trace stride must be positive");
  if (l2_radius && !(*l2_radius > 0.0)) throw InvalidArgument("l2 radius must be positive");
  if (!(l1_weight >= 0.0)) throw InvalidArgument("l1 weight must be nonnegative");
  if (tolerance && !(*tolerance >= 0.0)) throw InvalidArgument("tolerance must be nonnegative");
  (void)problem;
}

namespace detail {

Projector::Projector(const Problem& problem, const SolverConfig& config)
    : shape_(problem.shape()),
      k_(config.sparsity),
      radius_(config.l2_radius ? config.l2_radius : problem.l2_radius()) {}

void Projector::operator()(Eigen::VectorXd& v) {
  if (shape_.is_matrix())
    svt_inplace(v, shape_, k_);
  else
    hard_threshold_inplace(v, k_, scratch_);
  if (radius_) l2_ball_project_inplace(v, *radius_);
}

ComponentSampler::ComponentSampler(std::size_t n, Sampling sampling, SplitMix64 rng)
    : n_(n), sampling_(sampling), rng_(rng) {}

std::size_t ComponentSampler::next() {
  if (sampling_ == Sampling::with_replacement) return static_cast<std::size_t>(rng_.below(n_));
  if (cursor_ == order_.size()) {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (std::size_t j = n_; j > 1; --j) std::swap(order_[j - 1], order_[rng_.below(j)]);
    cursor_ = 0;
  }
  return order_[cursor_++];
}

TraceRecorder::TraceRecorder(const Problem& problem, const SolverConfig& config, const Eigen::VectorXd& theta0)
    : problem_(problem), config_(config) {
  const double at_zero = objective(Eigen::VectorXd::Zero(theta0.size()));
  reference_ = at_zero != 0.0 ? std::abs(at_zero) : 1.0;
  const double start = objective(theta0);
  guard_ = 1e12 * std::max(std::abs(start), std::abs(at_zero));
  record(0.0, theta0, 0);
}

double TraceRecorder::objective(const Eigen::VectorXd& theta) const {
  double f = problem_.value(theta);
  if (config_.l1_weight > 0.0) f += config_.l1_weight * theta.lpNorm<1>();
  return f;
}

bool TraceRecorder::record(double passes, const Eigen::VectorXd& theta, std::size_t iteration) {
  double f = 0.0;
  try {
    f = objective(theta);
  } catch (const NumericError& e) {
    rethrow_as_divergence(e, iteration, config_.step_size);
  }
  if (!std::isfinite(f) || (guard_ > 0.0 && f > guard_)) {
    std::ostringstream msg;
    msg << "diverged at iteration " << iteration << " with step size " << config_.step_size << " (objective " << f
        << ")";
    throw DivergenceError(msg.str(), iteration, config_.step_size);
  }
  Checkpoint c;
  c.passes = passes;
  c.objective = f;
  c.relative_objective = f / reference_;
  if (const auto& truth = problem_.ground_truth(); truth && truth->norm() > 0.0)
    c.estimation_error = relative_estimation_error(theta, *truth);
  checkpoints_.push_back(c);
  if (config_.tolerance && c.relative_objective <= *config_.tolerance) reached_ = true;
  return reached_;
}

IterateTrace TraceRecorder::finish(const Eigen::VectorXd& theta, const PassCounter& counter,
                                   std::size_t iterations) {
  if (!has_checkpoint_at(counter.passes())) record(counter.passes(), theta, iterations);
  return IterateTrace{std::move(checkpoints_), Parameter(problem_.shape(), theta), counter.passes(),
                      counter.full, counter.stochastic, iterations, reached_};
}

void rethrow_as_divergence(const std::exception& e, std::size_t iteration, double step_size) {
  std::ostringstream msg;
  msg << "diverged at iteration " << iteration << " with step size " << step_size << ": " << e.what();
  throw DivergenceError(msg.str(), iteration, step_size);
}

}  // namespace detail

SagaTable::SagaTable(const Problem& problem, const Eigen::VectorXd& theta)
    : table_(static_cast<Eigen::Index>(problem.dim()), static_cast<Eigen::Index>(problem.num_components())) {
  Eigen::VectorXd g;
  for (std::size_t i = 0; i < problem.num_components(); ++i) {
    problem.component_gradient(i, theta, g);
    table_.col(static_cast<Eigen::Index>(i)) = g;
  }
  recompute_mean();
}

void SagaTable::recompute_mean() {
  mean_ = table_.col(0);
  for (Eigen::Index i = 1; i < table_.cols(); ++i) mean_ += table_.col(i);
  mean_ /= static_cast<double>(table_.cols());
  since_refresh_ = 0;
}

void SagaTable::replace(std::size_t i, const Eigen::VectorXd& gradient) {
  auto col = table_.col(static_cast<Eigen::Index>(i));
  if (++since_refresh_ >= size()) {
    col = gradient;
    recompute_mean();
    return;
  }
  mean_ += (gradient - col) / static_cast<double>(size());
  col = gradient;
}

namespace {

using detail::Budget;
using detail::ComponentSampler;
using detail::PassCounter;
using detail::Projector;
using detail::TraceRecorder;

std::size_t stride_steps(const Problem& problem, const SolverConfig& config) {
  const double steps = std::ceil(static_cast<double>(problem.num_components()) * config.trace_stride);
  return std::max<std::size_t>(1, static_cast<std::size_t>(steps));
}

void check_start(const Problem& problem, const SolverConfig& config, const Parameter& theta0) {
  if (!(theta0.shape() == problem.shape()))
    throw InvalidArgument("initial parameter shape " + theta0.shape().to_string() + " does not match problem shape " +
                          problem.shape().to_string());
  config.validate(problem);
}

void gradient_step(Eigen::VectorXd& theta, double eta, const Eigen::VectorXd& g) { theta -= eta * g; }

enum class InnerStep { hard_threshold, proximal_l1 };

IterateTrace svrg_loop(const Problem& problem, const SolverConfig& config, const Parameter& theta0, InnerStep kind) {
  check_start(problem, config, theta0);
  const std::size_t n = problem.num_components();
  const std::size_t m = config.inner_steps(problem);
  const double eta = config.step_size;
  const double round_cost = 1.0 + static_cast<double>(m) / static_cast<double>(n);

  Projector project(problem, config);
  TraceRecorder recorder(problem, config, theta0.values());
  Budget budget(config);
  PassCounter counter{n};

  Eigen::VectorXd snapshot = theta0.values();
  Eigen::VectorXd theta, next_snapshot, g;
  VrWorkspace ws;
  std::size_t rounds = 0;
  bool done = false;
  while (!done && budget.allows(counter, round_cost, rounds)) {
    const SnapshotState state = SnapshotState::at(problem, snapshot);
    ++counter.full;
    ComponentSampler sampler(n, config.sampling, make_stream(config.seed, StreamTag::component, rounds));
    std::size_t keep_at = m;
    if (config.snapshot_rule == SnapshotRule::random_iterate) {
      SplitMix64 pick = make_stream(config.seed, StreamTag::snapshot, rounds);
      keep_at = 1 + static_cast<std::size_t>(pick.below(m));
    }

    theta = snapshot;
    try {
      for (std::size_t t = 0; t < m; ++t) {
        vr_gradient_into(problem, sampler.next(), theta, state, ws, g);
        gradient_step(theta, eta, g);
        if (kind == InnerStep::hard_threshold)
          project(theta);
        else
          soft_threshold_inplace(theta, eta * config.l1_weight);
        if (t + 1 == keep_at) next_snapshot = theta;
      }
    } catch (const NumericError& e) {
      detail::rethrow_as_divergence(e, rounds, eta);
    }
    counter.stochastic += m;
    snapshot.swap(next_snapshot);
    ++rounds;
    done = recorder.record(counter.passes(), snapshot, rounds);
  }
  return recorder.finish(snapshot, counter, rounds);
}

}  // namespace

IterateTrace fg_ht(const Problem& problem, const SolverConfig& config, const Parameter& theta0) {
  check_start(problem, config, theta0);
  const double eta = config.step_size;
  const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(config.trace_stride)));

  Projector project(problem, config);
  TraceRecorder recorder(problem, config, theta0.values());
  Budget budget(config);
  PassCounter counter{problem.num_components()};

  Eigen::VectorXd theta = theta0.values();
  Eigen::VectorXd g;
  std::size_t iterations = 0;
  while (budget.allows(counter, 1.0, iterations)) {
    try {
      problem.gradient(theta, g);
      gradient_step(theta, eta, g);
      project(theta);
    } catch (const NumericError& e) {
      detail::rethrow_as_divergence(e, iterations, eta);
    }
    ++counter.full;
    ++iterations;
    if (iterations % stride == 0 && recorder.record(counter.passes(), theta, iterations)) break;
  }
  return recorder.finish(theta, counter, iterations);
}

IterateTrace sg_ht(const Problem& problem, const SolverConfig& config, const Parameter& theta0) {
  check_start(problem, config, theta0);
  const std::size_t n = problem.num_components();
  const double eta = config.step_size;
  const double step_cost = 1.0 / static_cast<double>(n);
  const std::size_t stride = stride_steps(problem, config);
  const std::size_t step_limit = config.outer_budget * n;

  Projector project(problem, config);
  TraceRecorder recorder(problem, config, theta0.values());
  PassCounter counter{n};
  ComponentSampler sampler(n, config.sampling, make_stream(config.seed, StreamTag::component, 0));

  Eigen::VectorXd theta = theta0.values();
  Eigen::VectorXd g;
  std::size_t steps = 0;
  while ((step_limit == 0 || steps < step_limit) &&
         (!config.pass_budget || counter.passes() + step_cost <= *config.pass_budget + 1e-9)) {
    try {
      problem.component_gradient(sampler.next(), theta, g);
      gradient_step(theta, eta, g);
      project(theta);
    } catch (const NumericError& e) {
      detail::rethrow_as_divergence(e, steps, eta);
    }
    ++counter.stochastic;
    ++steps;
    if (steps % stride == 0 && recorder.record(counter.passes(), theta, steps)) break;
  }
  return recorder.finish(theta, counter, steps);
}

IterateTrace svrg_ht(const Problem& problem, const SolverConfig& config, const Parameter& theta0) {
  return svrg_loop(problem, config, theta0, InnerStep::hard_threshold);
}

IterateTrace prox_svrg(const Problem& problem, const SolverConfig& config, const Parameter& theta0) {
  return svrg_loop(problem, config, theta0, InnerStep::proximal_l1);
}

IterateTrace saga_ht(const Problem& problem, const SolverConfig& config, const Parameter& theta0) {
  check_start(problem, config, theta0);
  const std::size_t n = problem.num_components();
  const double eta = config.step_size;
  const double step_cost = 1.0 / static_cast<double>(n);
  const std::size_t stride = stride_steps(problem, config);
  const std::size_t step_limit = config.outer_budget * n;

  Projector project(problem, config);
  TraceRecorder recorder(problem, config, theta0.values());
  PassCounter counter{n};
  if (config.pass_budget && *config.pass_budget < 1.0 - 1e-9)
    throw InvalidArgument("SAGA needs a pass budget of at least one pass to fill its table");
  SagaTable table(problem, theta0.values());
  ++counter.full;
  ComponentSampler sampler(n, config.sampling, make_stream(config.seed, StreamTag::component, 0));

  Eigen::VectorXd theta = theta0.values();
  Eigen::VectorXd current, g(theta.size());
  std::size_t steps = 0;
  while ((step_limit == 0 || steps < step_limit) &&
         (!config.pass_budget || counter.passes() + step_cost <= *config.pass_budget + 1e-9)) {
    const std::size_t i = sampler.next();
    try {
      problem.component_gradient(i, theta, current);
      const auto stored = table.stored(i);
      const Eigen::VectorXd& mean = table.mean();
      for (Eigen::Index j = 0; j < g.size(); ++j)
        g[j] = (mean[j] == stored[j]) ? current[j] : (current[j] - stored[j]) + mean[j];
      table.replace(i, current);
      gradient_step(theta, eta, g);
      project(theta);
    } catch (const NumericError& e) {
      detail::rethrow_as_divergence(e, steps, eta);
    }
    ++counter.stochastic;
    ++steps;
    if (steps % stride == 0 && recorder.record(counter.passes(), theta, steps)) break;
  }
  return recorder.finish(theta, counter, steps);
}

}  // namespace sht
