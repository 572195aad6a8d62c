#include "sht/async.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <vector>

#include "sht/errors.hpp"
#include "sht/rng.hpp"
#include "sht/solver_support.hpp"

namespace sht {

std::size_t AsyncConfig::block(std::size_t d, std::size_t k) const {
  const std::size_t q = block_size == 0 ? k : block_size;
  return std::min(q, d);
}

DelaySchedule fixed_delay(std::size_t delay) {
  return [delay](std::size_t, std::size_t t) { return t >= delay ? t - delay : std::size_t{0}; };
}

DelaySchedule random_delay(std::size_t max_delay, std::uint64_t seed) {
  return [max_delay, seed](std::size_t round, std::size_t t) {
    SplitMix64 rng = make_stream(seed, StreamTag::delay, (static_cast<std::uint64_t>(round) << 32) ^ t);
    const std::size_t lag = static_cast<std::size_t>(rng.below(std::min(max_delay, t) + 1));
    return t - lag;
  };
}

std::optional<double> async_gamma(double rho_plus, double delta, std::size_t staleness, double eta) {
  const double s2 = static_cast<double>(staleness) * static_cast<double>(staleness);
  const double den = 1.0 - 2.0 * rho_plus * rho_plus * delta * s2 * eta * eta;
  if (!(den > 0.0)) return std::nullopt;
  return (1.0 + rho_plus * delta * s2 * eta) / den;
}

namespace {

using detail::Budget;
using detail::ComponentSampler;
using detail::PassCounter;
using detail::Projector;
using detail::TraceRecorder;

/// Draws q distinct coordinates by a partial Fisher-Yates shuffle of a
/// persistent permutation.
class BlockSampler {
 public:
  BlockSampler(std::size_t d, std::size_t q, SplitMix64 rng) : q_(q), rng_(rng), perm_(d) {
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  }

  const std::size_t* next() {
    const std::size_t d = perm_.size();
    for (std::size_t j = 0; j < q_; ++j) std::swap(perm_[j], perm_[j + rng_.below(d - j)]);
    return perm_.data();
  }

  std::size_t size() const { return q_; }

 private:
  std::size_t q_;
  SplitMix64 rng_;
  std::vector<std::size_t> perm_;
};

void check_async(const Problem& problem, const SolverConfig& config, const AsyncConfig& async,
                 const Parameter& theta0) {
  if (!(theta0.shape() == problem.shape()))
    throw InvalidArgument("initial parameter shape " + theta0.shape().to_string() + " does not match problem shape " +
                          problem.shape().to_string());
  config.validate(problem);
  if (async.workers == 0) throw InvalidArgument("workers must be at least 1");
  if (async.block_size > problem.dim()) throw InvalidArgument("block size exceeds the dimension");
}

void finish_diagnostics(const Problem& problem, const SolverConfig& config, const AsyncConfig& async,
                        std::size_t q, std::size_t staleness, AsyncDiagnostics& diag) {
  diag.realized_max_staleness = staleness;
  if (q == problem.dim())
    diag.delta_estimate = 1.0;
  else if (async.delta_trials > 0)
    diag.delta_estimate = measure_delta(problem, q, async.delta_trials, async.seed);
  if (async.rho_plus) {
    diag.gamma = async_gamma(*async.rho_plus, diag.delta_estimate, staleness, config.step_size);
    diag.regime_violation = !diag.gamma;
  }
}

}  // namespace

std::pair<IterateTrace, AsyncDiagnostics> asvrg_ht_sim(const Problem& problem, const SolverConfig& config,
                                                       const AsyncConfig& async, const DelaySchedule& schedule,
                                                       const Parameter& theta0) {
  check_async(problem, config, async, theta0);
  if (!schedule) throw InvalidArgument("simulated mode needs a delay schedule");
  const auto started = std::chrono::steady_clock::now();
  const std::size_t n = problem.num_components();
  const std::size_t d = problem.dim();
  const std::size_t m = config.inner_steps(problem);
  const std::size_t q = async.block(d, config.sparsity);
  const std::size_t lag = async.max_staleness;
  const double eta = config.step_size;
  const double scale = async.rescale_block ? static_cast<double>(d) / static_cast<double>(q) : 1.0;
  const double round_cost = 1.0 + static_cast<double>(m) / static_cast<double>(n);

  Projector project(problem, config);
  TraceRecorder recorder(problem, config, theta0.values());
  Budget budget(config);
  PassCounter counter{n};

  Eigen::VectorXd snapshot = theta0.values();
  Eigen::VectorXd theta, next_snapshot, g;
  VrWorkspace ws;
  std::vector<Eigen::VectorXd> ring(lag + 1);
  std::size_t realized = 0;
  std::size_t rounds = 0;
  bool done = false;
  while (!done && budget.allows(counter, round_cost, rounds)) {
    const SnapshotState state = SnapshotState::at(problem, snapshot);
    ++counter.full;
    ComponentSampler sampler(n, config.sampling, make_stream(config.seed, StreamTag::component, rounds));
    BlockSampler blocks(d, q, make_stream(async.seed, StreamTag::block, rounds));
    std::size_t keep_at = m;
    if (config.snapshot_rule == SnapshotRule::random_iterate) {
      SplitMix64 pick = make_stream(config.seed, StreamTag::snapshot, rounds);
      keep_at = 1 + static_cast<std::size_t>(pick.below(m));
    }

    theta = snapshot;
    if (lag > 0) ring[0] = theta;
    try {
      for (std::size_t t = 0; t < m; ++t) {
        const std::size_t read = schedule(rounds, t);
        if (read > t || t - read > lag)
          throw InvalidArgument("delay schedule returned iterate " + std::to_string(read) + " for step " +
                                std::to_string(t) + " with staleness bound " + std::to_string(lag));
        realized = std::max(realized, t - read);
        const Eigen::VectorXd& stale = read == t ? theta : ring[read % (lag + 1)];
        vr_gradient_into(problem, sampler.next(), stale, state, ws, g);
        if (q == d && scale == 1.0) {
          theta -= eta * g;
        } else {
          const std::size_t* e = blocks.next();
          for (std::size_t j = 0; j < q; ++j) {
            const auto c = static_cast<Eigen::Index>(e[j]);
            theta[c] -= eta * (scale * g[c]);
          }
        }
        project(theta);
        if (t + 1 == keep_at) next_snapshot = theta;
        if (lag > 0) ring[(t + 1) % (lag + 1)] = theta;
      }
    } catch (const NumericError& e) {
      detail::rethrow_as_divergence(e, rounds, eta);
    }
    counter.stochastic += m;
    snapshot.swap(next_snapshot);
    ++rounds;
    done = recorder.record(counter.passes(), snapshot, rounds);
  }
  AsyncDiagnostics diag;
  IterateTrace trace = recorder.finish(snapshot, counter, rounds);
  diag.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  finish_diagnostics(problem, config, async, q, realized, diag);
  return {std::move(trace), diag};
}

std::pair<IterateTrace, AsyncDiagnostics> asvrg_ht(const Problem& problem, const SolverConfig& config,
                                                   const AsyncConfig& async, const Parameter& theta0) {
  check_async(problem, config, async, theta0);
  const auto started = std::chrono::steady_clock::now();
  const std::size_t n = problem.num_components();
  const std::size_t d = problem.dim();
  const std::size_t m = config.inner_steps(problem);
  const std::size_t q = async.block(d, config.sparsity);
  const std::size_t workers = async.workers;
  const double eta = config.step_size;
  const double scale = async.rescale_block ? static_cast<double>(d) / static_cast<double>(q) : 1.0;
  const double round_cost = 1.0 + static_cast<double>(m) / static_cast<double>(n);

  Projector snapshot_project(problem, config);
  TraceRecorder recorder(problem, config, theta0.values());
  Budget budget(config);
  PassCounter counter{n};

  std::vector<std::atomic<double>> shared(d);
  Eigen::VectorXd snapshot = theta0.values();
  std::size_t realized = 0;
  std::size_t rounds = 0;
  bool done = false;
  while (!done && budget.allows(counter, round_cost, rounds)) {
    const SnapshotState state = SnapshotState::at(problem, snapshot);
    ++counter.full;
    for (std::size_t j = 0; j < d; ++j) shared[j].store(snapshot[static_cast<Eigen::Index>(j)], std::memory_order_relaxed);

    std::atomic<std::size_t> next_step{0};
    std::atomic<std::size_t> commits{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::vector<std::size_t> worst(workers, 0);

#pragma omp parallel num_threads(static_cast<int>(workers))
    {
      const auto w = static_cast<std::size_t>(omp_get_thread_num());
      const std::uint64_t stream = static_cast<std::uint64_t>(rounds) * workers + w;
      ComponentSampler sampler(n, config.sampling, make_stream(config.seed, StreamTag::worker, stream));
      BlockSampler blocks(d, q, make_stream(async.seed, StreamTag::block, stream));
      Projector project(problem, config);
      Eigen::VectorXd read(d), local, g;
      VrWorkspace ws;
      try {
        while (!failed.load(std::memory_order_relaxed)) {
          if (next_step.fetch_add(1, std::memory_order_relaxed) >= m) break;
          const std::size_t version = commits.load(std::memory_order_acquire);
          for (std::size_t j = 0; j < d; ++j)
            read[static_cast<Eigen::Index>(j)] = shared[j].load(std::memory_order_relaxed);
          vr_gradient_into(problem, sampler.next(), read, state, ws, g);
          local = read;
          if (q == d && scale == 1.0) {
            local -= eta * g;
          } else {
            const std::size_t* e = blocks.next();
            for (std::size_t j = 0; j < q; ++j) {
              const auto c = static_cast<Eigen::Index>(e[j]);
              local[c] -= eta * (scale * g[c]);
            }
          }
          project(local);
          for (Eigen::Index j = 0; j < local.size(); ++j)
            if (local[j] != read[j]) shared[static_cast<std::size_t>(j)].store(local[j], std::memory_order_relaxed);
          const std::size_t before = commits.fetch_add(1, std::memory_order_acq_rel);
          worst[w] = std::max(worst[w], before - version);
        }
      } catch (...) {
#pragma omp critical(sht_async_error)
        if (!error) error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
      }
    }
    if (error) {
      try {
        std::rethrow_exception(error);
      } catch (const NumericError& e) {
        detail::rethrow_as_divergence(e, rounds, eta);
      }
    }
    for (std::size_t s : worst) realized = std::max(realized, s);

    for (std::size_t j = 0; j < d; ++j) snapshot[static_cast<Eigen::Index>(j)] = shared[j].load(std::memory_order_relaxed);
    try {
      snapshot_project(snapshot);
    } catch (const NumericError& e) {
      detail::rethrow_as_divergence(e, rounds, eta);
    }
    counter.stochastic += m;
    ++rounds;
    done = recorder.record(counter.passes(), snapshot, rounds);
  }
  AsyncDiagnostics diag;
  IterateTrace trace = recorder.finish(snapshot, counter, rounds);
  diag.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  finish_diagnostics(problem, config, async, q, realized, diag);
  return {std::move(trace), diag};
}

double measure_delta(const Problem& problem, std::size_t q, std::size_t trials, std::uint64_t seed) {
  const std::size_t d = problem.dim();
  if (q == 0 || q > d) throw InvalidArgument("block size must lie in [1, d]");
  if (trials == 0) throw InvalidArgument("trials must be positive");

  std::vector<Eigen::VectorXd> probes;
  SplitMix64 rng = make_stream(seed, StreamTag::trial, 0);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  Eigen::VectorXd g;
  problem.gradient(zero, g);
  probes.push_back(g);
  for (std::size_t i = 0; i < std::min<std::size_t>(4, problem.num_components()); ++i) {
    problem.component_gradient(i, zero, g);
    probes.push_back(g);
  }
  Eigen::VectorXd dense(static_cast<Eigen::Index>(d));
  for (auto& x : dense) x = rng.normal();
  probes.push_back(dense);
  Eigen::VectorXd spike = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  spike[static_cast<Eigen::Index>(rng.below(d))] = 1.0;
  probes.push_back(spike);
  return delta_for_vectors(probes, q, trials, seed);
}

double delta_for_vectors(const std::vector<Eigen::VectorXd>& probes, std::size_t q, std::size_t trials,
                         std::uint64_t seed) {
  if (trials == 0) throw InvalidArgument("trials must be positive");
  double delta = 0.0;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    const Eigen::VectorXd& v = probes[p];
    const auto d = static_cast<std::size_t>(v.size());
    if (q == 0 || q > d) throw InvalidArgument("block size must lie in [1, d]");
    const double total = v.squaredNorm();
    if (!(total > 0.0) || !std::isfinite(total)) continue;
    BlockSampler blocks(d, q, make_stream(seed, StreamTag::block, p));
    double acc = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t* e = blocks.next();
      double part = 0.0;
      for (std::size_t j = 0; j < q; ++j) part += v[static_cast<Eigen::Index>(e[j])] * v[static_cast<Eigen::Index>(e[j])];
      acc += part / total;
    }
    delta = std::max(delta, acc / static_cast<double>(trials));
  }
  return std::clamp(delta, 0.0, 1.0);
}

}  // namespace sht
