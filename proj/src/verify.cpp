#include "sht/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sht/errors.hpp"
#include "sht/rng.hpp"
#include "sht/thresholding.hpp"

namespace sht {

namespace {

constexpr double kSlack = 1e-9;

double bound_factor(std::size_t k, std::size_t kstar) {
  return 1.0 + 2.0 * std::sqrt(static_cast<double>(kstar)) / std::sqrt(static_cast<double>(k - kstar));
}

void tally(LemmaReport& report, const BoundSides& sides, const std::string& label) {
  ++report.trials;
  double ratio = 0.0;
  if (sides.rhs > 0.0)
    ratio = sides.lhs / sides.rhs;
  else if (sides.lhs > 0.0)
    ratio = std::numeric_limits<double>::infinity();
  if (sides.lhs > sides.rhs * (1.0 + kSlack)) ++report.violations;
  if (ratio > report.worst_ratio || report.worst_case.empty()) {
    report.worst_ratio = std::max(report.worst_ratio, ratio);
    report.worst_case = label;
  }
}

std::string describe(std::size_t d, std::size_t p, std::size_t k, std::size_t kstar, const char* family) {
  std::ostringstream s;
  s << "d=" << d;
  if (p > 0) s << " p=" << p;
  s << " k=" << k << " kstar=" << kstar << " family=" << family;
  return s.str();
}

double cauchy(SplitMix64& rng) { return std::tan(std::numbers::pi * (rng.uniform() - 0.5)); }

double tie_value(SplitMix64& rng) {
  static constexpr double kLevels[] = {-2.0, -1.0, 0.0, 1.0, 2.0};
  return kLevels[rng.below(5)];
}

/// Chooses `count` distinct indices of [0, d) uniformly.
std::vector<std::size_t> pick(SplitMix64& rng, std::size_t d, std::size_t count) {
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t j = 0; j < count; ++j) std::swap(idx[j], idx[j + rng.below(d - j)]);
  idx.resize(count);
  return idx;
}

/// Sum of squares of the entries outside `kept`, accumulated in ascending
/// order of magnitude so equal multisets give equal sums.
double dropped_mass(const std::vector<double>& squares_sorted, const std::vector<std::size_t>& order,
                    std::uint32_t kept) {
  double sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r)
    if (!(kept >> order[r] & 1u)) sum += squares_sorted[r];
  return sum;
}

}  // namespace

BoundSides ht_bound_sides(const Eigen::VectorXd& theta, const Eigen::VectorXd& truth, std::size_t k,
                          std::size_t kstar) {
  if (kstar >= k) throw InvalidArgument("the bound needs kstar < k");
  const double lhs = (hard_threshold(theta, k) - truth).squaredNorm();
  return {lhs, bound_factor(k, kstar) * (theta - truth).squaredNorm()};
}

BoundSides svt_bound_sides(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& truth, std::size_t k,
                           std::size_t kstar) {
  if (kstar >= k) throw InvalidArgument("the bound needs kstar < k");
  const double lhs = (svt(theta, k) - truth).squaredNorm();
  return {lhs, bound_factor(k, kstar) * (theta - truth).squaredNorm()};
}

bool ht_matches_brute_force(const Eigen::VectorXd& v, std::size_t k) {
  const auto d = static_cast<std::size_t>(v.size());
  if (d > 16) throw InvalidArgument("brute-force support enumeration is capped at d = 16");
  if (k == 0) throw InvalidArgument("k must be at least 1");
  const Eigen::VectorXd h = hard_threshold(v, k);
  if (k >= d) return h == v;

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(v[static_cast<Eigen::Index>(a)]) < std::abs(v[static_cast<Eigen::Index>(b)]);
  });
  std::vector<double> squares(d);
  for (std::size_t r = 0; r < d; ++r) squares[r] = v[static_cast<Eigen::Index>(order[r])] * v[static_cast<Eigen::Index>(order[r])];

  // H_k may keep fewer than k nonzeros when v has zeros; its support is the
  // set of positions it did not zero out, padded by zeros of v.
  std::uint32_t kept = 0;
  std::size_t nonzeros = 0;
  for (std::size_t j = 0; j < d; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (h[jj] != 0.0) {
      if (h[jj] != v[jj]) return false;
      kept |= 1u << j;
      ++nonzeros;
    }
  }
  if (nonzeros > k) return false;
  const double ours = dropped_mass(squares, order, kept);

  double best = std::numeric_limits<double>::infinity();
  std::uint32_t mask = (1u << k) - 1u;
  const std::uint32_t limit = 1u << d;
  while (mask < limit) {
    best = std::min(best, dropped_mass(squares, order, mask));
    const std::uint32_t c = mask & (0u - mask);
    const std::uint32_t r = mask + c;
    mask = (((r ^ mask) >> 2) / c) | r;
  }
  return ours == best;
}

LemmaReport check_ht_lemma(std::size_t trials, std::size_t max_d, std::uint64_t seed) {
  if (max_d > 16) throw InvalidArgument("check_ht_lemma enumerates supports and caps d at 16");
  if (max_d < 2) throw InvalidArgument("max_d must be at least 2");
  if (trials == 0) throw InvalidArgument("trials must be positive");
  static constexpr const char* kFamilies[] = {"gaussian", "heavy-tailed", "tie-laden", "adversarial"};

  LemmaReport report;
  for (std::size_t t = 0; t < trials; ++t) {
    SplitMix64 rng = make_stream(seed, StreamTag::trial, t);
    const std::size_t family = t % 4;
    const std::size_t d = 2 + static_cast<std::size_t>(rng.below(max_d - 1));
    const std::size_t kstar = static_cast<std::size_t>(rng.below(d));
    const std::size_t k = kstar + 1 + static_cast<std::size_t>(rng.below(d - kstar));

    Eigen::VectorXd theta(static_cast<Eigen::Index>(d));
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (auto& x : theta) x = family == 0 ? rng.normal() : family == 1 ? cauchy(rng) : family == 2 ? tie_value(rng) : rng.normal();

    if (family == 3) {
      // Put the truth exactly where H_k throws mass away, close to theta there.
      const Eigen::VectorXd h = hard_threshold(theta, k);
      std::vector<std::size_t> dropped, kept;
      for (std::size_t j = 0; j < d; ++j) (h[static_cast<Eigen::Index>(j)] == 0.0 ? dropped : kept).push_back(j);
      for (std::size_t j = 0; j < kstar; ++j) {
        const std::size_t pos = j < dropped.size() ? dropped[j] : kept[j - dropped.size()];
        const auto p = static_cast<Eigen::Index>(pos);
        truth[p] = theta[p] + 0.01 * rng.normal();
      }
    } else {
      for (std::size_t pos : pick(rng, d, kstar))
        truth[static_cast<Eigen::Index>(pos)] = family == 2 ? tie_value(rng) : rng.normal();
    }

    tally(report, ht_bound_sides(theta, truth, k, kstar), describe(d, 0, k, kstar, kFamilies[family]));
    if (!ht_matches_brute_force(theta, k)) ++report.oracle_mismatches;
  }
  return report;
}

LemmaReport check_svt_lemma(std::size_t trials, std::size_t max_dim, std::uint64_t seed) {
  if (max_dim > 10) throw InvalidArgument("check_svt_lemma caps matrix dimensions at 10");
  if (max_dim < 2) throw InvalidArgument("max_dim must be at least 2");
  if (trials == 0) throw InvalidArgument("trials must be positive");
  static constexpr const char* kFamilies[] = {"gaussian", "near-truth", "diagonal", "heavy-tailed"};

  LemmaReport report;
  for (std::size_t t = 0; t < trials; ++t) {
    SplitMix64 rng = make_stream(seed, StreamTag::trial, t);
    const std::size_t family = t % 4;
    const std::size_t d = 2 + static_cast<std::size_t>(rng.below(max_dim - 1));
    const std::size_t p = 2 + static_cast<std::size_t>(rng.below(max_dim - 1));
    const std::size_t r = std::min(d, p);
    const std::size_t kstar = static_cast<std::size_t>(rng.below(r));
    const std::size_t k = kstar + 1 + static_cast<std::size_t>(rng.below(r - kstar));
    const auto rows = static_cast<Eigen::Index>(d);
    const auto cols = static_cast<Eigen::Index>(p);

    Eigen::MatrixXd truth = Eigen::MatrixXd::Zero(rows, cols);
    Eigen::MatrixXd theta(rows, cols);
    if (family == 2) {
      theta.setZero();
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(r); ++j) theta(j, j) = rng.normal();
      for (std::size_t pos : pick(rng, r, kstar)) {
        const auto j = static_cast<Eigen::Index>(pos);
        truth(j, j) = rng.normal();
      }
    } else {
      Eigen::MatrixXd u(rows, static_cast<Eigen::Index>(kstar)), v(cols, static_cast<Eigen::Index>(kstar));
      for (auto& x : u.reshaped()) x = rng.normal();
      for (auto& x : v.reshaped()) x = rng.normal();
      truth = u * v.transpose();
      for (auto& x : theta.reshaped()) x = family == 3 ? cauchy(rng) : rng.normal();
      if (family == 1) theta = truth + 0.1 * theta;
    }
    tally(report, svt_bound_sides(theta, truth, k, kstar), describe(d, p, k, kstar, kFamilies[family]));
  }
  return report;
}

namespace {

Eigen::VectorXd random_sparse(SplitMix64& rng, std::size_t d, std::size_t s) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t pos : pick(rng, d, s)) v[static_cast<Eigen::Index>(pos)] = rng.normal();
  return v;
}

}  // namespace

VrReport check_vr_unbiasedness(const Problem& problem, std::size_t trials, std::uint64_t seed,
                               std::optional<double> rho_plus) {
  const std::size_t n = problem.num_components();
  const std::size_t d = problem.dim();
  if (n > 100) throw InvalidArgument("exact enumeration needs n <= 100, got " + std::to_string(n));
  if (trials == 0) throw InvalidArgument("trials must be positive");
  const std::size_t s = std::max<std::size_t>(1, d / 4);
  const auto& truth = problem.ground_truth();
  const bool moments = truth.has_value() && rho_plus.has_value();

  VrReport report;
  report.trials = trials;
  Eigen::VectorXd grad_truth;
  double f_truth = 0.0;
  if (moments) {
    problem.gradient(*truth, grad_truth);
    f_truth = problem.value(*truth);
  }

  Eigen::VectorXd full, g, mean(static_cast<Eigen::Index>(d));
  VrWorkspace ws;
  for (std::size_t t = 0; t < trials; ++t) {
    SplitMix64 rng = make_stream(seed, StreamTag::trial, t);
    const Eigen::VectorXd snapshot = random_sparse(rng, d, s);
    const Eigen::VectorXd theta = t == 0 ? snapshot : random_sparse(rng, d, s);
    const SnapshotState state = SnapshotState::at(problem, snapshot);

    std::vector<Eigen::Index> support;
    if (moments)
      for (Eigen::Index j = 0; j < theta.size(); ++j)
        if (theta[j] != 0.0 || (*truth)[j] != 0.0) support.push_back(j);

    mean.setZero();
    double second = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      vr_gradient_into(problem, i, theta, state, ws, g);
      mean += g;
      for (Eigen::Index j : support) second += g[j] * g[j];
    }
    mean /= static_cast<double>(n);
    problem.gradient(theta, full);
    const double scale = std::max(1.0, full.lpNorm<Eigen::Infinity>());
    report.max_deviation = std::max(report.max_deviation, (mean - full).lpNorm<Eigen::Infinity>() / scale);

    if (moments) {
      second /= static_cast<double>(n);
      double tail = 0.0;
      for (Eigen::Index j : support) tail += grad_truth[j] * grad_truth[j];
      const double rhs =
          12.0 * *rho_plus * (problem.value(theta) - f_truth + problem.value(snapshot) - f_truth) + 3.0 * tail;
      const double ratio = rhs > 0.0 ? second / rhs : (second > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      report.second_moment_ratio = std::max(report.second_moment_ratio.value_or(0.0), ratio);
    }
  }
  return report;
}

RscRssEstimate estimate_rsc_rss(const Problem& problem, std::size_t s, std::size_t trials, std::uint64_t seed,
                                std::size_t max_hessian_dim) {
  const std::size_t d = problem.dim();
  const std::size_t n = problem.num_components();
  if (s == 0 || s > d) throw InvalidArgument("sparsity must lie in [1, d]");
  if (trials == 0) throw InvalidArgument("trials must be positive");

  RscRssEstimate est;
  est.sparsity = s;
  est.trials = trials;
  est.rho_minus = std::numeric_limits<double>::infinity();
  est.rho_plus = -std::numeric_limits<double>::infinity();

  Eigen::VectorXd grad;
  for (std::size_t t = 0; t < trials; ++t) {
    SplitMix64 rng = make_stream(seed, StreamTag::trial, t);
    const Eigen::VectorXd base = random_sparse(rng, d, s);
    const Eigen::VectorXd step = random_sparse(rng, d, s);
    const Eigen::VectorXd moved = base + step;
    const double norm2 = step.squaredNorm();
    if (!(norm2 > 0.0)) continue;

    problem.gradient(base, grad);
    const double bregman = problem.value(moved) - problem.value(base) - grad.dot(step);
    est.rho_minus = std::min(est.rho_minus, 2.0 * bregman / norm2);
    for (std::size_t i = 0; i < n; ++i) {
      problem.component_gradient(i, base, grad);
      const double bi = problem.component_value(i, moved) - problem.component_value(i, base) - grad.dot(step);
      est.rho_plus = std::max(est.rho_plus, 2.0 * bi / norm2);
    }
  }

  if (d <= max_hessian_dim) {
    if (const auto hessian = problem.hessian()) {
      const std::size_t subsets = s == d ? 1 : std::min<std::size_t>(trials, 20);
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < subsets; ++t) {
        SplitMix64 rng = make_stream(seed, StreamTag::permutation, t);
        std::vector<std::size_t> idx = pick(rng, d, s);
        std::sort(idx.begin(), idx.end());
        Eigen::MatrixXd sub(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s));
        for (std::size_t a = 0; a < s; ++a)
          for (std::size_t b = 0; b < s; ++b)
            sub(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                (*hessian)(static_cast<Eigen::Index>(idx[a]), static_cast<Eigen::Index>(idx[b]));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sub, Eigen::EigenvaluesOnly);
        if (eig.info() != Eigen::Success) throw NumericError("eigensolver failed on a Hessian submatrix");
        lo = std::min(lo, eig.eigenvalues().minCoeff());
        hi = std::max(hi, eig.eigenvalues().maxCoeff());
      }
      est.hessian_min_eig = lo;
      est.hessian_max_eig = hi;
      est.rho_minus = std::min(est.rho_minus, lo);
      est.rho_plus = std::max(est.rho_plus, hi);
    }
  }

  est.status = est.rho_minus > 0.0 ? RscStatus::ok : RscStatus::rsc_violated;
  est.kappa = est.rho_minus > 0.0 ? est.rho_plus / est.rho_minus : std::numeric_limits<double>::infinity();
  return est;
}

}  // namespace sht
