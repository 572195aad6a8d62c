#pragma once

// Randomized oracles for the thresholding lemmas, the unbiasedness of the
// variance-reduced gradient, and empirical restricted strong convexity /
// smoothness constants. Every check is a pure function of its seed.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "sht/problem.hpp"

namespace sht {

struct LemmaReport {
  std::size_t trials = 0;
  /// Trials with LHS > RHS * (1 + 1e-9).
  std::size_t violations = 0;
  /// max LHS / RHS (0 when both sides vanish).
  double worst_ratio = 0.0;
  std::string worst_case;  // "d=.. k=.. kstar=.. family=.."
  /// Vector check only: trials where H_k missed the brute-force optimum.
  std::size_t oracle_mismatches = 0;
};

/// ||H_k(t) - t*||^2 <= (1 + 2 sqrt(k*) / sqrt(k - k*)) ||t - t*||^2 on random
/// d <= max_d (at most 16), cycling through Gaussian, heavy-tailed,
/// tie-laden and adversarial draws. Each trial also checks H_k against an
/// enumeration of all size-k supports.
LemmaReport check_ht_lemma(std::size_t trials, std::size_t max_d, std::uint64_t seed);

/// The same bound for R_k on random d x p matrices, max_dim at most 10.
LemmaReport check_svt_lemma(std::size_t trials, std::size_t max_dim, std::uint64_t seed);

/// Both sides of the thresholding bound for one instance: {lhs, rhs}.
struct BoundSides {
  double lhs = 0.0;
  double rhs = 0.0;
};
BoundSides ht_bound_sides(const Eigen::VectorXd& theta, const Eigen::VectorXd& truth, std::size_t k,
                          std::size_t kstar);
BoundSides svt_bound_sides(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& truth, std::size_t k,
                           std::size_t kstar);

/// True when hard_threshold(v, k) drops a magnitude multiset no larger than
/// that of every other size-k support (enumerated; v.size() <= 16).
bool ht_matches_brute_force(const Eigen::VectorXd& v, std::size_t k);

struct VrReport {
  std::size_t trials = 0;
  /// max over trials of ||mean_i g_i - grad F||_inf / max(1, ||grad F||_inf).
  double max_deviation = 0.0;
  /// max of E||g_I||^2 / RHS of the second-moment bound; informational, and
  /// only computed when the problem has a ground truth and rho_plus is given.
  std::optional<double> second_moment_ratio;
};

/// Exact enumeration over all n components (n <= 100). The first trial uses
/// theta equal to the snapshot.
VrReport check_vr_unbiasedness(const Problem& problem, std::size_t trials, std::uint64_t seed,
                               std::optional<double> rho_plus = std::nullopt);

enum class RscStatus { ok, rsc_violated };

struct RscRssEstimate {
  double rho_minus = 0.0;
  double rho_plus = 0.0;
  double kappa = 0.0;  // rho_plus / rho_minus when rho_minus > 0, else +inf
  std::size_t sparsity = 0;
  std::size_t trials = 0;
  RscStatus status = RscStatus::ok;
  /// Quadratic problems: extreme eigenvalues over sampled s x s principal
  /// submatrices of the Hessian (already folded into rho_minus/rho_plus).
  std::optional<double> hessian_min_eig;
  std::optional<double> hessian_max_eig;
};

/// Sampled Bregman-divergence bounds along s-sparse directions: rho_minus
/// from F, rho_plus from every component. Hessian submatrices are used for
/// quadratic problems of dimension at most max_hessian_dim.
RscRssEstimate estimate_rsc_rss(const Problem& problem, std::size_t s, std::size_t trials, std::uint64_t seed,
                                std::size_t max_hessian_dim = 1000);

}  // namespace sht
