#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sht/datagen.hpp"
#include "sht/errors.hpp"
#include "sht/models.hpp"
#include "sht/thresholding.hpp"
#include "sht/verify.hpp"

using namespace sht;

TEST_SUITE("verify") {

TEST_CASE("both sides vanish at the truth") {
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(8);
  truth[1] = 2.0;
  truth[5] = -1.0;
  auto s = ht_bound_sides(truth, truth, 4, 2);
  CHECK(s.lhs == 0.0);
  CHECK(s.rhs == 0.0);
  Eigen::MatrixXd m = oracle::random_vector(4, 1) * oracle::random_vector(3, 2).transpose();
  auto t = svt_bound_sides(m, m, 2, 1);
  CHECK(t.lhs < 1e-24);
  CHECK(t.rhs == 0.0);
}

TEST_CASE("bound sides follow the lemma's formula") {
  Eigen::VectorXd theta = oracle::random_vector(10, 3);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(10);
  truth[0] = 1.0;
  truth[7] = -2.0;
  auto s = ht_bound_sides(theta, truth, 5, 2);
  CHECK(s.lhs == doctest::Approx((oracle::sort_threshold(theta, 5) - truth).squaredNorm()).epsilon(1e-14));
  CHECK(s.rhs == doctest::Approx((1.0 + 2.0 * std::sqrt(2.0) / std::sqrt(3.0)) * (theta - truth).squaredNorm())
                     .epsilon(1e-14));
}

TEST_CASE("hard-thresholding lemma holds on random and adversarial trials") {
  auto r = check_ht_lemma(3000, 16, 1);
  CHECK(r.trials == 3000);
  CHECK(r.violations == 0);
  CHECK(r.oracle_mismatches == 0);
  CHECK(r.worst_ratio <= 1.0);
  CHECK(!r.worst_case.empty());
  CHECK_THROWS_AS(check_ht_lemma(10, 17, 1), InvalidArgument);
}

TEST_CASE("truth placed on the dropped entries") {
  // theta keeps k large entries; the truth lives where H_k cuts
  const std::size_t d = 12, k = 6, kstar = 3;
  Eigen::VectorXd theta(d);
  for (std::size_t j = 0; j < d; ++j) theta[static_cast<Eigen::Index>(j)] = j < k ? 1.0 + 0.01 * static_cast<double>(j) : 0.99;
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(d);
  for (std::size_t j = 0; j < kstar; ++j) truth[static_cast<Eigen::Index>(k + j)] = 0.99;
  auto s = ht_bound_sides(theta, truth, k, kstar);
  CHECK(s.lhs <= s.rhs);
  CHECK(s.lhs > 0.0);
}

TEST_CASE("H_k agrees with exhaustive support search") {
  auto rng = make_stream(4, StreamTag::trial);
  for (int trial = 0; trial < 500; ++trial) {
    const auto d = static_cast<std::size_t>(1 + rng.below(12));
    Eigen::VectorXd v(static_cast<Eigen::Index>(d));
    for (auto& x : v) x = static_cast<double>(static_cast<int>(rng.below(5)) - 2);
    const auto k = static_cast<std::size_t>(1 + rng.below(d));
    CHECK(ht_matches_brute_force(v, k));
    const Eigen::VectorXd h = hard_threshold(v, k);
    CHECK((v - h).squaredNorm() == oracle::best_k_residual(v, k));
  }
}

TEST_CASE("singular-value lemma holds on random trials") {
  auto r = check_svt_lemma(300, 10, 2);
  CHECK(r.violations == 0);
  CHECK(r.worst_ratio <= 1.0);
  CHECK_THROWS_AS(check_svt_lemma(10, 11, 1), InvalidArgument);
}

TEST_CASE("diagonal matrices reduce to the vector lemma") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Eigen::VectorXd a = oracle::random_vector(6, s);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(6);
    b[static_cast<Eigen::Index>(s % 6)] = 1.5;
    b[static_cast<Eigen::Index>((s + 2) % 6)] = -0.5;
    auto v = ht_bound_sides(a, b, 4, 2);
    auto m = svt_bound_sides(a.asDiagonal().toDenseMatrix(), b.asDiagonal().toDenseMatrix(), 4, 2);
    CHECK(m.lhs == doctest::Approx(v.lhs).epsilon(1e-12).scale(1e-12));
    CHECK(m.rhs == doctest::Approx(v.rhs).epsilon(1e-12));
  }
}

TEST_CASE("variance-reduced gradient unbiasedness by enumeration") {
  GenerationSpec spec;
  spec.nb = 100;
  spec.d = 40;
  spec.kstar = 4;
  spec.batches = 20;
  spec.sigma = 0.5;
  spec.seed = 3;
  auto p = build_problem(generate_instance(spec));
  auto r = check_vr_unbiasedness(*p, 30, 1, 50.0);
  CHECK(r.trials == 30);
  CHECK(r.max_deviation <= 1e-11);
  CHECK(r.second_moment_ratio.has_value());

  spec.batches = 200;
  spec.nb = 200;
  auto big = build_problem(generate_instance(spec));
  CHECK_THROWS_AS(check_vr_unbiasedness(*big, 1, 1), InvalidArgument);
}

TEST_CASE("identity design has unit restricted constants") {
  QuadraticProblem p({Eigen::MatrixXd::Identity(12, 12)}, {Eigen::VectorXd::Zero(12)});
  auto e = estimate_rsc_rss(p, 4, 50, 1);
  CHECK(e.rho_minus == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(e.rho_plus == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(e.kappa == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(e.status == RscStatus::ok);
}

TEST_CASE("scaling the design scales the constants by four") {
  RowMatrix a = gen_equicorrelated_design(60, 15, 0.3, 5);
  Eigen::VectorXd y = oracle::random_vector(60, 6);
  auto p = make_linear_regression({a, y, 6});
  auto q = make_linear_regression({2.0 * a, y, 6});
  auto e1 = estimate_rsc_rss(p, 3, 40, 7);
  auto e2 = estimate_rsc_rss(q, 3, 40, 7);
  CHECK(e2.rho_minus == doctest::Approx(4.0 * e1.rho_minus).epsilon(1e-8));
  CHECK(e2.rho_plus == doctest::Approx(4.0 * e1.rho_plus).epsilon(1e-8));
  CHECK(e2.kappa == doctest::Approx(e1.kappa).epsilon(1e-8));
  CHECK(e1.rho_minus <= e1.rho_plus);
}

TEST_CASE("missing-data quadratic with more columns than rows violates RSC") {
  RowMatrix a = gen_equicorrelated_design(40, 80, 0.0, 8);
  RowMatrix z = apply_corruption(a, MissingEntries{0.2}, 9);
  auto q = make_corrupted_quadratic(z, oracle::random_vector(40, 10), MissingData{0.2}, 4);
  auto full = estimate_rsc_rss(q, 80, 50, 11);
  CHECK(full.status == RscStatus::rsc_violated);
  REQUIRE(full.hessian_min_eig.has_value());
  CHECK(*full.hessian_min_eig < 0.0);
  auto narrow = estimate_rsc_rss(q, 2, 50, 11);
  CHECK(narrow.status == RscStatus::ok);
  CHECK(narrow.rho_minus > 0.0);
}

TEST_CASE("reports are deterministic per seed") {
  auto a = check_ht_lemma(200, 12, 5);
  auto b = check_ht_lemma(200, 12, 5);
  CHECK(a.worst_ratio == b.worst_ratio);
  CHECK(a.worst_case == b.worst_case);
}

}
