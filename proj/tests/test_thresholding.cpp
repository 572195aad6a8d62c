#include <doctest.h>

#include "oracles.hpp"
#include "sht/errors.hpp"
#include "sht/thresholding.hpp"

using namespace sht;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index j = 0;
  for (double x : xs) v[j++] = x;
  return v;
}

}  // namespace

TEST_SUITE("thresholding") {

TEST_CASE("hard threshold keeps the largest magnitudes") {
  CHECK(hard_threshold(vec({3, 1, -5, 0}), 2) == vec({3, 0, -5, 0}));
  CHECK(hard_threshold(vec({2, -2, 1}), 1) == vec({2, 0, 0}));
  Eigen::VectorXd v = oracle::random_vector(9, 1);
  CHECK(hard_threshold(v, 9) == v);
  CHECK(hard_threshold(v, 20) == v);
  CHECK_THROWS_AS(hard_threshold(v, 0), InvalidArgument);
  CHECK_THROWS_AS(hard_threshold(vec({1, NAN}), 1), NumericError);
}

TEST_CASE("selection agrees with a stable sort under ties") {
  auto rng = make_stream(5, StreamTag::trial);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto d = static_cast<std::size_t>(1 + rng.below(40));
    Eigen::VectorXd v(static_cast<Eigen::Index>(d));
    for (auto& x : v) x = static_cast<double>(static_cast<int>(rng.below(7)) - 3);
    const auto k = static_cast<std::size_t>(1 + rng.below(d));
    Eigen::VectorXd h = hard_threshold(v, k);
    REQUIRE(h == oracle::sort_threshold(v, k));
    CHECK(count_nonzeros(h) <= k);
    CHECK(hard_threshold(h, k) == h);
    CHECK(h.norm() <= v.norm());
  }
}

TEST_CASE("l2 ball projection") {
  CHECK(l2_ball_project(vec({3, 4}), 10) == vec({3, 4}));
  Eigen::VectorXd p = l2_ball_project(vec({3, 4}), 1);
  CHECK(p[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(l2_ball_project(Eigen::VectorXd::Zero(3), 2.0) == Eigen::VectorXd::Zero(3));
  CHECK_THROWS_AS(l2_ball_project(vec({1}), 0.0), InvalidArgument);
}

TEST_CASE("l2 ball projection is idempotent and non-expansive toward the ball") {
  for (std::uint64_t s = 0; s < 200; ++s) {
    Eigen::VectorXd v = oracle::random_vector(6, s, 3.0);
    const double tau = 1.0 + static_cast<double>(s % 5);
    Eigen::VectorXd p = l2_ball_project(v, tau);
    CHECK(p.norm() <= tau * (1 + 1e-15));
    CHECK((l2_ball_project(p, tau) - p).norm() <= 1e-15 * tau);
    Eigen::VectorXd w = l2_ball_project(oracle::random_vector(6, s + 1000, 2.0), tau);
    CHECK((p - w).norm() <= (v - w).norm() * (1 + 1e-14));
  }
}

TEST_CASE("singular value thresholding") {
  Eigen::MatrixXd d3 = Eigen::Vector3d(3, 2, 1).asDiagonal();
  Eigen::MatrixXd want = Eigen::Vector3d(3, 2, 0).asDiagonal();
  CHECK((svt(d3, 2) - want).norm() < 1e-12);

  Eigen::VectorXd u = oracle::random_vector(5, 11), w = oracle::random_vector(4, 12);
  Eigen::MatrixXd r1 = u * w.transpose();
  CHECK((svt(r1, 1) - r1).norm() < 1e-12 * std::max(1.0, r1.norm()));
  CHECK_THROWS_AS(svt(r1, 0), InvalidArgument);
}

TEST_CASE("rank-k residual matches the Eckart-Young oracle") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    Eigen::MatrixXd m = oracle::random_matrix(4, 3, s);
    Eigen::VectorXd sv = oracle::singular_values(m);
    CHECK((m - svt(m, 2)).squaredNorm() == doctest::Approx(sv[2] * sv[2]).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("svt works on wide and tall matrices and is idempotent") {
  for (auto [r, c] : {std::pair{3, 7}, std::pair{7, 3}}) {
    Eigen::MatrixXd m = oracle::random_matrix(static_cast<std::size_t>(r), static_cast<std::size_t>(c), 40);
    Eigen::MatrixXd once = svt(m, 2);
    Eigen::VectorXd sv = oracle::singular_values(once);
    CHECK(sv[2] < 1e-10);
    CHECK((svt(once, 2) - once).norm() < 1e-10);
  }
}

TEST_CASE("svt on a flattened parameter") {
  Eigen::MatrixXd m = oracle::random_matrix(4, 3, 50);
  Eigen::VectorXd flat = Eigen::Map<Eigen::VectorXd>(m.data(), m.size());
  svt_inplace(flat, Shape::matrix(4, 3), 1);
  Eigen::MatrixXd back = Eigen::Map<Eigen::MatrixXd>(flat.data(), 4, 3);
  CHECK((back - svt(m, 1)).norm() < 1e-14);
}

TEST_CASE("soft threshold") {
  CHECK(soft_threshold(vec({3, -0.5, 1}), 1) == vec({2, 0, 0}));
  Eigen::VectorXd v = oracle::random_vector(7, 60);
  CHECK(soft_threshold(v, 0) == v);
  CHECK(soft_threshold(vec({-2}), 0.5) == vec({-1.5}));
}

TEST_CASE("threshold spec dispatch") {
  Eigen::VectorXd v = vec({3, 1, -5, 0});
  CHECK(apply_threshold(ThresholdSpec::hard(1), v, Shape::vector(4)) == vec({0, 0, -5, 0}));
  CHECK(apply_threshold(ThresholdSpec::soft(1), v, Shape::vector(4)) == vec({2, 0, -4, 0}));
  CHECK(apply_threshold(ThresholdSpec::l2ball(100), v, Shape::vector(4)) == v);
  Eigen::VectorXd r = apply_threshold(ThresholdSpec::rank(1), v, Shape::matrix(2, 2));
  CHECK(oracle::singular_values(Eigen::Map<Eigen::MatrixXd>(r.data(), 2, 2))[1] < 1e-12);
}

}
