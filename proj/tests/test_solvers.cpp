#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "sht/datagen.hpp"
#include "sht/errors.hpp"
#include "sht/models.hpp"
#include "sht/solvers.hpp"

using namespace sht;

namespace {

QuadraticProblem isotropic(const Eigen::VectorXd& center) {
  // 1/2 ||theta - center||^2 up to a constant
  const auto d = center.size();
  return QuadraticProblem({Eigen::MatrixXd::Identity(d, d)}, {center});
}

SolverConfig basic(double eta, std::size_t k, std::size_t outer) {
  SolverConfig c;
  c.step_size = eta;
  c.sparsity = k;
  c.outer_budget = outer;
  c.seed = 17;
  return c;
}

struct Small {
  SyntheticInstance inst;
  std::unique_ptr<Problem> problem;
};

Small small_instance(double sigma, std::uint64_t seed, double c = 0.0, std::size_t nb = 200, std::size_t d = 400,
                     std::size_t kstar = 10, std::size_t batches = 20) {
  GenerationSpec spec;
  spec.nb = nb;
  spec.d = d;
  spec.kstar = kstar;
  spec.correlation = c;
  spec.sigma = sigma;
  spec.batches = batches;
  spec.seed = seed;
  Small s{generate_instance(spec), nullptr};
  s.problem = build_problem(s.inst);
  return s;
}

std::vector<Eigen::VectorXd> checkpoint_iterates(IterateTrace (*solver)(const Problem&, const SolverConfig&,
                                                                          const Parameter&),
                                                  const Problem& p, SolverConfig c, std::size_t steps) {
  std::vector<Eigen::VectorXd> out;
  for (std::size_t r = 1; r <= steps; ++r) {
    c.outer_budget = r;
    out.push_back(solver(p, c, Parameter::zeros(p.shape())).final_parameter.values());
  }
  return out;
}

double final_error(const IterateTrace& t) { return *t.checkpoints.back().estimation_error; }

}  // namespace

TEST_SUITE("solvers") {

TEST_CASE("full-gradient step on a scalar quadratic") {
  auto p = isotropic(Eigen::VectorXd::Constant(1, 2.0));
  auto t = fg_ht(p, basic(1.0, 1, 1), Parameter::zeros(Shape::vector(1)));
  CHECK(t.final_parameter.values()[0] == 2.0);
  CHECK(t.final_passes == 1.0);
}

TEST_CASE("full-gradient step keeps the largest coordinate") {
  Eigen::VectorXd c(3);
  c << 3, 1, 0;
  auto t = fg_ht(isotropic(c), basic(1.0, 1, 1), Parameter::zeros(Shape::vector(3)));
  Eigen::VectorXd want(3);
  want << 3, 0, 0;
  CHECK(t.final_parameter.values() == want);
}

TEST_CASE("full-gradient recovery on a noiseless instance") {
  auto s = small_instance(0.0, 1);
  auto c = basic(0.25, 30, 0);
  c.pass_budget = 500.0;
  c.tolerance = 1e-24;
  auto t = fg_ht(*s.problem, c, Parameter::zeros(s.problem->shape()));
  CHECK(final_error(t) < 1e-10);
  CHECK(t.final_passes <= 500.0);
}

TEST_CASE("single component: SG, SVRG and SAGA reduce to full gradient") {
  RowMatrix a = oracle::random_matrix(12, 6, 2);
  auto p = make_linear_regression({a, oracle::random_vector(12, 3), 1});
  auto q = isotropic(oracle::random_vector(6, 4));
  for (const Problem* prob : {static_cast<const Problem*>(&p), static_cast<const Problem*>(&q)}) {
    auto c = basic(0.05, 3, 0);
    c.inner_length = 1;
    auto fg = checkpoint_iterates(fg_ht, *prob, c, 8);
    CHECK(checkpoint_iterates(sg_ht, *prob, c, 8) == fg);
    CHECK(checkpoint_iterates(svrg_ht, *prob, c, 8) == fg);
    // SAGA's first table costs a pass but not an iterate
    CHECK(checkpoint_iterates(saga_ht, *prob, c, 8) == fg);
    c.sparsity = 6;
    c.l1_weight = 0.0;
    CHECK(checkpoint_iterates(prox_svrg, *prob, c, 8) == checkpoint_iterates(fg_ht, *prob, c, 8));
  }
}

TEST_CASE("the truth is a fixed point of every solver on a noiseless instance") {
  auto s = small_instance(0.0, 5);
  const Parameter truth(s.problem->shape(), *s.inst.truth);
  auto c = basic(0.05, 20, 3);
  // component gradients vanish at the truth only up to roundoff
  CHECK(final_error(sg_ht(*s.problem, c, truth)) < 1e-12);
  CHECK(final_error(saga_ht(*s.problem, c, truth)) < 1e-12);
  for (auto rule : {SnapshotRule::last_iterate, SnapshotRule::random_iterate}) {
    c.snapshot_rule = rule;
    auto t = svrg_ht(*s.problem, c, truth);
    CHECK(final_error(t) < 1e-12);
    CHECK(t.final_parameter.nonzeros() <= 20);
  }
}

TEST_CASE("iterates stay k-sparse and inside the l2 ball") {
  auto s = small_instance(1.0, 6);
  auto c = basic(0.05, 15, 0);
  for (std::size_t r = 1; r <= 4; ++r) {
    c.outer_budget = r;
    for (auto solver : {fg_ht, sg_ht, svrg_ht, saga_ht})
      CHECK(solver(*s.problem, c, Parameter::zeros(s.problem->shape())).final_parameter.nonzeros() <= 15);
    c.l2_radius = 1.0;
    for (auto solver : {fg_ht, sg_ht, svrg_ht, saga_ht})
      CHECK(solver(*s.problem, c, Parameter::zeros(s.problem->shape())).final_parameter.values().norm() <=
            1.0 + 1e-15);
    c.l2_radius.reset();
  }
}

TEST_CASE("same seed, same trace") {
  auto s = small_instance(1.0, 7);
  auto c = basic(0.05, 20, 5);
  for (auto solver : {sg_ht, svrg_ht, saga_ht, prox_svrg}) {
    auto a = solver(*s.problem, c, Parameter::zeros(s.problem->shape()));
    auto b = solver(*s.problem, c, Parameter::zeros(s.problem->shape()));
    CHECK(a.checkpoints == b.checkpoints);
    CHECK(a.final_parameter.values() == b.final_parameter.values());
  }
  auto a = svrg_ht(*s.problem, c, Parameter::zeros(s.problem->shape()));
  c.seed = 18;
  CHECK(svrg_ht(*s.problem, c, Parameter::zeros(s.problem->shape())).final_parameter.values() !=
        a.final_parameter.values());
}

TEST_CASE("pass accounting") {
  auto s = small_instance(1.0, 8);
  const double n = static_cast<double>(s.problem->num_components());
  auto c = basic(0.05, 20, 4);
  auto svrg = svrg_ht(*s.problem, c, Parameter::zeros(s.problem->shape()));
  REQUIRE(svrg.checkpoints.size() == 5);
  for (std::size_t j = 0; j < 5; ++j) CHECK(svrg.checkpoints[j].passes == doctest::Approx(2.0 * static_cast<double>(j)));
  CHECK(svrg.checkpoints.front().relative_objective == 1.0);

  c.inner_length = 5;
  auto half = svrg_ht(*s.problem, c, Parameter::zeros(s.problem->shape()));
  CHECK(half.checkpoints[1].passes == doctest::Approx(1.0 + 5.0 / n));

  for (auto solver : {fg_ht, sg_ht, svrg_ht, saga_ht, prox_svrg}) {
    auto t = solver(*s.problem, c, Parameter::zeros(s.problem->shape()));
    CHECK(t.final_passes ==
          doctest::Approx(static_cast<double>(t.full_gradient_evals) + static_cast<double>(t.stochastic_steps) / n)
              .epsilon(1e-12));
    for (std::size_t j = 1; j < t.checkpoints.size(); ++j)
      CHECK(t.checkpoints[j].passes > t.checkpoints[j - 1].passes);
  }
  auto sg = sg_ht(*s.problem, c, Parameter::zeros(s.problem->shape()));
  CHECK(sg.stochastic_steps == 4 * s.problem->num_components());
  CHECK(sg.final_passes == doctest::Approx(4.0));
  auto saga = saga_ht(*s.problem, c, Parameter::zeros(s.problem->shape()));
  CHECK(saga.final_passes == doctest::Approx(5.0));
}

TEST_CASE("pass budget stops every solver") {
  auto s = small_instance(1.0, 9);
  auto c = basic(0.05, 20, 0);
  c.pass_budget = 7.0;
  for (auto solver : {fg_ht, sg_ht, svrg_ht, saga_ht, prox_svrg}) {
    auto t = solver(*s.problem, c, Parameter::zeros(s.problem->shape()));
    CHECK(t.final_passes <= 7.0 + 1e-9);
    CHECK(t.final_passes >= 5.0);
  }
}

TEST_CASE("random-iterate snapshots differ from last-iterate ones but still converge") {
  auto s = small_instance(0.0, 10);
  auto c = basic(0.1, 30, 0);
  c.pass_budget = 200.0;
  auto last = svrg_ht(*s.problem, c, Parameter::zeros(s.problem->shape()));
  c.snapshot_rule = SnapshotRule::random_iterate;
  auto rnd = svrg_ht(*s.problem, c, Parameter::zeros(s.problem->shape()));
  CHECK(rnd.checkpoints[1].objective != last.checkpoints[1].objective);
  CHECK(final_error(rnd) < 1e-6);
  CHECK(final_error(last) < 1e-10);
}

TEST_CASE("without-replacement sampling visits every component once per epoch") {
  auto s = small_instance(0.0, 11);
  auto c = basic(0.1, 30, 0);
  c.pass_budget = 200.0;
  c.sampling = Sampling::without_replacement;
  CHECK(final_error(svrg_ht(*s.problem, c, Parameter::zeros(s.problem->shape()))) < 1e-10);
}

TEST_CASE("noiseless SVRG decreases geometrically") {
  auto s = small_instance(0.0, 12, 0.5);
  auto c = basic(std::ldexp(1.0, -5), 30, 0);
  c.pass_budget = 500.0;
  c.tolerance = 1e-10;
  auto t = svrg_ht(*s.problem, c, Parameter::zeros(s.problem->shape()));
  REQUIRE(t.reached_tolerance);
  for (std::size_t j = 0; j < t.checkpoints.size(); ++j) {
    for (std::size_t l = j + 1; l < t.checkpoints.size(); ++l) {
      if (t.checkpoints[l].passes < t.checkpoints[j].passes + 50.0) continue;
      CHECK(t.checkpoints[l].relative_objective <= 0.1 * t.checkpoints[j].relative_objective);
      break;
    }
  }
}

TEST_CASE("SVRG beats full gradient on passes to a tight objective") {
  auto s = small_instance(0.0, 13, 0.5);
  auto best_passes = [&](auto solver) {
    double best = INFINITY;
    for (int e = 1; e <= 8; ++e) {
      auto c = basic(std::ldexp(1.0, -e), 30, 0);
      c.pass_budget = 500.0;
      c.tolerance = 1e-10;
      try {
        auto t = solver(*s.problem, c, Parameter::zeros(s.problem->shape()));
        if (t.reached_tolerance) best = std::min(best, t.final_passes);
      } catch (const DivergenceError&) {
      }
    }
    return best;
  };
  const double svrg = best_passes(svrg_ht);
  CHECK(std::isfinite(svrg));
  CHECK(svrg < best_passes(fg_ht));
}

TEST_CASE("noisy head-to-head: SG is worse and SAGA is close to SVRG") {
  std::vector<double> sg, svrg, saga;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto s = small_instance(1.0, 100 + seed, 0.0, 400, 200, 10, 400);
    auto c = basic(std::ldexp(1.0, -7), 30, 0);
    c.pass_budget = 30.0;
    c.seed = seed;
    sg.push_back(final_error(sg_ht(*s.problem, c, Parameter::zeros(s.problem->shape()))));
    svrg.push_back(final_error(svrg_ht(*s.problem, c, Parameter::zeros(s.problem->shape()))));
    saga.push_back(final_error(saga_ht(*s.problem, c, Parameter::zeros(s.problem->shape()))));
  }
  auto med = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  CHECK(med(sg) > med(svrg));
  CHECK(med(saga) <= 2.0 * med(svrg));
}

TEST_CASE("prox-SVRG") {
  auto s = small_instance(1.0, 14);
  Eigen::VectorXd g0;
  s.problem->gradient(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.problem->dim())), g0);
  auto c = basic(0.05, s.problem->dim(), 5);
  c.l1_weight = 10.0 * g0.lpNorm<Eigen::Infinity>();
  auto t = prox_svrg(*s.problem, c, Parameter::zeros(s.problem->shape()));
  CHECK(t.final_parameter.nonzeros() == 0);
  // the objective in the trace includes the l1 term
  c.l1_weight = 0.01;
  auto u = prox_svrg(*s.problem, c, Parameter::zeros(s.problem->shape()));
  const Eigen::VectorXd& th = u.final_parameter.values();
  CHECK(u.checkpoints.back().objective == doctest::Approx(s.problem->value(th) + 0.01 * th.lpNorm<1>()).epsilon(1e-14));
}

TEST_CASE("SAGA table mean tracks the stored gradients") {
  auto s = small_instance(1.0, 15, 0.0, 60, 20, 5, 12);
  SagaTable table(*s.problem, Eigen::VectorXd::Zero(20));
  auto rng = make_stream(1, StreamTag::trial);
  Eigen::VectorXd g;
  for (int step = 0; step < 100; ++step) {
    const auto i = static_cast<std::size_t>(rng.below(12));
    s.problem->component_gradient(i, oracle::random_vector(20, static_cast<std::uint64_t>(step)), g);
    table.replace(i, g);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(20);
    for (std::size_t j = 0; j < 12; ++j) mean += table.stored(j);
    mean /= 12.0;
    CHECK((table.mean() - mean).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("divergence is reported with the iteration and step size") {
  auto s = small_instance(1.0, 16);
  auto c = basic(64.0, 20, 50);
  for (auto solver : {fg_ht, sg_ht, svrg_ht, saga_ht}) {
    try {
      solver(*s.problem, c, Parameter::zeros(s.problem->shape()));
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.step_size() == 64.0);
      CHECK(e.iteration() < 50 * s.problem->num_components());
    }
  }
}

TEST_CASE("configuration is validated") {
  auto p = isotropic(Eigen::VectorXd::Ones(3));
  const auto z = Parameter::zeros(Shape::vector(3));
  CHECK_THROWS_AS(fg_ht(p, basic(0.0, 1, 1), z), InvalidArgument);
  CHECK_THROWS_AS(fg_ht(p, basic(1.0, 0, 1), z), InvalidArgument);
  CHECK_THROWS_AS(fg_ht(p, basic(1.0, 1, 0), z), InvalidArgument);
  CHECK_THROWS_AS(fg_ht(p, basic(1.0, 1, 1), Parameter::zeros(Shape::vector(2))), InvalidArgument);
  auto c = basic(1.0, 1, 1);
  c.l1_weight = -1.0;
  CHECK_THROWS_AS(prox_svrg(p, c, z), InvalidArgument);
}

TEST_CASE("estimation error is recorded only with a ground truth") {
  auto p = isotropic(Eigen::VectorXd::Ones(3));
  auto t = fg_ht(p, basic(0.5, 2, 3), Parameter::zeros(Shape::vector(3)));
  for (const auto& cp : t.checkpoints) CHECK(!cp.estimation_error.has_value());
  p.set_ground_truth(Eigen::VectorXd::Ones(3));
  auto u = fg_ht(p, basic(0.5, 2, 3), Parameter::zeros(Shape::vector(3)));
  CHECK(u.checkpoints.front().estimation_error == 1.0);
}

}
