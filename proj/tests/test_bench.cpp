#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "oracles.hpp"
#include "sht/bench.hpp"
#include "sht/datagen.hpp"
#include "sht/errors.hpp"
#include "sht/metrics.hpp"
#include "sht/models.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("sht_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

sht::LeastSquaresProblem small_ls(std::uint64_t seed) {
  sht::GenerationSpec g;
  g.nb = 100;
  g.d = 40;
  g.kstar = 4;
  g.batches = 10;
  g.seed = seed;
  auto inst = sht::generate_instance(g);
  return sht::make_linear_regression({inst.design, inst.responses, g.batches});
}

// Blanks the wall_s column so rows from different runs can be compared.
std::string strip_wall(const std::string& csv) {
  std::string out;
  for (const std::string& line : lines_of(csv)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (fields.size() > 9) fields[9] = "";
    for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + fields[i];
    out += '\n';
  }
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SHT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string run_cli_output(const std::string& args) {
  const std::string cmd = std::string(SHT_CLI_PATH) + " " + args + " 2>/dev/null";
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  for (std::size_t got; (got = std::fread(buf, 1, sizeof buf, pipe)) > 0;) out.append(buf, got);
  pclose(pipe);
  return out;
}

}  // namespace

TEST_SUITE("bench") {

TEST_CASE("solver names round trip") {
  for (auto k : {sht::SolverKind::fg_ht, sht::SolverKind::sg_ht, sht::SolverKind::svrg_ht, sht::SolverKind::saga_ht,
                 sht::SolverKind::prox_svrg, sht::SolverKind::asvrg_sim, sht::SolverKind::asvrg})
    CHECK(sht::solver_from_string(sht::to_string(k)) == k);
  CHECK_THROWS_AS(sht::solver_from_string("adam"), sht::InvalidArgument);
}

TEST_CASE("numbers print in shortest round-trip form") {
  CHECK(sht::format_number(0.5) == "0.5");
  CHECK(sht::format_number(1.0) == "1");
  const double x = 0.1 + 0.2;
  CHECK(std::stod(sht::format_number(x)) == x);
  CHECK(sht::format_number(1e-300) == "1e-300");
}

TEST_CASE("median") {
  CHECK(sht::median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(sht::median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(sht::median({1.0, inf, inf, 2.0}) == inf);
  CHECK_THROWS_AS(sht::median({}), sht::InvalidArgument);
}

TEST_CASE("relative estimation error") {
  const Eigen::VectorXd truth = oracle::random_vector(10, 3, 1.0);
  CHECK(sht::relative_estimation_error(truth, truth) == 0.0);
  CHECK(sht::relative_estimation_error(Eigen::VectorXd::Zero(10), truth) == doctest::Approx(1.0));
  CHECK(sht::relative_estimation_error(2.0 * truth, truth) == doctest::Approx(1.0));
  CHECK_THROWS_AS(sht::relative_estimation_error(truth, Eigen::VectorXd::Zero(10)), sht::InvalidArgument);
}

TEST_CASE("trace csv layout") {
  auto problem = small_ls(1);
  sht::SolverConfig cfg;
  cfg.step_size = 0.25;
  cfg.sparsity = 8;
  cfg.outer_budget = 3;
  const auto run = sht::run_solver(problem, sht::SolverKind::fg_ht, cfg);
  REQUIRE(run.status == sht::RunOutcome::Status::ok);
  const auto lines = lines_of(sht::trace_csv(*run.trace));
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == "passes,objective,rel_objective,rel_est_error");
  CHECK(lines[1].rfind("0,", 0) == 0);
  CHECK(lines[4].rfind("3,", 0) == 0);
  // No ground truth: the last field stays empty.
  CHECK(lines[2].back() == ',');

  problem.set_ground_truth(Eigen::VectorXd::Ones(problem.dim()));
  const auto with_truth = lines_of(sht::trace_csv(*sht::run_solver(problem, sht::SolverKind::fg_ht, cfg).trace));
  CHECK(with_truth[1].back() == '1');
}

TEST_CASE("divergence is captured") {
  auto problem = small_ls(2);
  sht::SolverConfig cfg;
  cfg.step_size = 64.0;
  cfg.sparsity = 40;
  cfg.outer_budget = 200;
  const auto run = sht::run_solver(problem, sht::SolverKind::svrg_ht, cfg);
  CHECK(run.status == sht::RunOutcome::Status::diverged);
  CHECK_FALSE(run.trace.has_value());
  CHECK(std::isinf(run.final_error()));
  CHECK_FALSE(run.message.empty());
}

TEST_CASE("passes_to reads the first qualifying checkpoint") {
  auto problem = small_ls(3);
  sht::SolverConfig cfg;
  cfg.step_size = 0.25;
  cfg.sparsity = 40;
  cfg.outer_budget = 150;
  const auto run = sht::run_solver(problem, sht::SolverKind::fg_ht, cfg);
  const auto p = run.passes_to(1e-3);
  REQUIRE(p.has_value());
  for (const auto& c : run.trace->checkpoints) {
    if (c.passes < *p) CHECK(c.relative_objective > 1e-3);
  }
  CHECK_FALSE(run.passes_to(-1.0).has_value());
}

TEST_CASE("experiment json parsing") {
  const auto cfg = sht::experiment_from_json(R"({
    "instance": {"nb": 200, "d": 50, "kstar": 5, "sigma": 0.5},
    "correlations": [0.0, 0.5],
    "batches": [10, 20],
    "eta_exponents": [2, 4],
    "solvers": [{"name": "svrg_ht"}, {"name": "prox_svrg", "lambda_exponents": [2, 6, 2], "k": 50}],
    "num_seeds": 3, "k": 12, "passes": 40, "tolerance": 1e-6, "threads": 2
  })");
  CHECK(cfg.instance.nb == 200);
  CHECK(cfg.instance.d == 50);
  CHECK(cfg.instance.sigma == 0.5);
  CHECK(cfg.correlations == std::vector<double>{0.0, 0.5});
  CHECK(cfg.batch_counts == std::vector<std::size_t>{10, 20});
  REQUIRE(cfg.solvers.size() == 2);
  CHECK(cfg.solvers[0].etas == std::vector<double>{0.25, 0.125, 0.0625});
  CHECK(cfg.solvers[1].lambdas == std::vector<double>{0.25, 0.0625, 0.015625});
  CHECK(cfg.solvers[1].k == 50);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(cfg.k == 12);
  CHECK(cfg.pass_budget == 40.0);
  CHECK(cfg.tolerance == 1e-6);
  CHECK(cfg.threads == 2);

  CHECK_THROWS_AS(sht::experiment_from_json("{not json"), sht::ParseError);
  CHECK_THROWS_AS(sht::experiment_from_json(R"({"solvers": [{"name": 3}]})"), sht::ParseError);
  CHECK_THROWS_AS(sht::experiment_from_json(R"({"solvers": [{"name": "newton"}]})"), sht::InvalidArgument);
}

TEST_CASE("validation rejects empty grids") {
  sht::ExperimentConfig cfg;
  cfg.seeds = {1};
  CHECK_THROWS_AS(cfg.validate(), sht::InvalidArgument);
  CHECK_THROWS_AS(sht::run_sweep(cfg), sht::InvalidArgument);
  cfg.solvers.push_back({});
  cfg.solvers[0].etas = {0.1};
  cfg.seeds.clear();
  CHECK_THROWS_AS(cfg.validate(), sht::InvalidArgument);
}

TEST_CASE("sweep outputs and thread independence") {
  sht::ExperimentConfig cfg;
  cfg.instance.nb = 120;
  cfg.instance.d = 60;
  cfg.instance.kstar = 4;
  cfg.instance.batches = 12;
  cfg.instance.sigma = 0.3;
  cfg.correlations = {0.0, 0.5};
  cfg.k = 10;
  cfg.pass_budget = 12;
  cfg.seeds = {1, 2, 3};
  sht::SolverEntry svrg;
  svrg.kind = sht::SolverKind::svrg_ht;
  svrg.etas = {0.0625, 0.015625};
  sht::SolverEntry sg;
  sg.kind = sht::SolverKind::sg_ht;
  sg.etas = {0.03125};
  sht::SolverEntry prox;
  prox.kind = sht::SolverKind::prox_svrg;
  prox.etas = {0.0625};
  prox.lambdas = {0.001, 0.01};
  cfg.solvers = {svrg, sg, prox};

  const fs::path a = scratch("sweep_a");
  const fs::path b = scratch("sweep_b");
  cfg.out_dir = a;
  cfg.threads = 1;
  const auto r1 = sht::run_sweep(cfg);
  cfg.out_dir = b;
  cfg.threads = 4;
  const auto r4 = sht::run_sweep(cfg);

  // 2 settings x (2 + 1 + 2) parameter cells.
  CHECK(r1.grid.size() == 10);
  CHECK(r1.best.size() == 6);
  CHECK(strip_wall(slurp(a / "summary.csv")) == strip_wall(slurp(b / "summary.csv")));
  CHECK(strip_wall(slurp(a / "grid.csv")) == strip_wall(slurp(b / "grid.csv")));

  std::size_t traces = 0;
  for (const auto& entry : fs::directory_iterator(a / "traces")) {
    ++traces;
    CHECK(slurp(entry.path()) == slurp(b / "traces" / entry.path().filename()));
  }
  CHECK(traces == 30);
  CHECK(fs::exists(a / "traces" / "svrg_ht_n12_c0.5_sigma0.3_eta0.0625_seed2.csv"));

  for (const auto& best : r1.best) {
    for (const auto& row : r1.grid) {
      if (row.solver == best.solver && row.c == best.c) CHECK(best.median_err <= row.median_err);
    }
    CHECK(best.errors.size() == 3);
    CHECK(best.median_err == sht::median(best.errors));
  }

  // The summary medians agree with the final errors in the traces.
  for (const auto& row : r1.grid) {
    if (row.solver != "svrg_ht" || row.eta != 0.0625 || row.c != 0.0) continue;
    std::vector<double> finals;
    for (int seed = 1; seed <= 3; ++seed) {
      const auto lines = lines_of(slurp(a / "traces" /
                                        ("svrg_ht_n12_c0_sigma0.3_eta0.0625_seed" + std::to_string(seed) + ".csv")));
      finals.push_back(std::stod(lines.back().substr(lines.back().rfind(',') + 1)));
    }
    CHECK(sht::median(finals) == row.median_err);
  }

  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("summary header") {
  CHECK(lines_of(sht::summary_csv({}))[0] ==
        "solver,n,b,c,sigma,param,median_err,mean_err,passes_to_tol,wall_s,status");
}

}  // TEST_SUITE

TEST_SUITE("cli") {

TEST_CASE("gen is deterministic and echoes its spec") {
  const fs::path dir = scratch("cli_gen");
  const std::string one = (dir / "one.bin").string();
  const std::string two = (dir / "two.bin").string();
  REQUIRE(run_cli("gen --seed 7 --out " + one) == 0);
  REQUIRE(run_cli("gen --seed 7 --out " + two) == 0);
  CHECK(slurp(one) == slurp(two));
  CHECK(slurp(one + ".json") == slurp(two + ".json"));

  const auto spec = sht::spec_from_json(slurp(one + ".json"));
  CHECK(spec.nb == 1000);
  CHECK(spec.d == 2000);
  CHECK(spec.kstar == 20);
  CHECK(spec.seed == 7);

  const auto inst = sht::read_instance(one);
  CHECK(inst.design.rows() == 1000);
  CHECK(inst.design.cols() == 2000);
  fs::remove_all(dir);
}

TEST_CASE("usage errors exit with 2") {
  const fs::path dir = scratch("cli_usage");
  CHECK(run_cli("gen --d 10 --kstar 20 --out " + (dir / "x.bin").string()) == 2);
  CHECK(run_cli("gen") == 2);
  CHECK(run_cli("frobnicate") == 2);
  REQUIRE(run_cli("gen --nb 60 --d 30 --kstar 3 --n 6 --out " + (dir / "s.bin").string()) == 0);
  CHECK(run_cli("solve --instance " + (dir / "s.bin").string() + " --solver adam --eta 0.1 --passes 2") == 2);
  CHECK(run_cli("solve --instance " + (dir / "missing.bin").string() + " --eta 0.1 --passes 2") == 4);
  fs::remove_all(dir);
}

TEST_CASE("solve traces follow the checkpoint cadence") {
  const fs::path dir = scratch("cli_solve");
  const std::string inst = (dir / "s.bin").string();
  REQUIRE(run_cli("gen --nb 200 --d 80 --kstar 5 --n 20 --sigma 0.1 --out " + inst) == 0);

  const auto fg = lines_of(run_cli_output("solve --instance " + inst + " --solver fg_ht --eta 0.25 --k 10 --passes 10"));
  REQUIRE(fg.size() == 12);
  for (std::size_t i = 1; i < fg.size(); ++i)
    CHECK(std::stod(fg[i].substr(0, fg[i].find(','))) == static_cast<double>(i - 1));

  const auto svrg =
      lines_of(run_cli_output("solve --instance " + inst + " --solver svrg_ht --eta 0.25 --k 10 --passes 10"));
  REQUIRE(svrg.size() == 7);
  for (std::size_t i = 1; i < svrg.size(); ++i)
    CHECK(std::stod(svrg[i].substr(0, svrg[i].find(','))) == 2.0 * static_cast<double>(i - 1));

  CHECK(run_cli("solve --instance " + inst + " --solver svrg_ht --eta 100 --k 80 --passes 400") == 3);
  fs::remove_all(dir);
}

TEST_CASE("verify prints a json report") {
  const std::string out = run_cli_output("verify --check ht --trials 200 --max-d 8");
  CHECK(out.find("\"ht_lemma\"") != std::string::npos);
  CHECK(out.find("\"violations\": 0") != std::string::npos);
}

}  // TEST_SUITE
