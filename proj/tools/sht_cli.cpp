// sht: generate instances, run solvers and sweeps, and run the verification
// oracles from the command line.
//
// Exit codes: 0 success, 2 usage or invalid argument, 3 divergence, 4 I/O.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sht/async.hpp"
#include "sht/bench.hpp"
#include "sht/datagen.hpp"
#include "sht/errors.hpp"
#include "sht/models.hpp"
#include "sht/verify.hpp"

namespace {

constexpr int kUsage = 2;
constexpr int kDiverged = 3;
constexpr int kIo = 4;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sht::IoError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw sht::IoError("cannot write " + path);
  out << text;
  if (!out) throw sht::IoError("write error on " + path);
}

/// Fills options the user did not pass on the command line from a JSON
/// object whose keys are the long flag names without dashes.
class JsonDefaults {
 public:
  JsonDefaults(CLI::App& app, const std::string& path) : app_(app) {
    if (path.empty()) return;
    try {
      json_ = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
      throw sht::ParseError("config " + path + ": " + e.what(), 0);
    }
  }

  template <class T>
  void fill(const std::string& key, T& target) {
    if (!json_.is_object() || !json_.contains(key) || app_.count("--" + key) > 0) return;
    try {
      target = json_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw sht::ParseError("config key '" + key + "': " + e.what(), 0);
    }
  }

 private:
  CLI::App& app_;
  nlohmann::json json_;
};

struct GenArgs {
  std::string kind = "linear";
  std::size_t nb = 1000, d = 2000, p = 1, kstar = 20, batches = 100;
  double c = 0.0, sigma = 0.0, radius_factor = 10.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
};

int cmd_gen(CLI::App& app, GenArgs& a) {
  JsonDefaults defaults(app, a.config);
  defaults.fill("kind", a.kind);
  defaults.fill("nb", a.nb);
  defaults.fill("d", a.d);
  defaults.fill("p", a.p);
  defaults.fill("kstar", a.kstar);
  defaults.fill("n", a.batches);
  defaults.fill("c", a.c);
  defaults.fill("sigma", a.sigma);
  defaults.fill("radius-factor", a.radius_factor);
  defaults.fill("seed", a.seed);
  defaults.fill("out", a.out);
  if (a.out.empty()) throw sht::InvalidArgument("gen needs --out");

  sht::GenerationSpec spec;
  spec.kind = sht::instance_kind_from_string(a.kind);
  spec.nb = a.nb;
  spec.d = a.d;
  spec.p = a.p;
  spec.kstar = a.kstar;
  spec.batches = a.batches;
  spec.correlation = a.c;
  spec.sigma = a.sigma;
  spec.radius_factor = a.radius_factor;
  spec.seed = a.seed;
  sht::write_instance(a.out, sht::generate_instance(spec));
  std::cerr << "wrote " << a.out << " and " << a.out << ".json\n";
  return 0;
}

struct SolveArgs {
  std::string instance, libsvm, libsvm_kind = "logistic";
  std::size_t dim = 0, batches = 1;
  bool pm1 = false;
  std::string solver = "svrg_ht";
  double eta = 0.0, lambda = 0.0, tau = 0.0, passes = 0.0, tolerance = 0.0, stride = 1.0;
  std::size_t k = 100, m = 0, outer = 0, workers = 1, block = 0, staleness = 0;
  std::string snapshot = "last", sampling = "with", mode = "simulated";
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
};

int cmd_solve(CLI::App& app, SolveArgs& a) {
  JsonDefaults defaults(app, a.config);
  defaults.fill("instance", a.instance);
  defaults.fill("libsvm", a.libsvm);
  defaults.fill("libsvm-kind", a.libsvm_kind);
  defaults.fill("dim", a.dim);
  defaults.fill("n", a.batches);
  defaults.fill("pm1", a.pm1);
  defaults.fill("solver", a.solver);
  defaults.fill("eta", a.eta);
  defaults.fill("lambda", a.lambda);
  defaults.fill("tau", a.tau);
  defaults.fill("passes", a.passes);
  defaults.fill("outer", a.outer);
  defaults.fill("tolerance", a.tolerance);
  defaults.fill("stride", a.stride);
  defaults.fill("k", a.k);
  defaults.fill("m", a.m);
  defaults.fill("workers", a.workers);
  defaults.fill("block", a.block);
  defaults.fill("staleness", a.staleness);
  defaults.fill("snapshot", a.snapshot);
  defaults.fill("sampling", a.sampling);
  defaults.fill("mode", a.mode);
  defaults.fill("seed", a.seed);
  defaults.fill("out", a.out);

  sht::SolverKind kind = sht::solver_from_string(a.solver);
  if (kind == sht::SolverKind::asvrg || kind == sht::SolverKind::asvrg_sim)
    kind = a.mode == "threaded" ? sht::SolverKind::asvrg : sht::SolverKind::asvrg_sim;
  if (a.mode != "simulated" && a.mode != "threaded") throw sht::InvalidArgument("--mode must be simulated or threaded");
  if (a.instance.empty() == a.libsvm.empty()) throw sht::InvalidArgument("pass exactly one of --instance or --libsvm");
  if (!(a.eta > 0.0)) throw sht::InvalidArgument("--eta must be positive");
  if (a.passes <= 0.0 && a.outer == 0) throw sht::InvalidArgument("set --passes or --outer");

  std::unique_ptr<sht::Problem> problem;
  std::optional<sht::LibsvmData> raw;
  if (!a.instance.empty()) {
    problem = sht::build_problem(sht::read_instance(a.instance));
  } else {
    raw = sht::load_libsvm(a.libsvm, a.dim == 0 ? std::nullopt : std::optional<std::size_t>(a.dim), a.pm1);
    if (a.libsvm_kind == "logistic") {
      if (!(a.tau > 0.0)) throw sht::InvalidArgument("logistic data needs --tau");
      problem = std::make_unique<sht::LogisticProblem>(sht::make_logistic({raw->design, raw->labels, a.batches, a.tau}));
    } else if (a.libsvm_kind == "linear") {
      problem = std::make_unique<sht::LeastSquaresProblem>(
          sht::make_linear_regression({raw->design, raw->labels, a.batches}));
    } else {
      throw sht::InvalidArgument("--libsvm-kind must be linear or logistic");
    }
  }

  sht::SolverConfig sc;
  sc.step_size = a.eta;
  sc.sparsity = a.k;
  sc.inner_length = a.m;
  sc.outer_budget = a.outer;
  if (a.passes > 0.0) sc.pass_budget = a.passes;
  if (a.snapshot == "random") sc.snapshot_rule = sht::SnapshotRule::random_iterate;
  else if (a.snapshot != "last") throw sht::InvalidArgument("--snapshot must be last or random");
  if (a.sampling == "without") sc.sampling = sht::Sampling::without_replacement;
  else if (a.sampling != "with") throw sht::InvalidArgument("--sampling must be with or without");
  sc.seed = a.seed;
  if (a.tau > 0.0 && a.instance.empty() == false) sc.l2_radius = a.tau;
  sc.l1_weight = a.lambda;
  sc.trace_stride = a.stride;
  if (a.tolerance > 0.0) sc.tolerance = a.tolerance;

  sht::AsyncConfig ac;
  ac.workers = a.workers;
  ac.block_size = a.block;
  ac.max_staleness = a.staleness;
  ac.seed = a.seed;

  const sht::RunOutcome run = sht::run_solver(*problem, kind, sc, ac);
  if (run.status == sht::RunOutcome::Status::diverged) {
    std::cerr << "divergence: " << run.message << "\n";
    return kDiverged;
  }
  write_output(a.out, sht::trace_csv(*run.trace));
  std::cerr << "passes " << run.trace->final_passes << ", final objective "
            << run.trace->checkpoints.back().objective << ", wall " << run.wall_seconds << " s\n";
  if (raw && a.libsvm_kind == "logistic")
    std::cerr << "training misclassification "
              << sht::misclassification_rate(raw->design, raw->labels, run.trace->final_parameter.values()) << "\n";
  if (run.diagnostics)
    std::cerr << "realized staleness " << run.diagnostics->realized_max_staleness << ", delta "
              << run.diagnostics->delta_estimate << "\n";
  return 0;
}

struct SweepArgs {
  std::string config, out;
  std::size_t threads = 0;
  double passes = 0.0;
};

int cmd_sweep(SweepArgs& a) {
  if (a.config.empty()) throw sht::InvalidArgument("sweep needs --config");
  sht::ExperimentConfig cfg = sht::experiment_from_json(read_text(a.config));
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (a.threads > 0) cfg.threads = a.threads;
  if (a.passes > 0.0) cfg.pass_budget = a.passes;
  const sht::SweepResult result = sht::run_sweep(cfg);
  std::cout << sht::summary_csv(result.best);
  return result.any_diverged ? kDiverged : 0;
}

struct VerifyArgs {
  std::string check = "all", instance, out;
  std::size_t trials = 0, max_d = 16, max_dim = 10, sparsity = 0;
  std::uint64_t seed = 0;
};

nlohmann::ordered_json lemma_json(const sht::LemmaReport& r) {
  nlohmann::ordered_json j;
  j["trials"] = r.trials;
  j["violations"] = r.violations;
  j["worst_ratio"] = r.worst_ratio;
  j["worst_case"] = r.worst_case;
  return j;
}

int cmd_verify(VerifyArgs& a) {
  nlohmann::ordered_json report;
  const bool all = a.check == "all";
  if (!all && a.check != "ht" && a.check != "svt" && a.check != "vr" && a.check != "rsc")
    throw sht::InvalidArgument("--check must be ht, svt, vr, rsc or all");
  if (all || a.check == "ht") {
    const auto r = sht::check_ht_lemma(a.trials ? a.trials : 10000, a.max_d, a.seed);
    report["ht_lemma"] = lemma_json(r);
    report["ht_lemma"]["oracle_mismatches"] = r.oracle_mismatches;
  }
  if (all || a.check == "svt") report["svt_lemma"] = lemma_json(sht::check_svt_lemma(a.trials ? a.trials : 1000, a.max_dim, a.seed));
  if (a.check == "vr" || a.check == "rsc" || (all && !a.instance.empty())) {
    if (a.instance.empty()) throw sht::InvalidArgument("--check " + a.check + " needs --instance");
    const auto problem = sht::build_problem(sht::read_instance(a.instance));
    const std::size_t s = a.sparsity ? a.sparsity : std::min<std::size_t>(problem->dim(), 20);
    const auto rsc = sht::estimate_rsc_rss(*problem, s, a.trials ? a.trials : 100, a.seed);
    if (all || a.check == "rsc") {
      auto& j = report["rsc_rss"];
      j["sparsity"] = rsc.sparsity;
      j["trials"] = rsc.trials;
      j["rho_minus"] = rsc.rho_minus;
      j["rho_plus"] = rsc.rho_plus;
      j["kappa"] = std::isfinite(rsc.kappa) ? nlohmann::ordered_json(rsc.kappa) : nlohmann::ordered_json(nullptr);
      j["status"] = rsc.status == sht::RscStatus::ok ? "ok" : "rsc-violated";
    }
    if (all || a.check == "vr") {
      const auto vr = sht::check_vr_unbiasedness(*problem, a.trials ? a.trials : 100, a.seed, rsc.rho_plus);
      auto& j = report["vr_unbiasedness"];
      j["trials"] = vr.trials;
      j["max_deviation"] = vr.max_deviation;
      if (vr.second_moment_ratio) j["second_moment_ratio"] = *vr.second_moment_ratio;
    }
  }
  write_output(a.out, report.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse hard-thresholding solvers: data generation, solving, sweeps and verification"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic instance (binary container + JSON sidecar)");
  g->add_option("--kind", gen.kind, "linear, logistic or lowrank")->capture_default_str();
  g->add_option("--nb", gen.nb, "Total samples")->capture_default_str();
  g->add_option("--d", gen.d, "Dimension (rows of the parameter for lowrank)")->capture_default_str();
  g->add_option("--p", gen.p, "Parameter columns (lowrank)")->capture_default_str();
  g->add_option("--kstar", gen.kstar, "True sparsity or rank")->capture_default_str();
  g->add_option("--n", gen.batches, "Number of batches (components)")->capture_default_str();
  g->add_option("--c", gen.c, "Equicorrelation")->capture_default_str();
  g->add_option("--sigma", gen.sigma, "Noise level")->capture_default_str();
  g->add_option("--radius-factor", gen.radius_factor, "Logistic tau as a multiple of ||theta*||")->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--out", gen.out, "Instance path");
  g->add_option("--config", gen.config, "JSON file with defaults for these flags");

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Run one solver and print its trace CSV");
  s->add_option("--instance", solve.instance, "Instance container from `gen`");
  s->add_option("--libsvm", solve.libsvm, "libsvm text file instead of an instance");
  s->add_option("--libsvm-kind", solve.libsvm_kind, "linear or logistic")->capture_default_str();
  s->add_option("--dim", solve.dim, "Declared libsvm dimension");
  s->add_flag("--pm1", solve.pm1, "Map libsvm labels -1/+1 to 0/1");
  s->add_option("--n", solve.batches, "Batches for libsvm data")->capture_default_str();
  s->add_option("--solver", solve.solver, "fg_ht, sg_ht, svrg_ht, saga_ht, prox_svrg, asvrg")->capture_default_str();
  s->add_option("--eta", solve.eta, "Step size");
  s->add_option("--k", solve.k, "Sparsity (rank for matrix problems)")->capture_default_str();
  s->add_option("--m", solve.m, "Inner loop length (0 = n)")->capture_default_str();
  s->add_option("--passes", solve.passes, "Effective-pass budget");
  s->add_option("--outer", solve.outer, "Outer budget (rounds, iterations or epochs)");
  s->add_option("--lambda", solve.lambda, "l1 weight (prox_svrg)");
  s->add_option("--tau", solve.tau, "l2 radius");
  s->add_option("--tolerance", solve.tolerance, "Stop at this relative objective");
  s->add_option("--stride", solve.stride, "Checkpoint spacing in passes (fg/sg/saga)")->capture_default_str();
  s->add_option("--snapshot", solve.snapshot, "last or random")->capture_default_str();
  s->add_option("--sampling", solve.sampling, "with or without (replacement)")->capture_default_str();
  s->add_option("--workers", solve.workers, "ASVRG workers")->capture_default_str();
  s->add_option("--mode", solve.mode, "ASVRG mode: simulated or threaded")->capture_default_str();
  s->add_option("--block", solve.block, "ASVRG block size q (0 = k)")->capture_default_str();
  s->add_option("--staleness", solve.staleness, "Simulated fixed delay")->capture_default_str();
  s->add_option("--seed", solve.seed)->capture_default_str();
  s->add_option("--out", solve.out, "Trace CSV path (default stdout)");
  s->add_option("--config", solve.config, "JSON file with defaults for these flags");

  SweepArgs sweep;
  auto* w = app.add_subcommand("sweep", "Run an experiment grid from a JSON config");
  w->add_option("--config", sweep.config, "Experiment JSON");
  w->add_option("--out", sweep.out, "Output directory (overrides the config)");
  w->add_option("--threads", sweep.threads, "Concurrent runs (overrides the config)");
  w->add_option("--passes", sweep.passes, "Pass budget (overrides the config)");

  VerifyArgs verify;
  auto* v = app.add_subcommand("verify", "Run the property oracles and print a JSON report");
  v->add_option("--check", verify.check, "ht, svt, vr, rsc or all")->capture_default_str();
  v->add_option("--trials", verify.trials, "Trials (default per check)");
  v->add_option("--max-d", verify.max_d, "Vector dimension cap (<= 16)")->capture_default_str();
  v->add_option("--max-dim", verify.max_dim, "Matrix dimension cap (<= 10)")->capture_default_str();
  v->add_option("--sparsity", verify.sparsity, "s for the RSC/RSS estimate");
  v->add_option("--instance", verify.instance, "Instance for the vr and rsc checks");
  v->add_option("--seed", verify.seed)->capture_default_str();
  v->add_option("--out", verify.out, "Report path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (g->parsed()) return cmd_gen(*g, gen);
    if (s->parsed()) return cmd_solve(*s, solve);
    if (w->parsed()) return cmd_sweep(sweep);
    if (v->parsed()) return cmd_verify(verify);
  } catch (const sht::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kDiverged;
  } catch (const sht::InvalidArgument& e) {
    std::cerr << "invalid-argument: " << e.what() << "\n";
    return kUsage;
  } catch (const sht::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kUsage;
  } catch (const sht::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsage;
}
