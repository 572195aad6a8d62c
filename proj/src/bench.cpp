#include "sht/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "sht/errors.hpp"

namespace sht {

namespace {

constexpr std::pair<SolverKind, const char*> kSolverNames[] = {
    {SolverKind::fg_ht, "fg_ht"},         {SolverKind::sg_ht, "sg_ht"},
    {SolverKind::svrg_ht, "svrg_ht"},     {SolverKind::saga_ht, "saga_ht"},
    {SolverKind::prox_svrg, "prox_svrg"}, {SolverKind::asvrg_sim, "asvrg_sim"},
    {SolverKind::asvrg, "asvrg"},
};

}  // namespace

std::string to_string(SolverKind kind) {
  for (const auto& [k, name] : kSolverNames)
    if (k == kind) return name;
  return "unknown";
}

SolverKind solver_from_string(const std::string& name) {
  for (const auto& [k, n] : kSolverNames)
    if (name == n) return k;
  throw InvalidArgument("unknown solver '" + name +
                        "' (expected fg_ht, sg_ht, svrg_ht, saga_ht, prox_svrg, asvrg_sim or asvrg)");
}

double RunOutcome::final_error() const {
  if (status != Status::ok || !trace || trace->checkpoints.empty()) return std::numeric_limits<double>::infinity();
  return trace->checkpoints.back().estimation_error.value_or(std::numeric_limits<double>::infinity());
}

std::optional<double> RunOutcome::passes_to(double tol) const {
  if (!trace) return std::nullopt;
  for (const Checkpoint& c : trace->checkpoints)
    if (c.relative_objective <= tol) return c.passes;
  return std::nullopt;
}

RunOutcome run_solver(const Problem& problem, SolverKind kind, const SolverConfig& config, const AsyncConfig& async) {
  RunOutcome out;
  const Parameter theta0 = Parameter::zeros(problem.shape());
  const auto started = std::chrono::steady_clock::now();
  try {
    switch (kind) {
      case SolverKind::fg_ht: out.trace = fg_ht(problem, config, theta0); break;
      case SolverKind::sg_ht: out.trace = sg_ht(problem, config, theta0); break;
      case SolverKind::svrg_ht: out.trace = svrg_ht(problem, config, theta0); break;
      case SolverKind::saga_ht: out.trace = saga_ht(problem, config, theta0); break;
      case SolverKind::prox_svrg: out.trace = prox_svrg(problem, config, theta0); break;
      case SolverKind::asvrg_sim: {
        AsyncConfig sim = async;
        sim.mode = AsyncMode::simulated;
        auto [trace, diag] = asvrg_ht_sim(problem, config, sim, fixed_delay(sim.max_staleness), theta0);
        out.trace = std::move(trace);
        out.diagnostics = diag;
        break;
      }
      case SolverKind::asvrg: {
        AsyncConfig threaded = async;
        threaded.mode = AsyncMode::threaded;
        auto [trace, diag] = asvrg_ht(problem, config, threaded, theta0);
        out.trace = std::move(trace);
        out.diagnostics = diag;
        break;
      }
    }
  } catch (const DivergenceError& e) {
    out.status = RunOutcome::Status::diverged;
    out.message = e.what();
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

std::string format_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string trace_csv(const IterateTrace& trace) {
  std::string out = "passes,objective,rel_objective,rel_est_error\n";
  for (const Checkpoint& c : trace.checkpoints) {
    out += format_number(c.passes);
    out += ',';
    out += format_number(c.objective);
    out += ',';
    out += format_number(c.relative_objective);
    out += ',';
    if (c.estimation_error) out += format_number(*c.estimation_error);
    out += '\n';
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  if (values.size() % 2 == 1) return values[h];
  if (std::isinf(values[h - 1]) || std::isinf(values[h])) return values[h];
  return 0.5 * (values[h - 1] + values[h]);
}

void ExperimentConfig::validate() const {
  if (solvers.empty()) throw InvalidArgument("the experiment lists no solvers");
  if (seeds.empty()) throw InvalidArgument("the experiment lists no seeds");
  for (const SolverEntry& s : solvers) {
    if (s.etas.empty()) throw InvalidArgument("solver " + to_string(s.kind) + " has an empty step-size sweep");
    if (s.kind == SolverKind::prox_svrg && s.lambdas.empty())
      throw InvalidArgument("prox_svrg needs a non-empty lambda sweep");
  }
  if (!(pass_budget > 0.0)) throw InvalidArgument("pass budget must be positive");
  if (threads == 0) throw InvalidArgument("threads must be at least 1");
  if (!instance_file) instance.validate();
}

namespace {

std::vector<double> pow2_range(const nlohmann::json& spec) {
  const auto v = spec.get<std::vector<int>>();
  if (v.size() < 2 || v.size() > 3) throw InvalidArgument("exponent ranges are [first, last] or [first, last, step]");
  const int step = v.size() == 3 ? v[2] : 1;
  if (step <= 0 || v[1] < v[0]) throw InvalidArgument("exponent ranges must be increasing with a positive step");
  std::vector<double> out;
  for (int e = v[0]; e <= v[1]; e += step) out.push_back(std::ldexp(1.0, -e));
  return out;
}

}  // namespace

ExperimentConfig experiment_from_json(const std::string& text) {
  ExperimentConfig cfg;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.contains("instance")) {
      const auto& in = j.at("instance");
      GenerationSpec& s = cfg.instance;
      s.kind = instance_kind_from_string(in.value("kind", std::string("linear")));
      s.nb = in.value("nb", s.nb);
      s.d = in.value("d", s.d);
      s.p = in.value("p", s.p);
      s.kstar = in.value("kstar", s.kstar);
      s.correlation = in.value("correlation", s.correlation);
      s.sigma = in.value("sigma", s.sigma);
      s.batches = in.value("batches", s.batches);
      s.radius_factor = in.value("radius_factor", s.radius_factor);
    }
    if (j.contains("instance_file")) cfg.instance_file = j.at("instance_file").get<std::string>();
    cfg.correlations = j.value("correlations", std::vector<double>{});
    cfg.sigmas = j.value("sigmas", std::vector<double>{});
    cfg.batch_counts = j.value("batches", std::vector<std::size_t>{});

    std::vector<double> default_etas = j.value("etas", std::vector<double>{});
    if (j.contains("eta_exponents")) default_etas = pow2_range(j.at("eta_exponents"));
    for (const auto& s : j.at("solvers")) {
      SolverEntry e;
      e.kind = solver_from_string(s.at("name").get<std::string>());
      e.etas = s.value("etas", default_etas);
      if (s.contains("eta_exponents")) e.etas = pow2_range(s.at("eta_exponents"));
      e.lambdas = s.value("lambdas", std::vector<double>{});
      if (s.contains("lambda_exponents")) e.lambdas = pow2_range(s.at("lambda_exponents"));
      e.k = s.value("k", std::size_t{0});
      e.m = s.value("m", std::size_t{0});
      e.workers = s.value("workers", std::size_t{1});
      e.block_size = s.value("block_size", std::size_t{0});
      e.max_staleness = s.value("max_staleness", std::size_t{0});
      cfg.solvers.push_back(std::move(e));
    }
    if (j.contains("seeds")) {
      cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    } else {
      const auto count = j.value("num_seeds", std::uint64_t{1});
      for (std::uint64_t s = 1; s <= count; ++s) cfg.seeds.push_back(s);
    }
    cfg.k = j.value("k", cfg.k);
    cfg.pass_budget = j.value("passes", cfg.pass_budget);
    if (j.contains("tolerance")) cfg.tolerance = j.at("tolerance").get<double>();
    cfg.stop_at_tolerance = j.value("stop_at_tolerance", false);
    cfg.trace_stride = j.value("trace_stride", 1.0);
    cfg.threads = j.value("threads", std::size_t{1});
    if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("experiment config: ") + e.what(), 0);
  }
  return cfg;
}

namespace {

struct Setting {
  double c;
  double sigma;
  std::size_t batches;
};

struct Job {
  std::size_t solver;
  double eta;
  std::optional<double> lambda;
};

struct Cell {
  double error = std::numeric_limits<double>::infinity();
  double objective = std::numeric_limits<double>::infinity();
  std::optional<double> passes_to_tol;
  double wall = 0.0;
  bool diverged = false;
};

std::string param_label(const Job& job) {
  std::string s = "eta=" + format_number(job.eta);
  if (job.lambda) s += ";lambda=" + format_number(*job.lambda);
  return s;
}

std::string run_name(const SolverEntry& solver, const Setting& setting, const Job& job, std::uint64_t seed) {
  std::string s = to_string(solver.kind) + "_n" + std::to_string(setting.batches) + "_c" + format_number(setting.c) +
                  "_sigma" + format_number(setting.sigma) + "_eta" + format_number(job.eta);
  if (job.lambda) s += "_lambda" + format_number(*job.lambda);
  return s + "_seed" + std::to_string(seed) + ".csv";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write error on " + path.string());
}

template <class F>
void parallel_for(std::size_t count, std::size_t threads, F&& body) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i; !failed.load() && (i = next.fetch_add(1)) < count;) {
      try {
        body(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    }
  };
  const std::size_t spawn = std::min(threads, count);
  if (spawn <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < spawn; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& config) {
  config.validate();

  std::optional<SyntheticInstance> fixed;
  if (config.instance_file) fixed = read_instance(*config.instance_file);

  std::vector<Setting> settings;
  const GenerationSpec& base = fixed ? fixed->spec : config.instance;
  const auto cs = config.correlations.empty() || fixed ? std::vector<double>{base.correlation} : config.correlations;
  const auto sigmas = config.sigmas.empty() || fixed ? std::vector<double>{base.sigma} : config.sigmas;
  const auto ns = config.batch_counts.empty() || fixed ? std::vector<std::size_t>{base.batches} : config.batch_counts;
  for (std::size_t n : ns)
    for (double c : cs)
      for (double s : sigmas) settings.push_back({c, s, n});

  std::vector<Job> jobs;
  for (std::size_t s = 0; s < config.solvers.size(); ++s) {
    const SolverEntry& e = config.solvers[s];
    for (double eta : e.etas) {
      if (e.kind == SolverKind::prox_svrg)
        for (double lambda : e.lambdas) jobs.push_back({s, eta, lambda});
      else
        jobs.push_back({s, eta, std::nullopt});
    }
  }

  std::optional<std::filesystem::path> trace_dir;
  if (config.out_dir) {
    trace_dir = *config.out_dir / "traces";
    std::error_code ec;
    std::filesystem::create_directories(*trace_dir, ec);
    if (ec) throw IoError("cannot create " + trace_dir->string() + ": " + ec.message());
  }

  const std::size_t seeds = config.seeds.size();
  // cells[setting][job][seed]
  std::vector<std::vector<std::vector<Cell>>> cells(settings.size(),
                                                    std::vector<std::vector<Cell>>(jobs.size(), std::vector<Cell>(seeds)));
  for (std::size_t si = 0; si < settings.size(); ++si) {
    for (std::size_t seed_i = 0; seed_i < seeds; ++seed_i) {
      const std::uint64_t seed = config.seeds[seed_i];
      SyntheticInstance instance;
      if (fixed) {
        instance = *fixed;
      } else {
        GenerationSpec spec = config.instance;
        spec.correlation = settings[si].c;
        spec.sigma = settings[si].sigma;
        spec.batches = settings[si].batches;
        spec.seed = seed;
        instance = generate_instance(spec);
      }
      const std::unique_ptr<Problem> problem = build_problem(instance);

      parallel_for(jobs.size(), config.threads, [&](std::size_t ji) {
        const Job& job = jobs[ji];
        const SolverEntry& entry = config.solvers[job.solver];
        SolverConfig sc;
        sc.step_size = job.eta;
        sc.sparsity = entry.k != 0 ? entry.k : config.k;
        sc.inner_length = entry.m;
        sc.pass_budget = config.pass_budget;
        sc.seed = seed;
        sc.l1_weight = job.lambda.value_or(0.0);
        sc.trace_stride = config.trace_stride;
        if (config.stop_at_tolerance) sc.tolerance = config.tolerance;
        AsyncConfig ac;
        ac.workers = entry.workers;
        ac.block_size = entry.block_size;
        ac.max_staleness = entry.max_staleness;
        ac.seed = seed;
        ac.delta_trials = 0;

        const RunOutcome run = run_solver(*problem, entry.kind, sc, ac);
        Cell& cell = cells[si][ji][seed_i];
        cell.diverged = run.status != RunOutcome::Status::ok;
        cell.error = run.final_error();
        if (run.trace) cell.objective = run.trace->checkpoints.back().relative_objective;
        if (config.tolerance) cell.passes_to_tol = run.passes_to(*config.tolerance);
        cell.wall = run.wall_seconds;
        if (trace_dir && run.trace)
          write_text(*trace_dir / run_name(entry, settings[si], job, seed), trace_csv(*run.trace));
      });
    }
  }

  SweepResult result;
  for (std::size_t si = 0; si < settings.size(); ++si) {
    std::vector<std::size_t> best_for(config.solvers.size(), jobs.size());
    const std::size_t offset = result.grid.size();
    for (std::size_t ji = 0; ji < jobs.size(); ++ji) {
      const Job& job = jobs[ji];
      SummaryRow row;
      row.solver = to_string(config.solvers[job.solver].kind);
      row.n = settings[si].batches;
      row.b = (fixed ? fixed->spec.nb : config.instance.nb) / row.n;
      row.c = settings[si].c;
      row.sigma = settings[si].sigma;
      row.param = param_label(job);
      row.eta = job.eta;
      row.lambda = job.lambda;
      std::vector<double> reached;
      double sum = 0.0;
      for (const Cell& cell : cells[si][ji]) {
        row.errors.push_back(cell.error);
        row.final_objectives.push_back(cell.objective);
        sum += cell.error;
        row.wall_s += cell.wall;
        row.diverged += cell.diverged;
        if (cell.passes_to_tol) reached.push_back(*cell.passes_to_tol);
      }
      row.median_err = median(row.errors);
      row.mean_err = sum / static_cast<double>(seeds);
      if (!reached.empty()) row.passes_to_tol = median(reached);
      row.status = row.diverged == 0 ? "ok" : "diverged:" + std::to_string(row.diverged);
      result.any_diverged = result.any_diverged || row.diverged > 0;

      std::size_t& best = best_for[job.solver];
      if (best == jobs.size() || row.median_err < result.grid[offset + best].median_err)
        best = ji;
      result.grid.push_back(std::move(row));
    }
    for (std::size_t s = 0; s < config.solvers.size(); ++s)
      if (best_for[s] < jobs.size()) result.best.push_back(result.grid[offset + best_for[s]]);
  }

  if (config.out_dir) {
    write_text(*config.out_dir / "summary.csv", summary_csv(result.best));
    write_text(*config.out_dir / "grid.csv", summary_csv(result.grid));
  }
  return result;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "solver,n,b,c,sigma,param,median_err,mean_err,passes_to_tol,wall_s,status\n";
  for (const SummaryRow& r : rows) {
    out += r.solver + ',' + std::to_string(r.n) + ',' + std::to_string(r.b) + ',' + format_number(r.c) + ',' +
           format_number(r.sigma) + ',' + r.param + ',' + format_number(r.median_err) + ',' +
           format_number(r.mean_err) + ',' + (r.passes_to_tol ? format_number(*r.passes_to_tol) : "") + ',' +
           format_number(r.wall_s) + ',' + r.status + '\n';
  }
  return out;
}

}  // namespace sht
