#include "sht/datagen.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "sht/errors.hpp"
#include "sht/rng.hpp"

namespace sht {

RowMatrix gen_equicorrelated_design(std::size_t nb, std::size_t d, double c, std::uint64_t seed) {
  if (!(c >= 0.0 && c < 1.0)) throw InvalidArgument("correlation c must lie in [0, 1)");
  if (nb == 0 || d == 0) throw InvalidArgument("design dimensions must be positive");
  RowMatrix a(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(d));
  const double own = std::sqrt(1.0 - c);
  const double shared = std::sqrt(c);
  const auto rows = static_cast<std::int64_t>(nb);
#pragma omp parallel for schedule(static)
  for (std::int64_t l = 0; l < rows; ++l) {
    SplitMix64 rng = make_stream(seed, StreamTag::design, static_cast<std::uint64_t>(l));
    const double h = shared * rng.normal();
    double* row = a.row(l).data();
    for (std::size_t j = 0; j < d; ++j) row[j] = own * rng.normal() + h;
  }
  return a;
}

Eigen::VectorXd gen_sparse_truth(std::size_t d, std::size_t kstar, std::uint64_t seed) {
  if (kstar == 0 || kstar > d) throw InvalidArgument("kstar must lie in [1, d]");
  SplitMix64 rng = make_stream(seed, StreamTag::truth, 0);
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t j = 0; j < kstar; ++j) std::swap(idx[j], idx[j + rng.below(d - j)]);
  Eigen::VectorXd truth = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < kstar; ++j) {
    double v = 0.0;
    while (v == 0.0 || std::abs(v) >= 2.0) v = rng.uniform(-2.0, 2.0);
    truth[static_cast<Eigen::Index>(idx[j])] = v;
  }
  return truth;
}

namespace {

void check_product(const RowMatrix& design, const Eigen::VectorXd& truth) {
  if (design.cols() != truth.size()) throw InvalidArgument("design width does not match the truth length");
}

}  // namespace

Eigen::VectorXd gen_linear_responses(const RowMatrix& design, const Eigen::VectorXd& truth, double sigma,
                                     std::uint64_t seed) {
  check_product(design, truth);
  if (!(sigma >= 0.0)) throw InvalidArgument("sigma must be nonnegative");
  SplitMix64 rng = make_stream(seed, StreamTag::noise, 0);
  Eigen::VectorXd y(design.rows());
  for (Eigen::Index l = 0; l < design.rows(); ++l) {
    y[l] = design.row(l).dot(truth.transpose());
    if (sigma > 0.0) y[l] += sigma * rng.normal();
  }
  return y;
}

Eigen::VectorXd gen_logistic_responses(const RowMatrix& design, const Eigen::VectorXd& truth, std::uint64_t seed) {
  check_product(design, truth);
  SplitMix64 rng = make_stream(seed, StreamTag::labels, 0);
  Eigen::VectorXd y(design.rows());
  for (Eigen::Index l = 0; l < design.rows(); ++l)
    y[l] = rng.bernoulli(sigmoid(design.row(l).dot(truth.transpose()))) ? 1.0 : 0.0;
  return y;
}

LowRankInstance gen_lowrank_instance(std::size_t d, std::size_t p, std::size_t kstar, std::size_t nb, double sigma,
                                     std::uint64_t seed, std::size_t batches) {
  if (kstar == 0 || kstar > std::min(d, p)) throw InvalidArgument("kstar must lie in [1, min(d, p)]");
  if (nb == 0) throw InvalidArgument("nb must be positive");
  if (!(sigma >= 0.0)) throw InvalidArgument("sigma must be nonnegative");
  const double scale = std::pow(static_cast<double>(kstar), -0.25);
  SplitMix64 rng = make_stream(seed, StreamTag::truth, 0);
  Eigen::MatrixXd u(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(kstar));
  Eigen::MatrixXd v(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(kstar));
  for (auto& x : u.reshaped()) x = scale * rng.normal();
  for (auto& x : v.reshaped()) x = scale * rng.normal();

  LowRankInstance out;
  out.truth = u * v.transpose();
  out.data.rows = d;
  out.data.cols = p;
  out.data.batches = batches;
  out.data.measurements.resize(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(d * p));
  const auto rows = static_cast<std::int64_t>(nb);
#pragma omp parallel for schedule(static)
  for (std::int64_t l = 0; l < rows; ++l) {
    SplitMix64 r = make_stream(seed, StreamTag::measurement, static_cast<std::uint64_t>(l));
    for (auto& x : out.data.measurements.row(l)) x = r.normal();
  }
  const Eigen::VectorXd flat = out.truth.reshaped();
  out.data.responses = gen_linear_responses(out.data.measurements, flat, sigma, seed);
  return out;
}

RowMatrix apply_corruption(const RowMatrix& design, const CorruptionModel& model, std::uint64_t seed) {
  RowMatrix z = design;
  const Eigen::Index d = design.cols();
  if (const auto* missing = std::get_if<MissingEntries>(&model)) {
    if (!(missing->rho >= 0.0 && missing->rho < 1.0)) throw InvalidArgument("rho must lie in [0, 1)");
    if (missing->rho == 0.0) return z;
    for (Eigen::Index l = 0; l < z.rows(); ++l) {
      SplitMix64 rng = make_stream(seed, StreamTag::corruption, static_cast<std::uint64_t>(l));
      for (Eigen::Index j = 0; j < d; ++j)
        if (rng.bernoulli(missing->rho)) z(l, j) = 0.0;
    }
  } else if (const auto* additive = std::get_if<AdditiveCorruption>(&model)) {
    if (additive->column_std.has_value() == additive->sigma_w.has_value())
      throw InvalidArgument("additive corruption needs exactly one of column_std or sigma_w");
    Eigen::MatrixXd root;
    if (additive->column_std) {
      if (additive->column_std->size() != d) throw InvalidArgument("column_std must have one entry per column");
      if ((additive->column_std->array() < 0.0).any()) throw InvalidArgument("column_std must be nonnegative");
      root = additive->column_std->asDiagonal();
    } else {
      const Eigen::MatrixXd& s = *additive->sigma_w;
      if (s.rows() != d || s.cols() != d) throw InvalidArgument("sigma_w must be d x d");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
      if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition of sigma_w failed");
      if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff()))
        throw InvalidArgument("sigma_w must be positive semidefinite");
      const Eigen::VectorXd sq = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
      root = eig.eigenvectors() * sq.asDiagonal() * eig.eigenvectors().transpose();
    }
    if (root.isZero(0.0)) return z;
    Eigen::VectorXd g(d);
    for (Eigen::Index l = 0; l < z.rows(); ++l) {
      SplitMix64 rng = make_stream(seed, StreamTag::corruption, static_cast<std::uint64_t>(l));
      for (auto& x : g) x = rng.normal();
      z.row(l) += (root * g).transpose();
    }
  } else {
    const double keep = std::get<BernoulliMask>(model).keep;
    if (!(keep > 0.0 && keep <= 1.0)) throw InvalidArgument("keep probability must lie in (0, 1]");
    for (Eigen::Index l = 0; l < z.rows(); ++l) {
      SplitMix64 rng = make_stream(seed, StreamTag::corruption, static_cast<std::uint64_t>(l));
      for (Eigen::Index j = 0; j < d; ++j)
        if (!rng.bernoulli(keep)) z(l, j) = 0.0;
    }
  }
  return z;
}

CorrectionSpec correction_for(const CorruptionModel& model, std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  if (const auto* missing = std::get_if<MissingEntries>(&model)) return MissingData{missing->rho};
  if (const auto* additive = std::get_if<AdditiveCorruption>(&model)) {
    if (additive->sigma_w) return AdditiveNoise{*additive->sigma_w};
    if (!additive->column_std) throw InvalidArgument("additive corruption needs column_std or sigma_w");
    return AdditiveNoise{Eigen::MatrixXd(additive->column_std->array().square().matrix().asDiagonal())};
  }
  const double keep = std::get<BernoulliMask>(model).keep;
  Eigen::MatrixXd second = Eigen::MatrixXd::Constant(n, n, keep * keep);
  second.diagonal().setConstant(keep);
  return MultiplicativeNoise{Eigen::VectorXd::Constant(n, keep), second};
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_real(std::string_view token, std::size_t line, const char* what) {
  double v = 0.0;
  std::string_view digits = token;
  if (digits.size() > 1 && digits.front() == '+' && digits[1] != '-') digits.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || !std::isfinite(v))
    throw ParseError("line " + std::to_string(line) + ": bad " + what + " '" + std::string(token) + "'", line);
  return v;
}

}  // namespace

LibsvmData load_libsvm(const std::filesystem::path& path, std::optional<std::size_t> dim, bool map_pm1) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  struct Row {
    double label = 0.0;
    std::vector<std::pair<std::size_t, double>> entries;
  };
  std::vector<Row> rows;
  std::size_t width = 0;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    std::string_view view(text);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;

    Row row;
    std::unordered_set<std::size_t> seen;
    std::size_t pos = 0;
    bool first = true;
    while (pos < view.size()) {
      const std::size_t end = std::min(view.find_first_of(" \t", pos), view.size());
      const std::string_view token = view.substr(pos, end - pos);
      pos = view.find_first_not_of(" \t", end);
      if (pos == std::string_view::npos) pos = view.size();
      if (first) {
        row.label = parse_real(token, line, "label");
        if (map_pm1) {
          if (row.label == -1.0)
            row.label = 0.0;
          else if (row.label != 1.0)
            throw ParseError("line " + std::to_string(line) + ": label is not -1 or +1", line);
        }
        first = false;
        continue;
      }
      const auto colon = token.find(':');
      if (colon == std::string_view::npos)
        throw ParseError("line " + std::to_string(line) + ": expected idx:val, got '" + std::string(token) + "'", line);
      std::size_t index = 0;
      const std::string_view idx = token.substr(0, colon);
      const auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), index);
      if (ec != std::errc() || ptr != idx.data() + idx.size())
        throw ParseError("line " + std::to_string(line) + ": bad index '" + std::string(idx) + "'", line);
      if (index == 0) throw ParseError("line " + std::to_string(line) + ": indices are 1-based, got 0", line);
      if (dim && index > *dim)
        throw ParseError("line " + std::to_string(line) + ": index " + std::to_string(index) +
                             " exceeds the declared dimension " + std::to_string(*dim),
                         line);
      if (!seen.insert(index).second)
        throw ParseError("line " + std::to_string(line) + ": duplicate index " + std::to_string(index), line);
      row.entries.emplace_back(index - 1, parse_real(token.substr(colon + 1), line, "value"));
      width = std::max(width, index);
    }
    rows.push_back(std::move(row));
  }
  if (in.bad()) throw IoError("read error on " + path.string());
  if (dim) width = *dim;

  LibsvmData out;
  out.design = RowMatrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t l = 0; l < rows.size(); ++l) {
    const auto r = static_cast<Eigen::Index>(l);
    out.labels[r] = rows[l].label;
    for (const auto& [j, v] : rows[l].entries) out.design(r, static_cast<Eigen::Index>(j)) = v;
  }
  return out;
}

namespace {

void append_number(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

void write_libsvm(const std::filesystem::path& path, const RowMatrix& design, const Eigen::VectorXd& labels) {
  if (design.rows() != labels.size()) throw InvalidArgument("one label per design row is required");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  std::string line;
  for (Eigen::Index l = 0; l < design.rows(); ++l) {
    line.clear();
    append_number(line, labels[l]);
    for (Eigen::Index j = 0; j < design.cols(); ++j) {
      if (design(l, j) == 0.0) continue;
      line += ' ';
      line += std::to_string(j + 1);
      line += ':';
      append_number(line, design(l, j));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw IoError("write error on " + path.string());
}

std::string to_string(InstanceKind kind) {
  switch (kind) {
    case InstanceKind::linear: return "linear";
    case InstanceKind::logistic: return "logistic";
    case InstanceKind::lowrank: return "lowrank";
  }
  return "unknown";
}

InstanceKind instance_kind_from_string(const std::string& name) {
  if (name == "linear") return InstanceKind::linear;
  if (name == "logistic") return InstanceKind::logistic;
  if (name == "lowrank") return InstanceKind::lowrank;
  throw InvalidArgument("unknown instance kind '" + name + "' (expected linear, logistic or lowrank)");
}

void GenerationSpec::validate() const {
  if (nb == 0 || d == 0 || p == 0) throw InvalidArgument("nb, d and p must be positive");
  if (batches == 0 || nb % batches != 0)
    throw InvalidArgument("batches must divide nb exactly (nb=" + std::to_string(nb) +
                          ", batches=" + std::to_string(batches) + ")");
  const std::size_t cap = kind == InstanceKind::lowrank ? std::min(d, p) : d;
  if (kstar == 0 || kstar > cap)
    throw InvalidArgument("kstar=" + std::to_string(kstar) + " must lie in [1, " + std::to_string(cap) + "]");
  if (!(correlation >= 0.0 && correlation < 1.0)) throw InvalidArgument("correlation must lie in [0, 1)");
  if (!(sigma >= 0.0)) throw InvalidArgument("sigma must be nonnegative");
  if (kind == InstanceKind::logistic && !(radius_factor > 0.0)) throw InvalidArgument("radius factor must be positive");
}

SyntheticInstance generate_instance(const GenerationSpec& spec) {
  spec.validate();
  SyntheticInstance inst;
  inst.spec = spec;
  if (spec.kind == InstanceKind::lowrank) {
    LowRankInstance lr = gen_lowrank_instance(spec.d, spec.p, spec.kstar, spec.nb, spec.sigma, spec.seed, spec.batches);
    inst.design = std::move(lr.data.measurements);
    inst.responses = std::move(lr.data.responses);
    inst.shape = Shape::matrix(spec.d, spec.p);
    inst.truth = lr.truth.reshaped();
    return inst;
  }
  inst.design = gen_equicorrelated_design(spec.nb, spec.d, spec.correlation, spec.seed);
  inst.truth = gen_sparse_truth(spec.d, spec.kstar, spec.seed);
  inst.shape = Shape::vector(spec.d);
  inst.responses = spec.kind == InstanceKind::linear
                       ? gen_linear_responses(inst.design, *inst.truth, spec.sigma, spec.seed)
                       : gen_logistic_responses(inst.design, *inst.truth, spec.seed);
  return inst;
}

std::unique_ptr<Problem> build_problem(const SyntheticInstance& instance) {
  const GenerationSpec& spec = instance.spec;
  std::unique_ptr<Problem> problem;
  switch (spec.kind) {
    case InstanceKind::linear:
      problem = std::make_unique<LeastSquaresProblem>(
          make_linear_regression({instance.design, instance.responses, spec.batches}));
      break;
    case InstanceKind::logistic: {
      double radius = spec.radius_factor;
      if (instance.truth && instance.truth->norm() > 0.0) radius *= instance.truth->norm();
      problem = std::make_unique<LogisticProblem>(
          make_logistic({instance.design, instance.responses, spec.batches, radius}));
      break;
    }
    case InstanceKind::lowrank:
      problem = std::make_unique<LeastSquaresProblem>(make_lowrank(
          {instance.shape.rows(), instance.shape.cols(), instance.design, instance.responses, spec.batches}));
      break;
  }
  if (instance.truth) problem->set_ground_truth(*instance.truth);
  return problem;
}

namespace {

constexpr char kMagic[8] = {'S', 'H', 'T', 'I', 'N', 'S', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(std::string& out, T value) {
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((value >> (8 * b)) & 0xFF));
}

void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  Reader(std::string bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b)
      value |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += sizeof(T);
    return value;
  }

  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }

  void need(std::size_t count) const {
    if (bytes_.size() - pos_ < count) throw IoError(name_ + ": truncated instance file");
  }

  std::string_view take(std::size_t count) {
    need(count);
    std::string_view v(bytes_.data() + pos_, count);
    pos_ += count;
    return v;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  if (in.bad()) throw IoError("read error on " + path.string());
  return s.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write error on " + path.string());
}

std::filesystem::path sidecar(const std::filesystem::path& path) {
  std::filesystem::path s = path;
  s += ".json";
  return s;
}

}  // namespace

std::string spec_to_json(const GenerationSpec& spec) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(spec.kind);
  j["nb"] = spec.nb;
  j["d"] = spec.d;
  j["p"] = spec.p;
  j["kstar"] = spec.kstar;
  j["correlation"] = spec.correlation;
  j["sigma"] = spec.sigma;
  j["batches"] = spec.batches;
  j["batch_size"] = spec.nb / spec.batches;
  j["radius_factor"] = spec.radius_factor;
  j["seed"] = spec.seed;
  return j.dump(2) + "\n";
}

GenerationSpec spec_from_json(const std::string& text) {
  GenerationSpec spec;
  try {
    const auto j = nlohmann::json::parse(text);
    spec.kind = instance_kind_from_string(j.at("kind").get<std::string>());
    spec.nb = j.at("nb").get<std::size_t>();
    spec.d = j.at("d").get<std::size_t>();
    spec.p = j.value("p", std::size_t{1});
    spec.kstar = j.at("kstar").get<std::size_t>();
    spec.correlation = j.value("correlation", 0.0);
    spec.sigma = j.value("sigma", 0.0);
    spec.batches = j.at("batches").get<std::size_t>();
    spec.radius_factor = j.value("radius_factor", 10.0);
    spec.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("instance sidecar: ") + e.what(), 0);
  }
  return spec;
}

void write_instance(const std::filesystem::path& path, const SyntheticInstance& instance) {
  const bool matrix = instance.shape.is_matrix();
  std::string bytes(kMagic, kMagic + sizeof kMagic);
  put_le<std::uint32_t>(bytes, kVersion);
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(instance.spec.kind));
  put_le<std::uint64_t>(bytes, static_cast<std::uint64_t>(instance.design.rows()));
  put_le<std::uint64_t>(bytes, static_cast<std::uint64_t>(instance.design.cols()));
  put_le<std::uint64_t>(bytes, instance.shape.rows());
  put_le<std::uint64_t>(bytes, matrix ? instance.shape.cols() : 0);
  put_le<std::uint64_t>(bytes, instance.truth ? 1 : 0);
  bytes.reserve(bytes.size() + 8 * static_cast<std::size_t>(instance.design.size() + instance.responses.size()));
  for (Eigen::Index l = 0; l < instance.design.rows(); ++l)
    for (Eigen::Index j = 0; j < instance.design.cols(); ++j) put_f64(bytes, instance.design(l, j));
  for (double y : instance.responses) put_f64(bytes, y);
  if (instance.truth)
    for (double t : *instance.truth) put_f64(bytes, t);
  write_file(path, bytes);
  write_file(sidecar(path), spec_to_json(instance.spec));
}

SyntheticInstance read_instance(const std::filesystem::path& path) {
  Reader in(read_file(path), path.string());
  if (in.take(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic))
    throw IoError(path.string() + ": not an instance file (bad magic)");
  if (const auto version = in.get<std::uint32_t>(); version != kVersion)
    throw IoError(path.string() + ": unsupported container version " + std::to_string(version));
  const auto kind = in.get<std::uint32_t>();
  if (kind > 2) throw IoError(path.string() + ": unknown instance kind " + std::to_string(kind));
  const auto rows = in.get<std::uint64_t>();
  const auto cols = in.get<std::uint64_t>();
  const auto prow = in.get<std::uint64_t>();
  const auto pcol = in.get<std::uint64_t>();
  const auto has_truth = in.get<std::uint64_t>();

  SyntheticInstance inst;
  inst.spec = spec_from_json(read_file(sidecar(path)));
  if (static_cast<std::uint32_t>(inst.spec.kind) != kind) throw IoError(path.string() + ": sidecar kind mismatch");
  inst.shape = pcol == 0 ? Shape::vector(prow) : Shape::matrix(prow, pcol);
  if (inst.shape.size() != cols) throw IoError(path.string() + ": design width does not match the parameter size");
  in.need(8 * rows * cols);
  inst.design.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index l = 0; l < inst.design.rows(); ++l)
    for (Eigen::Index j = 0; j < inst.design.cols(); ++j) inst.design(l, j) = in.f64();
  inst.responses.resize(static_cast<Eigen::Index>(rows));
  for (auto& y : inst.responses) y = in.f64();
  if (has_truth) {
    Eigen::VectorXd truth(static_cast<Eigen::Index>(inst.shape.size()));
    for (auto& t : truth) t = in.f64();
    inst.truth = std::move(truth);
  }
  if (!in.done()) throw IoError(path.string() + ": trailing bytes after the instance");
  return inst;
}

}  // namespace sht
