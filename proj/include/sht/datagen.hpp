#pragma once

// Synthetic instances (equicorrelated Gaussian designs, sparse or low-rank
// truths, linear and logistic responses), design corruption, a libsvm text
// loader, and the binary instance container.
//
// Every generator is a pure function of its arguments. Row l of a design
// draws from its own stream (seed, tag, l), so rows can be generated in
// parallel without changing the output.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "sht/models.hpp"
#include "sht/parameter.hpp"
#include "sht/problem.hpp"

namespace sht {

/// Rows i.i.d. N(0, Sigma) with unit variances and pairwise correlation c,
/// sampled as sqrt(1-c) g_lj + sqrt(c) h_l.
RowMatrix gen_equicorrelated_design(std::size_t nb, std::size_t d, double c, std::uint64_t seed);

/// Exactly kstar nonzeros at uniform positions, values uniform on (-2, 2).
Eigen::VectorXd gen_sparse_truth(std::size_t d, std::size_t kstar, std::uint64_t seed);

/// y = A theta* + sigma g.
Eigen::VectorXd gen_linear_responses(const RowMatrix& design, const Eigen::VectorXd& truth, double sigma,
                                     std::uint64_t seed);

/// y_l ~ Bernoulli(sigmoid(A_l theta*)).
Eigen::VectorXd gen_logistic_responses(const RowMatrix& design, const Eigen::VectorXd& truth, std::uint64_t seed);

struct LowRankInstance {
  LowRankData data;
  Eigen::MatrixXd truth;  // U V^T
};

/// Theta* = U V^T with U (d x kstar), V (p x kstar) entries of variance
/// 1/sqrt(kstar); standard Gaussian measurement matrices.
LowRankInstance gen_lowrank_instance(std::size_t d, std::size_t p, std::size_t kstar, std::size_t nb, double sigma,
                                     std::uint64_t seed, std::size_t batches = 1);

/// Design corruption models.
struct MissingEntries {
  double rho = 0.0;  // each entry zeroed independently with probability rho
};
struct AdditiveCorruption {
  /// Either per-column noise standard deviations (length d) or a full row
  /// covariance Sigma_W (d x d); exactly one is set.
  std::optional<Eigen::VectorXd> column_std;
  std::optional<Eigen::MatrixXd> sigma_w;
};
struct BernoulliMask {
  double keep = 1.0;  // multiplicative U_lj ~ Bernoulli(keep)
};
using CorruptionModel = std::variant<MissingEntries, AdditiveCorruption, BernoulliMask>;

RowMatrix apply_corruption(const RowMatrix& design, const CorruptionModel& model, std::uint64_t seed);

/// The correction the corrupted-quadratic builder needs for this model.
CorrectionSpec correction_for(const CorruptionModel& model, std::size_t d);

struct LibsvmData {
  RowMatrix design;
  Eigen::VectorXd labels;
};

/// Reads "label idx:val idx:val ..." lines with 1-based indices. Width is the
/// largest index seen unless `dim` is given. With `map_pm1`, labels -1/+1
/// become 0/1. Blank lines and '#' comments are skipped.
/// Throws ParseError (with line number) or IoError.
LibsvmData load_libsvm(const std::filesystem::path& path, std::optional<std::size_t> dim = std::nullopt,
                       bool map_pm1 = false);

/// Writes nonzero entries with round-trip precision.
void write_libsvm(const std::filesystem::path& path, const RowMatrix& design, const Eigen::VectorXd& labels);

enum class InstanceKind : std::uint32_t { linear = 0, logistic = 1, lowrank = 2 };

std::string to_string(InstanceKind kind);
InstanceKind instance_kind_from_string(const std::string& name);

/// Everything needed to regenerate an instance.
struct GenerationSpec {
  InstanceKind kind = InstanceKind::linear;
  std::size_t nb = 1000;
  std::size_t d = 2000;
  std::size_t p = 1;  // columns of the parameter (low-rank only)
  std::size_t kstar = 20;
  double correlation = 0.0;
  double sigma = 0.0;
  std::size_t batches = 100;
  double radius_factor = 10.0;  // logistic: tau = radius_factor * ||theta*||
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticInstance {
  GenerationSpec spec;
  /// Linear/logistic: the nb x d design. Low-rank: one vec(A_l) per row.
  RowMatrix design;
  Eigen::VectorXd responses;
  Shape shape = Shape::vector(1);
  std::optional<Eigen::VectorXd> truth;  // flattened column-major for matrices
};

SyntheticInstance generate_instance(const GenerationSpec& spec);

/// Builds the matching problem with its ground truth (and radius) attached.
std::unique_ptr<Problem> build_problem(const SyntheticInstance& instance);

/// Binary container, all integers and floats little-endian:
///   8 bytes  magic "SHTINST\0"
///   u32      version (1)
///   u32      kind (0 linear, 1 logistic, 2 low-rank)
///   u64      rows, cols          design size
///   u64      param_rows, param_cols (param_cols = 0 for vectors)
///   u64      has_truth (0 or 1)
///   f64[rows*cols]  design, row-major
///   f64[rows]       responses
///   f64[param size] truth, column-major (if present)
/// The generation spec is written beside it as <path>.json.
void write_instance(const std::filesystem::path& path, const SyntheticInstance& instance);
SyntheticInstance read_instance(const std::filesystem::path& path);

std::string spec_to_json(const GenerationSpec& spec);
GenerationSpec spec_from_json(const std::string& text);

}  // namespace sht
