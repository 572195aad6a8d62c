#include "sht/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sht/errors.hpp"
#include "sht/problem.hpp"

namespace sht::kernels {

namespace {

[[noreturn]] void throw_non_finite(std::size_t i, const char* what) {
  throw NumericError("component " + std::to_string(i) + " produced a non-finite " + what);
}

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

}  // namespace

SupportIndex::SupportIndex(const Eigen::VectorXd& theta) {
  for (Eigen::Index j = 0; j < theta.size(); ++j)
    if (theta[j] != 0.0) nonzero_.push_back(j);
  sparse_ = 4 * nonzero_.size() <= static_cast<std::size_t>(theta.size());
}

double SupportIndex::dot(const double* row, const Eigen::VectorXd& theta) const {
  if (!sparse_) return Eigen::Map<const Eigen::VectorXd>(row, theta.size()).dot(theta);
  double sum = 0.0;
  for (Eigen::Index j : nonzero_) sum += row[j] * theta[j];
  return sum;
}

namespace serial {

double mean_component_value(const Problem& problem, const Eigen::VectorXd& theta) {
  double sum = 0.0;
  for (std::size_t i = 0; i < problem.num_components(); ++i) {
    const double v = problem.component_value(i, theta);
    if (!std::isfinite(v)) throw_non_finite(i, "value");
    sum += v;
  }
  return sum / static_cast<double>(problem.num_components());
}

void mean_component_gradient(const Problem& problem, const Eigen::VectorXd& theta,
                             Eigen::VectorXd& out) {
  Eigen::VectorXd g;
  problem.component_gradient(0, theta, out);
  if (!all_finite(out)) throw_non_finite(0, "gradient");
  for (std::size_t i = 1; i < problem.num_components(); ++i) {
    problem.component_gradient(i, theta, g);
    if (!all_finite(g)) throw_non_finite(i, "gradient");
    out += g;
  }
  out /= static_cast<double>(problem.num_components());
}

void margins(const RowMatrix& a, const Eigen::VectorXd& theta, Eigen::VectorXd& z) {
  const SupportIndex support(theta);
  z.resize(a.rows());
  for (Eigen::Index l = 0; l < a.rows(); ++l) z[l] = support.dot(a.row(l).data(), theta);
}

void weighted_row_sum(const RowMatrix& a, const Eigen::VectorXd& w, Eigen::VectorXd& out) {
  out.setZero(a.cols());
  for (Eigen::Index l = 0; l < a.rows(); ++l) out.noalias() += w[l] * a.row(l).transpose();
}

}  // namespace serial

namespace omp {

double mean_component_value(const Problem& problem, const Eigen::VectorXd& theta) {
  const std::size_t n = problem.num_components();
  const std::size_t chunks = (n + kComponentChunk - 1) / kComponentChunk;
  std::vector<double> partial(chunks, 0.0);
  std::vector<std::size_t> bad(chunks, kNone);

#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t end = std::min(n, (c + 1) * kComponentChunk);
    double s = 0.0;
    for (std::size_t i = c * kComponentChunk; i < end; ++i) {
      const double v = problem.component_value(i, theta);
      if (!std::isfinite(v) && bad[c] == kNone) bad[c] = i;
      s += v;
    }
    partial[c] = s;
  }

  double sum = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    if (bad[c] != kNone) throw_non_finite(bad[c], "value");
    sum += partial[c];
  }
  return sum / static_cast<double>(n);
}

void mean_component_gradient(const Problem& problem, const Eigen::VectorXd& theta,
                             Eigen::VectorXd& out) {
  const std::size_t n = problem.num_components();
  const auto d = static_cast<Eigen::Index>(problem.dim());
  const std::size_t chunks = (n + kComponentChunk - 1) / kComponentChunk;
  Eigen::MatrixXd partial(d, static_cast<Eigen::Index>(chunks));
  std::vector<std::size_t> bad(chunks, kNone);

#pragma omp parallel
  {
    Eigen::VectorXd g;
#pragma omp for schedule(static)
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t begin = c * kComponentChunk;
      const std::size_t end = std::min(n, begin + kComponentChunk);
      auto col = partial.col(static_cast<Eigen::Index>(c));
      for (std::size_t i = begin; i < end; ++i) {
        problem.component_gradient(i, theta, g);
        if (bad[c] == kNone && !all_finite(g)) bad[c] = i;
        if (i == begin)
          col = g;
        else
          col += g;
      }
    }
  }

  for (std::size_t c = 0; c < chunks; ++c)
    if (bad[c] != kNone) throw_non_finite(bad[c], "gradient");
  out = partial.col(0);
  for (std::size_t c = 1; c < chunks; ++c) out += partial.col(static_cast<Eigen::Index>(c));
  out /= static_cast<double>(n);
}

void margins(const RowMatrix& a, const Eigen::VectorXd& theta, Eigen::VectorXd& z) {
  const SupportIndex support(theta);
  z.resize(a.rows());
#pragma omp parallel for schedule(static)
  for (Eigen::Index l = 0; l < a.rows(); ++l) z[l] = support.dot(a.row(l).data(), theta);
}

void weighted_row_sum(const RowMatrix& a, const Eigen::VectorXd& w, Eigen::VectorXd& out) {
  out.setZero(a.cols());
  const Eigen::Index blocks = (a.cols() + kColumnBlock - 1) / kColumnBlock;
#pragma omp parallel for schedule(static)
  for (Eigen::Index blk = 0; blk < blocks; ++blk) {
    const Eigen::Index begin = blk * kColumnBlock;
    const Eigen::Index width = std::min(kColumnBlock, a.cols() - begin);
    auto seg = out.segment(begin, width);
    for (Eigen::Index l = 0; l < a.rows(); ++l)
      seg.noalias() += w[l] * a.row(l).segment(begin, width).transpose();
  }
}

}  // namespace omp

}  // namespace sht::kernels
