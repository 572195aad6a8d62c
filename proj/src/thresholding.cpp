#include "sht/thresholding.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "sht/errors.hpp"

namespace sht {

void hard_threshold_inplace(Eigen::VectorXd& v, std::size_t k, std::vector<double>& scratch) {
  if (k == 0) throw InvalidArgument("hard thresholding needs k >= 1");
  const auto d = static_cast<std::size_t>(v.size());
  scratch.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double a = std::abs(v[static_cast<Eigen::Index>(j)]);
    if (!std::isfinite(a)) throw NumericError("hard thresholding received a non-finite entry");
    scratch[j] = a;
  }
  if (k >= d) return;

  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1), scratch.end(),
                   std::greater<>());
  const double cut = scratch[k - 1];

  std::size_t above = 0;
  for (Eigen::Index j = 0; j < v.size(); ++j) above += std::abs(v[j]) > cut;
  std::size_t ties = k - above;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    const double a = std::abs(v[j]);
    if (a > cut) continue;
    if (a == cut && ties > 0) {
      --ties;
      continue;
    }
    v[j] = 0.0;
  }
}

Eigen::VectorXd hard_threshold(const Eigen::VectorXd& v, std::size_t k) {
  Eigen::VectorXd out = v;
  std::vector<double> scratch;
  hard_threshold_inplace(out, k, scratch);
  return out;
}

void l2_ball_project_inplace(Eigen::VectorXd& v, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("l2 ball radius must be positive");
  const double norm = v.norm();
  if (norm > tau) v *= tau / norm;
}

Eigen::VectorXd l2_ball_project(const Eigen::VectorXd& v, double tau) {
  Eigen::VectorXd out = v;
  l2_ball_project_inplace(out, tau);
  return out;
}

Eigen::MatrixXd svt(const Eigen::MatrixXd& m, std::size_t k) {
  if (k == 0) throw InvalidArgument("singular value thresholding needs k >= 1");
  if (!m.allFinite()) throw NumericError("singular value thresholding received a non-finite entry");
  const auto full = static_cast<std::size_t>(std::min(m.rows(), m.cols()));
  if (k >= full) return m;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericError("SVD failed on a " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                       " matrix (Frobenius norm " + std::to_string(m.norm()) + ")");
  }
  const auto r = static_cast<Eigen::Index>(k);
  return svd.matrixU().leftCols(r) * svd.singularValues().head(r).asDiagonal() *
         svd.matrixV().leftCols(r).transpose();
}

void svt_inplace(Eigen::VectorXd& flat, const Shape& shape, std::size_t k) {
  const auto rows = static_cast<Eigen::Index>(shape.rows());
  const auto cols = static_cast<Eigen::Index>(shape.cols());
  Eigen::Map<Eigen::MatrixXd> m(flat.data(), rows, cols);
  m = svt(Eigen::MatrixXd(m), k);
}

void soft_threshold_inplace(Eigen::VectorXd& v, double level) {
  if (!(level >= 0.0)) throw InvalidArgument("soft threshold level must be nonnegative");
  for (Eigen::Index j = 0; j < v.size(); ++j)
    v[j] = std::copysign(std::max(std::abs(v[j]) - level, 0.0), v[j]);
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double level) {
  Eigen::VectorXd out = v;
  soft_threshold_inplace(out, level);
  return out;
}

ThresholdSpec ThresholdSpec::hard(std::size_t k) {
  if (k == 0) throw InvalidArgument("hard threshold needs k >= 1");
  return {Kind::hard, k, 0.0, 0.0};
}

ThresholdSpec ThresholdSpec::l2ball(double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("l2 ball radius must be positive");
  return {Kind::l2ball, 0, tau, 0.0};
}

ThresholdSpec ThresholdSpec::rank(std::size_t k) {
  if (k == 0) throw InvalidArgument("rank threshold needs k >= 1");
  return {Kind::svt, k, 0.0, 0.0};
}

ThresholdSpec ThresholdSpec::soft(double level) {
  if (!(level >= 0.0)) throw InvalidArgument("soft threshold level must be nonnegative");
  return {Kind::soft, 0, 0.0, level};
}

Eigen::VectorXd apply_threshold(const ThresholdSpec& spec, const Eigen::VectorXd& values,
                                const Shape& shape) {
  switch (spec.kind) {
    case ThresholdSpec::Kind::hard:
      return hard_threshold(values, spec.k);
    case ThresholdSpec::Kind::l2ball:
      return l2_ball_project(values, spec.tau);
    case ThresholdSpec::Kind::svt: {
      if (!shape.is_matrix()) throw InvalidArgument("svt needs a matrix shape");
      Eigen::VectorXd out = values;
      svt_inplace(out, shape, spec.k);
      return out;
    }
    case ThresholdSpec::Kind::soft:
      return soft_threshold(values, spec.level);
  }
  throw InvalidArgument("unknown threshold kind");
}

}  // namespace sht
