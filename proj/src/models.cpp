#include "sht/models.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "sht/errors.hpp"
#include "sht/kernels.hpp"

namespace sht {

namespace {

std::size_t batch_size_for(Eigen::Index rows, std::size_t batches) {
  if (batches == 0) throw InvalidArgument("number of batches must be positive");
  const auto total = static_cast<std::size_t>(rows);
  if (total == 0 || total % batches != 0)
    throw InvalidArgument("cannot split " + std::to_string(total) + " samples into " +
                          std::to_string(batches) + " equal batches");
  return total / batches;
}

}  // namespace

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double LogisticLoss::value(double margin, double y) {
  // softplus(z) - z == softplus(-z) avoids cancellation for positive labels.
  if (y == 1.0) return softplus(-margin);
  if (y == 0.0) return softplus(margin);
  return softplus(margin) - y * margin;
}

double LogisticLoss::derivative(double margin, double y) { return sigmoid(margin) - y; }

template <class Loss>
DesignProblem<Loss>::DesignProblem(RowMatrix design, Eigen::VectorXd responses, std::size_t batches,
                                   Shape shape)
    : Problem(shape, batches, batch_size_for(design.rows(), batches)),
      design_(std::move(design)),
      responses_(std::move(responses)) {
  if (responses_.size() != design_.rows())
    throw InvalidArgument("design has " + std::to_string(design_.rows()) + " rows but there are " +
                          std::to_string(responses_.size()) + " responses");
  if (static_cast<std::size_t>(design_.cols()) != shape.size())
    throw InvalidArgument("design width " + std::to_string(design_.cols()) +
                          " does not match parameter shape " + shape.to_string());
}

template <class Loss>
double DesignProblem<Loss>::component_value(std::size_t i, const Eigen::VectorXd& theta) const {
  const auto b = static_cast<Eigen::Index>(batch_size());
  const Eigen::Index begin = static_cast<Eigen::Index>(i) * b;
  const kernels::SupportIndex support(theta);
  double sum = 0.0;
  for (Eigen::Index l = begin; l < begin + b; ++l)
    sum += Loss::value(support.dot(design_.row(l).data(), theta), responses_[l]);
  return sum / static_cast<double>(b);
}

template <class Loss>
void DesignProblem<Loss>::component_gradient(std::size_t i, const Eigen::VectorXd& theta,
                                             Eigen::VectorXd& out) const {
  const auto b = static_cast<Eigen::Index>(batch_size());
  const Eigen::Index begin = static_cast<Eigen::Index>(i) * b;
  const kernels::SupportIndex support(theta);
  out.setZero(design_.cols());
  for (Eigen::Index l = begin; l < begin + b; ++l) {
    const double w = Loss::derivative(support.dot(design_.row(l).data(), theta), responses_[l]);
    out.noalias() += w * design_.row(l).transpose();
  }
  out /= static_cast<double>(b);
}

template <class Loss>
bool DesignProblem<Loss>::component_gradient_difference(std::size_t i, const Eigen::VectorXd& theta,
                                                        const Eigen::VectorXd& snapshot,
                                                        Eigen::VectorXd& out) const {
  const auto b = static_cast<Eigen::Index>(batch_size());
  const Eigen::Index begin = static_cast<Eigen::Index>(i) * b;
  const kernels::SupportIndex at_theta(theta);
  const kernels::SupportIndex at_snapshot(snapshot);
  out.setZero(design_.cols());
  for (Eigen::Index l = begin; l < begin + b; ++l) {
    const double* row = design_.row(l).data();
    const double w = Loss::derivative(at_theta.dot(row, theta), responses_[l]) -
                     Loss::derivative(at_snapshot.dot(row, snapshot), responses_[l]);
    if (w != 0.0) out.noalias() += w * design_.row(l).transpose();
  }
  out /= static_cast<double>(b);
  return true;
}

template <class Loss>
double DesignProblem<Loss>::value(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd z;
  kernels::omp::margins(design_, theta, z);
  double sum = 0.0;
  for (Eigen::Index l = 0; l < z.size(); ++l) sum += Loss::value(z[l], responses_[l]);
  if (!std::isfinite(sum)) return kernels::serial::mean_component_value(*this, theta);  // names the component
  return sum / static_cast<double>(design_.rows());
}

template <class Loss>
void DesignProblem<Loss>::gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& out) const {
  Eigen::VectorXd w;
  kernels::omp::margins(design_, theta, w);
  for (Eigen::Index l = 0; l < w.size(); ++l) w[l] = Loss::derivative(w[l], responses_[l]);
  kernels::omp::weighted_row_sum(design_, w, out);
  out /= static_cast<double>(design_.rows());
  if (!all_finite(out)) kernels::serial::mean_component_gradient(*this, theta, out);
}

template <class Loss>
std::optional<Eigen::MatrixXd> DesignProblem<Loss>::component_hessian(std::size_t i) const {
  if constexpr (Loss::quadratic) {
    const auto b = static_cast<Eigen::Index>(batch_size());
    const auto rows = design_.middleRows(static_cast<Eigen::Index>(i) * b, b);
    Eigen::MatrixXd h = rows.transpose() * rows;
    h /= static_cast<double>(b);
    return h;
  } else {
    (void)i;
    return std::nullopt;
  }
}

template class DesignProblem<SquaredLoss>;
template class DesignProblem<LogisticLoss>;

QuadraticProblem::QuadraticProblem(std::vector<Eigen::MatrixXd> hessians, std::vector<Eigen::VectorXd> linear)
    : Problem(Shape::vector(linear.empty() ? 1 : static_cast<std::size_t>(linear.front().size())),
              hessians.size(), 1),
      hessians_(std::move(hessians)),
      linear_(std::move(linear)) {
  if (hessians_.size() != linear_.size()) throw InvalidArgument("need one linear term per Hessian");
  const Eigen::Index d = static_cast<Eigen::Index>(dim());
  for (std::size_t i = 0; i < hessians_.size(); ++i) {
    if (hessians_[i].rows() != d || hessians_[i].cols() != d || linear_[i].size() != d)
      throw InvalidArgument("quadratic component " + std::to_string(i) + " has inconsistent size");
  }
}

double QuadraticProblem::component_value(std::size_t i, const Eigen::VectorXd& theta) const {
  return 0.5 * theta.dot(hessians_[i] * theta) - linear_[i].dot(theta);
}

void QuadraticProblem::component_gradient(std::size_t i, const Eigen::VectorXd& theta,
                                          Eigen::VectorXd& out) const {
  out.noalias() = hessians_[i] * theta;
  out -= linear_[i];
}

std::optional<Eigen::MatrixXd> QuadraticProblem::component_hessian(std::size_t i) const {
  return hessians_[i];
}

CorruptedQuadratic::CorruptedQuadratic(const RowMatrix& z, const Eigen::VectorXd& y,
                                       const CorrectionSpec& spec, std::size_t batches)
    : Problem(Shape::vector(static_cast<std::size_t>(z.cols())), batches, batch_size_for(z.rows(), batches)) {
  if (y.size() != z.rows()) throw InvalidArgument("corrupted design and responses disagree in length");
  const Eigen::Index d = z.cols();
  const auto b = static_cast<Eigen::Index>(batch_size());
  const auto n = static_cast<Eigen::Index>(batches);
  linear_.resize(d, n);

  if (const auto* missing = std::get_if<MissingData>(&spec)) {
    const double rho = missing->rho;
    if (!(rho >= 0.0 && rho < 1.0)) throw InvalidArgument("missing-data rate must lie in [0, 1)");
    z_ = z / (1.0 - rho);
    diagonal_.resize(d, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto rows = z_.middleRows(i * b, b);
      diagonal_.col(i) = rho * rows.colwise().squaredNorm().transpose() / static_cast<double>(b);
      linear_.col(i) = rows.transpose() * y.segment(i * b, b) / static_cast<double>(b);
    }
  } else if (const auto* additive = std::get_if<AdditiveNoise>(&spec)) {
    const Eigen::MatrixXd& s = additive->sigma_w;
    if (s.rows() != d || s.cols() != d) throw InvalidArgument("Sigma_W must be d x d");
    const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw InvalidArgument("Sigma_W must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale) throw InvalidArgument("Sigma_W must be positive semidefinite");
    z_ = z;
    shared_ = s;
    for (Eigen::Index i = 0; i < n; ++i)
      linear_.col(i) = z_.middleRows(i * b, b).transpose() * y.segment(i * b, b) / static_cast<double>(b);
  } else {
    const auto& mult = std::get<MultiplicativeNoise>(spec);
    if (mult.first_moment.size() != d || mult.second_moment.rows() != d || mult.second_moment.cols() != d)
      throw InvalidArgument("moment matrices must match the design width");
    if (!(mult.first_moment.array() > 0.0).all() || !(mult.second_moment.array() > 0.0).all())
      throw InvalidArgument("multiplicative-noise moments must be strictly positive entrywise");
    z_ = z;
    dense_.reserve(batches);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto rows = z_.middleRows(i * b, b);
      Eigen::MatrixXd g = rows.transpose() * rows / static_cast<double>(b);
      dense_.push_back(g.cwiseQuotient(mult.second_moment));
      linear_.col(i) = (rows.transpose() * y.segment(i * b, b) / static_cast<double>(b))
                           .cwiseQuotient(mult.first_moment);
    }
    z_.resize(0, 0);
  }
}

void CorruptedQuadratic::apply_component(std::size_t i, const Eigen::VectorXd& theta,
                                         Eigen::VectorXd& out) const {
  if (!dense_.empty()) {
    out.noalias() = dense_[i] * theta;
    return;
  }
  const auto b = static_cast<Eigen::Index>(batch_size());
  const Eigen::Index begin = static_cast<Eigen::Index>(i) * b;
  out.setZero(z_.cols());
  for (Eigen::Index l = begin; l < begin + b; ++l)
    out.noalias() += z_.row(l).dot(theta.transpose()) * z_.row(l).transpose();
  out /= static_cast<double>(b);
  if (diagonal_.size() > 0)
    out -= diagonal_.col(static_cast<Eigen::Index>(i)).cwiseProduct(theta);
  else
    out.noalias() -= shared_ * theta;
}

double CorruptedQuadratic::component_value(std::size_t i, const Eigen::VectorXd& theta) const {
  Eigen::VectorXd g;
  apply_component(i, theta, g);
  return 0.5 * theta.dot(g) - linear_.col(static_cast<Eigen::Index>(i)).dot(theta);
}

void CorruptedQuadratic::component_gradient(std::size_t i, const Eigen::VectorXd& theta,
                                            Eigen::VectorXd& out) const {
  apply_component(i, theta, out);
  out -= linear_.col(static_cast<Eigen::Index>(i));
}

std::optional<Eigen::MatrixXd> CorruptedQuadratic::component_hessian(std::size_t i) const {
  if (!dense_.empty()) return dense_[i];
  const auto b = static_cast<Eigen::Index>(batch_size());
  const auto rows = z_.middleRows(static_cast<Eigen::Index>(i) * b, b);
  Eigen::MatrixXd h = rows.transpose() * rows / static_cast<double>(b);
  if (diagonal_.size() > 0)
    h.diagonal() -= diagonal_.col(static_cast<Eigen::Index>(i));
  else
    h -= shared_;
  return h;
}

Eigen::MatrixXd CorruptedQuadratic::gamma_hat() const { return *hessian(); }

Eigen::VectorXd CorruptedQuadratic::b_hat() const { return linear_.rowwise().mean(); }

LowRankData LowRankData::from_matrices(const std::vector<Eigen::MatrixXd>& a, Eigen::VectorXd y,
                                       std::size_t batches) {
  if (a.empty()) throw InvalidArgument("need at least one measurement matrix");
  LowRankData data;
  data.rows = static_cast<std::size_t>(a.front().rows());
  data.cols = static_cast<std::size_t>(a.front().cols());
  data.measurements.resize(static_cast<Eigen::Index>(a.size()), a.front().size());
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (a[l].rows() != a.front().rows() || a[l].cols() != a.front().cols())
      throw InvalidArgument("measurement matrices must share one shape");
    data.measurements.row(static_cast<Eigen::Index>(l)) =
        Eigen::Map<const Eigen::RowVectorXd>(a[l].data(), a[l].size());
  }
  data.responses = std::move(y);
  data.batches = batches;
  return data;
}

Eigen::MatrixXd LowRankData::measurement(std::size_t l) const {
  const Eigen::RowVectorXd row = measurements.row(static_cast<Eigen::Index>(l));
  return Eigen::Map<const Eigen::MatrixXd>(row.data(), static_cast<Eigen::Index>(rows),
                                           static_cast<Eigen::Index>(cols));
}

LeastSquaresProblem make_linear_regression(LinearRegressionData data) {
  const auto d = static_cast<std::size_t>(data.design.cols());
  return LeastSquaresProblem(std::move(data.design), std::move(data.responses), data.batches, Shape::vector(d));
}

CorruptedQuadratic make_corrupted_quadratic(const RowMatrix& z, const Eigen::VectorXd& y,
                                            const CorrectionSpec& spec, std::size_t batches) {
  return CorruptedQuadratic(z, y, spec, batches);
}

LogisticProblem make_logistic(GlmData data) {
  for (Eigen::Index l = 0; l < data.labels.size(); ++l) {
    if (data.labels[l] != 0.0 && data.labels[l] != 1.0)
      throw InvalidArgument("logistic label at row " + std::to_string(l) + " is not 0 or 1");
  }
  if (!(data.radius > 0.0)) throw InvalidArgument("logistic model needs an l2 radius tau > 0");
  const auto d = static_cast<std::size_t>(data.design.cols());
  LogisticProblem problem(std::move(data.design), std::move(data.labels), data.batches, Shape::vector(d));
  problem.set_l2_radius(data.radius);
  return problem;
}

LeastSquaresProblem make_lowrank(LowRankData data) {
  if (static_cast<std::size_t>(data.measurements.cols()) != data.rows * data.cols)
    throw InvalidArgument("measurement rows must hold rows*cols entries");
  const Shape shape = Shape::matrix(data.rows, data.cols);
  return LeastSquaresProblem(std::move(data.measurements), std::move(data.responses), data.batches, shape);
}

double misclassification_rate(const RowMatrix& design, const Eigen::VectorXd& labels,
                              const Eigen::VectorXd& theta) {
  if (design.rows() == 0) throw InvalidArgument("no rows to classify");
  std::size_t errors = 0;
  for (Eigen::Index l = 0; l < design.rows(); ++l) {
    const double p = sigmoid(design.row(l).dot(theta.transpose()));
    const bool correct = (labels[l] == 1.0 && p > 0.5) || (labels[l] == 0.0 && p < 0.5);
    errors += !correct;
  }
  return static_cast<double>(errors) / static_cast<double>(design.rows());
}

}  // namespace sht
