#include "otloss/measures.hpp"

#include <cmath>
#include <stdexcept>

namespace otloss {

namespace {

// Supremum maps strictly below 1 under rescaling.
constexpr double kRescaleHeadroom = 1e-6;

void check_cost_matrix(const Eigen::MatrixXd& costs) {
  if (costs.rows() == 0 || costs.rows() != costs.cols()) {
    throw std::invalid_argument("GroundMetric: costs must be square and nonempty");
  }
  for (Eigen::Index i = 0; i < costs.rows(); ++i) {
    if (costs(i, i) != 0.0) {
      throw std::invalid_argument("GroundMetric: diagonal entries must be zero");
    }
    for (Eigen::Index j = 0; j < costs.cols(); ++j) {
      const double c = costs(i, j);
      if (!(c >= 0.0) || !std::isfinite(c)) {
        throw std::invalid_argument("GroundMetric: entries must be finite and nonnegative");
      }
      if (costs(i, j) != costs(j, i)) {
        throw std::invalid_argument("GroundMetric: costs must be symmetric");
      }
    }
  }
}

}  // namespace

GroundMetric::GroundMetric(Eigen::MatrixXd costs, double power)
    : costs_(std::move(costs)), power_(power) {
  check_cost_matrix(costs_);
  if (!(power_ >= 0.0)) {
    throw std::invalid_argument("GroundMetric: power must be nonnegative");
  }
  max_cost_ = costs_.maxCoeff();
}

GroundMetric GroundMetric::rescaled_to_unit() const {
  if (max_cost_ == 0.0) return *this;
  const double scale = (1.0 + kRescaleHeadroom) * max_cost_;
  return GroundMetric(costs_ / scale, power_);
}

GroundMetric line_metric(int k, double p, bool rescale) {
  if (k < 1) throw std::invalid_argument("line_metric: k must be positive");
  if (p == 0.0) return zero_one_metric(k);
  if (p < 0.0) throw std::invalid_argument("line_metric: p must be nonnegative");
  Eigen::MatrixXd costs(k, k);
  for (int i = 0; i < k; ++i) {
    costs(i, i) = 0.0;
    for (int j = i + 1; j < k; ++j) {
      const double c = std::pow(static_cast<double>(j - i), p);
      costs(i, j) = c;
      costs(j, i) = c;
    }
  }
  GroundMetric metric(std::move(costs), p);
  return rescale ? metric.rescaled_to_unit() : metric;
}

GroundMetric zero_one_metric(int k) {
  if (k < 1) throw std::invalid_argument("zero_one_metric: k must be positive");
  Eigen::MatrixXd costs = Eigen::MatrixXd::Ones(k, k);
  costs.diagonal().setZero();
  return GroundMetric(std::move(costs), 1.0);
}

GroundMetric euclidean_metric(const std::vector<Eigen::Vector2d>& points,
                              double p, bool rescale) {
  if (points.empty()) throw std::invalid_argument("euclidean_metric: empty point list");
  if (p < 1.0) throw std::invalid_argument("euclidean_metric: p must be at least 1");
  const int k = static_cast<int>(points.size());
  Eigen::MatrixXd costs(k, k);
  for (int i = 0; i < k; ++i) {
    costs(i, i) = 0.0;
    for (int j = i + 1; j < k; ++j) {
      const double d = (points[i] - points[j]).norm();
      const double c = (p == 1.0) ? d : std::pow(d, p);
      costs(i, j) = c;
      costs(j, i) = c;
    }
  }
  GroundMetric metric(std::move(costs), p);
  return rescale ? metric.rescaled_to_unit() : metric;
}

DiscreteMeasure::DiscreteMeasure(Eigen::VectorXd values, MeasureKind kind)
    : values_(std::move(values)), kind_(kind) {
  if (values_.size() == 0) {
    throw std::invalid_argument("DiscreteMeasure: empty value vector");
  }
  for (Eigen::Index i = 0; i < values_.size(); ++i) {
    if (!(values_(i) >= 0.0) || !std::isfinite(values_(i))) {
      throw std::invalid_argument("DiscreteMeasure: entries must be finite and nonnegative");
    }
  }
  if (kind_ == MeasureKind::kNormalized &&
      std::abs(values_.sum() - 1.0) > kNormalizationTol) {
    throw std::invalid_argument("DiscreteMeasure: normalized measure must sum to one");
  }
}

DiscreteMeasure DiscreteMeasure::normalized(Eigen::VectorXd values) {
  return DiscreteMeasure(std::move(values), MeasureKind::kNormalized);
}

DiscreteMeasure DiscreteMeasure::unnormalized(Eigen::VectorXd values) {
  return DiscreteMeasure(std::move(values), MeasureKind::kUnnormalized);
}

DiscreteMeasure DiscreteMeasure::from_values(Eigen::VectorXd values) {
  const double sum = values.sum();
  const MeasureKind kind = std::abs(sum - 1.0) <= kNormalizationTol
                               ? MeasureKind::kNormalized
                               : MeasureKind::kUnnormalized;
  return DiscreteMeasure(std::move(values), kind);
}

DiscreteMeasure one_hot(int k, int index) {
  if (k < 1) throw std::invalid_argument("one_hot: k must be positive");
  if (index < 0 || index >= k) throw std::out_of_range("one_hot: index out of range");
  Eigen::VectorXd values = Eigen::VectorXd::Zero(k);
  values(index) = 1.0;
  return DiscreteMeasure::normalized(std::move(values));
}

TransportPlan::TransportPlan(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() == 0 || matrix_.rows() != matrix_.cols()) {
    throw std::invalid_argument("TransportPlan: matrix must be square and nonempty");
  }
  if ((matrix_.array() < 0.0).any() || !matrix_.allFinite()) {
    throw std::invalid_argument("TransportPlan: entries must be finite and nonnegative");
  }
  row_marginal_ = matrix_.rowwise().sum();
  col_marginal_ = matrix_.colwise().sum().transpose();
}

}  // namespace otloss
