#ifndef OTLOSS_MEASURES_HPP_
#define OTLOSS_MEASURES_HPP_

#include <Eigen/Dense>
#include <vector>

namespace otloss {

// Tolerance for "sums to one" checks on normalized measures.
inline constexpr double kNormalizationTol = 1e-9;
// Tolerance for mass-balance checks between two measures.
inline constexpr double kMassBalanceTol = 1e-9;

// Pairwise label costs, entry (i, j) being the p-th power of a distance
// between labels i and j. Symmetric, nonnegative, zero diagonal. Immutable
// after construction; safe to share across threads.
class GroundMetric {
 public:
  GroundMetric(Eigen::MatrixXd costs, double power);

  int size() const { return static_cast<int>(costs_.rows()); }
  const Eigen::MatrixXd& costs() const { return costs_; }
  double power() const { return power_; }
  double max_cost() const { return max_cost_; }
  double operator()(int i, int j) const { return costs_(i, j); }

  // Same costs divided by (1 + 1e-6) * max_cost, so all entries land in
  // [0, 1) with their ordering preserved. Identity for an all-zero metric.
  GroundMetric rescaled_to_unit() const;

 private:
  Eigen::MatrixXd costs_;
  double power_ = 1.0;
  double max_cost_ = 0.0;
};

// |i - j|^p costs on the labels 0..k-1. p = 0 is handled as the 0-1 metric.
GroundMetric line_metric(int k, double p, bool rescale = false);

// 1 - delta_ij costs.
GroundMetric zero_one_metric(int k);

// ||points[i] - points[j]||_2^p costs for labels embedded in the plane.
GroundMetric euclidean_metric(const std::vector<Eigen::Vector2d>& points,
                              double p, bool rescale = false);

enum class MeasureKind { kNormalized, kUnnormalized };

// Nonnegative vector over the labels. Normalized measures live on the
// probability simplex; unnormalized ones carry arbitrary total mass
// (including zero, which the solvers reject).
class DiscreteMeasure {
 public:
  static DiscreteMeasure normalized(Eigen::VectorXd values);
  static DiscreteMeasure unnormalized(Eigen::VectorXd values);
  // Tags the vector as normalized when its entries sum to one within
  // tolerance, unnormalized otherwise.
  static DiscreteMeasure from_values(Eigen::VectorXd values);

  int size() const { return static_cast<int>(values_.size()); }
  const Eigen::VectorXd& values() const { return values_; }
  MeasureKind kind() const { return kind_; }
  bool is_normalized() const { return kind_ == MeasureKind::kNormalized; }
  double total_mass() const { return values_.sum(); }
  double operator[](int i) const { return values_(i); }

 private:
  DiscreteMeasure(Eigen::VectorXd values, MeasureKind kind);

  Eigen::VectorXd values_;
  MeasureKind kind_ = MeasureKind::kUnnormalized;
};

// Normalized measure with all mass on one label.
DiscreteMeasure one_hot(int k, int index);

// Coupling between two measures. Row and column sums are computed once and
// cached alongside the matrix.
class TransportPlan {
 public:
  explicit TransportPlan(Eigen::MatrixXd matrix);

  int size() const { return static_cast<int>(matrix_.rows()); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::VectorXd& row_marginal() const { return row_marginal_; }
  const Eigen::VectorXd& col_marginal() const { return col_marginal_; }
  double total_mass() const { return row_marginal_.sum(); }

 private:
  Eigen::MatrixXd matrix_;
  Eigen::VectorXd row_marginal_;
  Eigen::VectorXd col_marginal_;
};

}  // namespace otloss

#endif  // OTLOSS_MEASURES_HPP_
