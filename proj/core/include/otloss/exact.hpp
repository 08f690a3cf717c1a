#ifndef OTLOSS_EXACT_HPP_
#define OTLOSS_EXACT_HPP_

#include <Eigen/Dense>

#include "otloss/measures.hpp"

namespace otloss {

// Solution of the transport linear program with an optimality certificate.
// dual_alpha is centered (entries sum to zero) and dual_beta is shifted to
// compensate, so alpha . mu + beta . nu still equals the cost.
struct ExactSolution {
  double cost = 0.0;
  TransportPlan plan;
  Eigen::VectorXd dual_alpha;
  Eigen::VectorXd dual_beta;
  // Some basic cell carries (near) zero mass.
  bool primal_degenerate = false;
  // Some nonbasic cell has (near) zero reduced cost: the optimal basis is
  // not unique and the dual solution is not either.
  bool dual_degenerate = false;
};

// Exact optimal transport between two normalized measures of equal mass.
// Transportation simplex on the complete bipartite instance; Bland's rule
// (lowest index entering and leaving) keeps pivoting deterministic and free
// of cycling on degenerate instances. Zero entries in the marginals are
// allowed and carry zero plan mass.
ExactSolution exact_transport(const DiscreteMeasure& mu,
                              const DiscreteMeasure& nu,
                              const GroundMetric& metric);

// Closed-form W1 on the line metric |i - j|: sum of absolute CDF differences.
// Independent oracle for the LP solver.
double cdf_wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

// Exact loss against a one-hot target: only one transport plan is feasible,
// so the LP value is the cost-weighted sum of the prediction entries.
double one_hot_loss(const DiscreteMeasure& h, int target, const GroundMetric& metric);

// Subgradient of the LP value with respect to its first argument: the
// optimal dual for the row constraints, centered to be tangent to the simplex.
Eigen::VectorXd dual_subgradient(const ExactSolution& solution);

}  // namespace otloss

#endif  // OTLOSS_EXACT_HPP_
