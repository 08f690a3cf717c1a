#ifndef OTLOSS_RELAXED_HPP_
#define OTLOSS_RELAXED_HPP_

#include <Eigen/Dense>

#include "otloss/measures.hpp"

namespace otloss {

struct RelaxedConfig {
  double lambda = 50.0;   // entropic regularization strength
  double gamma_a = 1.0;   // KL penalty weight on the row (prediction) marginal
  double gamma_b = 1.0;   // KL penalty weight on the column (target) marginal
  int max_iters = 20000;
  double tol = 1e-9;      // stop when the scaling-vector residual drops below this
  double min_mass = 1e-16;
  // When positive, run exactly this many sweeps and skip the tolerance test.
  int fixed_iters = 0;
};

// Transport with soft marginals. The plan factors exactly as
// diag(u) kernel diag(v); the objective is the transport cost minus
// entropy / lambda plus both weighted generalized-KL marginal penalties.
struct RelaxedSolution {
  TransportPlan plan;
  Eigen::VectorXd u, v;
  double objective = 0.0;
  double transport_cost = 0.0;
  double kl_row = 0.0;  // gKL(plan row marginal || clamped h)
  double kl_col = 0.0;  // gKL(plan column marginal || clamped y)
  double entropy = 0.0;
  int iters_run = 0;
  double residual = 0.0;
  // The fixed-point iteration carries no convergence guarantee; set when the
  // residual failed to improve for 50 consecutive sweeps.
  bool diverged = false;
};

// Generalized KL divergence w'log(w/z) - 1'w + 1'z for nonnegative w and
// strictly positive z, with 0 log 0 = 0. Nonnegative, zero iff w = z.
double generalized_kl(const Eigen::VectorXd& w, const Eigen::VectorXd& z);

// Fixed-point iteration for the KL-relaxed transport problem. Accepts
// unnormalized measures of any positive total mass; entries are clamped up
// to cfg.min_mass. Starts from u = 1, computing the column scaling from the
// current row scaling inside each sweep.
RelaxedSolution relaxed_transport(const DiscreteMeasure& h,
                                  const DiscreteMeasure& y,
                                  const GroundMetric& metric,
                                  const RelaxedConfig& cfg);

// Gradient of the relaxed loss in its first argument:
// gamma_a * (1 - (plan row marginal) / h), with h clamped as in the solve.
Eigen::VectorXd relaxed_gradient(const RelaxedSolution& solution,
                                 const DiscreteMeasure& h, double gamma_a,
                                 double min_mass = 1e-16);

// Batched solve over columns sharing one metric; mirrors sinkhorn_batch.
// Row targets may be unnormalized. Gradient columns follow the formula above.
struct RelaxedBatchResult {
  Eigen::MatrixXd gradients;
  Eigen::RowVectorXd objectives;
  Eigen::RowVectorXd transport_costs;
  int iters_run = 0;
};

RelaxedBatchResult relaxed_batch(const Eigen::MatrixXd& h_columns,
                                 const Eigen::MatrixXd& y_columns,
                                 const GroundMetric& metric,
                                 const RelaxedConfig& cfg);

}  // namespace otloss

#endif  // OTLOSS_RELAXED_HPP_
