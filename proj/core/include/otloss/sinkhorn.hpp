#ifndef OTLOSS_SINKHORN_HPP_
#define OTLOSS_SINKHORN_HPP_

#include <Eigen/Dense>
#include <stdexcept>

#include "otloss/measures.hpp"

namespace otloss {

struct SinkhornConfig {
  double lambda = 50.0;   // entropic regularization strength
  int max_iters = 10000;
  double tol = 1e-9;      // stop when the marginal violation drops below this
  double min_mass = 1e-16;  // clamp floor applied to zero measure entries
  // When positive, run exactly this many sweeps and skip the tolerance test.
  // Used during training, where a truncated solve is good enough.
  int fixed_iters = 0;
};

// Thrown when the direct-domain iteration hits a zero or non-finite scaling
// value. The log-domain solver handles these regimes.
struct SinkhornUnderflowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scaling state of a solve. log_u / log_v are always filled and stay finite
// in regimes where u and v themselves would overflow (log-domain solves at
// large lambda).
struct SinkhornState {
  Eigen::MatrixXd kernel;
  Eigen::VectorXd u, v;
  Eigen::VectorXd log_u, log_v;
  int iters_run = 0;
  double marginal_violation = 0.0;
};

struct SinkhornResult {
  SinkhornState state;
  TransportPlan plan;
  double smoothed_loss = 0.0;   // <T, M> - H(T) / lambda
  double transport_cost = 0.0;  // <T, M>
  double entropy = 0.0;         // H(T)
};

// exp(-lambda * M - 1), the positive kernel whose diagonal scalings sweep out
// the regularized transport solutions.
Eigen::MatrixXd entropic_kernel(const GroundMetric& metric, double lambda);

// Entropy-regularized transport between normalized measures via alternating
// diagonal scaling of the kernel. Stops on the marginal violation
// |T 1 - h|_1 + |T' 1 - y|_1 <= tol (or after cfg.fixed_iters sweeps).
SinkhornResult sinkhorn_normalized(const DiscreteMeasure& h,
                                   const DiscreteMeasure& y,
                                   const GroundMetric& metric,
                                   const SinkhornConfig& cfg);

// Same contract, computed with log-sum-exp stabilization. Usable at lambda
// values where the direct iteration under- or overflows.
SinkhornResult log_domain_sinkhorn(const DiscreteMeasure& h,
                                   const DiscreteMeasure& y,
                                   const GroundMetric& metric,
                                   const SinkhornConfig& cfg);

// Gradient of the smoothed loss with respect to the first argument:
// log(u)/lambda centered to sum to zero, i.e. tangent to the simplex.
Eigen::VectorXd sinkhorn_gradient(const SinkhornState& state, double lambda);

// Batched solve over the columns of H and Y (each column one instance, all
// sharing the kernel). Column b of `gradients` is the simplex-tangent loss
// gradient for instance b; `losses` and `transport_costs` follow suit.
// Identical results to per-column sinkhorn_normalized calls.
struct SinkhornBatchResult {
  Eigen::MatrixXd gradients;
  Eigen::RowVectorXd losses;
  Eigen::RowVectorXd transport_costs;
  int iters_run = 0;
};

SinkhornBatchResult sinkhorn_batch(const Eigen::MatrixXd& h_columns,
                                   const Eigen::MatrixXd& y_columns,
                                   const GroundMetric& metric,
                                   const SinkhornConfig& cfg);

}  // namespace otloss

#endif  // OTLOSS_SINKHORN_HPP_
