#include "otloss/sinkhorn.hpp"

#include <cmath>
#include <stdexcept>

namespace otloss {

namespace {

constexpr double kEntropyFloor = 1e-300;

void check_config(const SinkhornConfig& cfg) {
  if (!(cfg.lambda > 0.0)) throw std::invalid_argument("sinkhorn: lambda must be positive");
  if (!(cfg.tol > 0.0)) throw std::invalid_argument("sinkhorn: tol must be positive");
  if (cfg.max_iters < 1) throw std::invalid_argument("sinkhorn: max_iters must be at least 1");
  if (!(cfg.min_mass > 0.0)) throw std::invalid_argument("sinkhorn: min_mass must be positive");
}

// Clamp zero entries up to min_mass and renormalize back onto the simplex.
Eigen::VectorXd clamp_simplex(const Eigen::VectorXd& values, double min_mass) {
  Eigen::VectorXd out = values.cwiseMax(min_mass);
  return out / out.sum();
}

void check_positive_finite(const Eigen::VectorXd& vec, const char* what) {
  if (!vec.allFinite() || (vec.array() <= 0.0).any()) {
    throw SinkhornUnderflowError(
        std::string("sinkhorn: ") + what +
        " underflowed or overflowed; use the log-domain solver");
  }
}

double entropy_of_plan(const Eigen::MatrixXd& plan) {
  return -(plan.array() * plan.array().max(kEntropyFloor).log()).sum();
}

}  // namespace

Eigen::MatrixXd entropic_kernel(const GroundMetric& metric, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("entropic_kernel: lambda must be positive");
  return (-lambda * metric.costs().array() - 1.0).exp();
}

SinkhornResult sinkhorn_normalized(const DiscreteMeasure& h,
                                   const DiscreteMeasure& y,
                                   const GroundMetric& metric,
                                   const SinkhornConfig& cfg) {
  check_config(cfg);
  const int k = metric.size();
  if (h.size() != k || y.size() != k) {
    throw std::invalid_argument("sinkhorn_normalized: dimension mismatch");
  }
  if (!h.is_normalized() || !y.is_normalized()) {
    throw std::invalid_argument("sinkhorn_normalized: inputs must be normalized measures");
  }

  const Eigen::VectorXd target_row = clamp_simplex(h.values(), cfg.min_mass);
  const Eigen::VectorXd target_col = clamp_simplex(y.values(), cfg.min_mass);
  Eigen::MatrixXd kernel = entropic_kernel(metric, cfg.lambda);
  if ((kernel.rowwise().maxCoeff().array() <= 0.0).any()) {
    throw SinkhornUnderflowError(
        "sinkhorn: kernel row underflowed to zero; use the log-domain solver");
  }

  Eigen::VectorXd u = Eigen::VectorXd::Ones(k);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(k);
  Eigen::VectorXd kernel_t_u = kernel.transpose() * u;
  int iters = 0;
  while (true) {
    check_positive_finite(kernel_t_u, "column scaling denominator");
    v = target_col.cwiseQuotient(kernel_t_u);
    Eigen::VectorXd kernel_v = kernel * v;
    check_positive_finite(kernel_v, "row scaling denominator");
    u = target_row.cwiseQuotient(kernel_v);
    check_positive_finite(u, "row scaling");
    kernel_t_u.noalias() = kernel.transpose() * u;
    ++iters;
    const double violation =
        (u.cwiseProduct(kernel_v) - target_row).lpNorm<1>() +
        (v.cwiseProduct(kernel_t_u) - target_col).lpNorm<1>();
    if (cfg.fixed_iters > 0 ? iters >= cfg.fixed_iters
                            : (violation <= cfg.tol || iters >= cfg.max_iters)) {
      break;
    }
  }

  // Column scaling recomputed from the final u, so the column marginal is
  // met exactly and the residual sits entirely on the row side.
  v = target_col.cwiseQuotient(kernel_t_u);
  Eigen::MatrixXd plan_matrix = u.asDiagonal() * kernel * v.asDiagonal();
  const double transport_cost = (plan_matrix.array() * metric.costs().array()).sum();
  const double entropy = entropy_of_plan(plan_matrix);

  SinkhornState state;
  state.kernel = std::move(kernel);
  state.u = u;
  state.v = v;
  state.log_u = u.array().log();
  state.log_v = v.array().log();
  state.iters_run = iters;
  state.marginal_violation =
      (u.cwiseProduct(state.kernel * v) - target_row).lpNorm<1>() +
      (v.cwiseProduct(state.kernel.transpose() * u) - target_col).lpNorm<1>();

  return SinkhornResult{std::move(state), TransportPlan(std::move(plan_matrix)),
                        transport_cost - entropy / cfg.lambda, transport_cost,
                        entropy};
}

namespace {

// Column-wise log-sum-exp of (log_kernel + f 1^T), i.e. the log of
// K^T exp(f) evaluated stably.
Eigen::VectorXd lse_cols(const Eigen::MatrixXd& log_kernel, const Eigen::VectorXd& f) {
  Eigen::MatrixXd shifted = log_kernel.colwise() + f;
  Eigen::VectorXd peak = shifted.colwise().maxCoeff().transpose();
  Eigen::VectorXd out(log_kernel.cols());
  for (Eigen::Index j = 0; j < log_kernel.cols(); ++j) {
    out(j) = peak(j) + std::log((shifted.col(j).array() - peak(j)).exp().sum());
  }
  return out;
}

Eigen::VectorXd lse_rows(const Eigen::MatrixXd& log_kernel, const Eigen::VectorXd& g) {
  Eigen::MatrixXd shifted = log_kernel.rowwise() + g.transpose();
  Eigen::VectorXd peak = shifted.rowwise().maxCoeff();
  Eigen::VectorXd out(log_kernel.rows());
  for (Eigen::Index i = 0; i < log_kernel.rows(); ++i) {
    out(i) = peak(i) + std::log((shifted.row(i).array() - peak(i)).exp().sum());
  }
  return out;
}

}  // namespace

SinkhornResult log_domain_sinkhorn(const DiscreteMeasure& h,
                                   const DiscreteMeasure& y,
                                   const GroundMetric& metric,
                                   const SinkhornConfig& cfg) {
  check_config(cfg);
  const int k = metric.size();
  if (h.size() != k || y.size() != k) {
    throw std::invalid_argument("log_domain_sinkhorn: dimension mismatch");
  }
  if (!h.is_normalized() || !y.is_normalized()) {
    throw std::invalid_argument("log_domain_sinkhorn: inputs must be normalized measures");
  }

  const Eigen::VectorXd target_row = clamp_simplex(h.values(), cfg.min_mass);
  const Eigen::VectorXd target_col = clamp_simplex(y.values(), cfg.min_mass);
  const Eigen::VectorXd log_row = target_row.array().log();
  const Eigen::VectorXd log_col = target_col.array().log();
  const Eigen::MatrixXd log_kernel = -cfg.lambda * metric.costs().array() - 1.0;

  Eigen::VectorXd f = Eigen::VectorXd::Zero(k);  // log u
  Eigen::VectorXd g = Eigen::VectorXd::Zero(k);  // log v
  Eigen::VectorXd lse_f = lse_cols(log_kernel, f);
  int iters = 0;
  while (true) {
    g = log_col - lse_f;
    f = log_row - lse_rows(log_kernel, g);
    lse_f = lse_cols(log_kernel, f);
    ++iters;
    const double violation =
        ((f + lse_rows(log_kernel, g)).array().exp() - target_row.array())
            .abs()
            .sum() +
        ((g + lse_f).array().exp() - target_col.array()).abs().sum();
    if (cfg.fixed_iters > 0 ? iters >= cfg.fixed_iters
                            : (violation <= cfg.tol || iters >= cfg.max_iters)) {
      break;
    }
  }
  g = log_col - lse_f;

  // The plan is assembled in log space; entries exponentiate to finite
  // values even when u or v alone would overflow.
  Eigen::MatrixXd log_plan = (log_kernel.colwise() + f).rowwise() + g.transpose();
  Eigen::MatrixXd plan_matrix = log_plan.array().exp();
  const double transport_cost = (plan_matrix.array() * metric.costs().array()).sum();
  const double entropy = -(plan_matrix.array() * log_plan.array()).sum();

  SinkhornState state;
  state.kernel = log_kernel.array().exp();
  state.u = f.array().exp();
  state.v = g.array().exp();
  state.log_u = f;
  state.log_v = g;
  state.iters_run = iters;
  state.marginal_violation =
      (plan_matrix.rowwise().sum() - target_row).lpNorm<1>() +
      (plan_matrix.colwise().sum().transpose() - target_col).lpNorm<1>();

  return SinkhornResult{std::move(state), TransportPlan(std::move(plan_matrix)),
                        transport_cost - entropy / cfg.lambda, transport_cost,
                        entropy};
}

Eigen::VectorXd sinkhorn_gradient(const SinkhornState& state, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("sinkhorn_gradient: lambda must be positive");
  if (state.log_u.size() == 0 || !state.log_u.allFinite()) {
    throw std::invalid_argument("sinkhorn_gradient: state has no finite scaling (nonpositive u)");
  }
  const double k = static_cast<double>(state.log_u.size());
  return (state.log_u.array() - state.log_u.sum() / k) / lambda;
}

SinkhornBatchResult sinkhorn_batch(const Eigen::MatrixXd& h_columns,
                                   const Eigen::MatrixXd& y_columns,
                                   const GroundMetric& metric,
                                   const SinkhornConfig& cfg) {
  check_config(cfg);
  const int k = metric.size();
  const Eigen::Index batch = h_columns.cols();
  if (h_columns.rows() != k || y_columns.rows() != k || y_columns.cols() != batch) {
    throw std::invalid_argument("sinkhorn_batch: dimension mismatch");
  }

  Eigen::MatrixXd row_targets = h_columns.cwiseMax(cfg.min_mass);
  row_targets.array().rowwise() /= row_targets.colwise().sum().array();
  Eigen::MatrixXd col_targets = y_columns.cwiseMax(cfg.min_mass);
  col_targets.array().rowwise() /= col_targets.colwise().sum().array();

  const Eigen::MatrixXd kernel = entropic_kernel(metric, cfg.lambda);
  // Hadamard companions for the cost and entropy reductions below.
  const Eigen::MatrixXd kernel_cost = kernel.cwiseProduct(metric.costs());
  const Eigen::MatrixXd kernel_log =
      kernel.array() * (-cfg.lambda * metric.costs().array() - 1.0);

  Eigen::MatrixXd scale_row = Eigen::MatrixXd::Ones(k, batch);  // u per column
  Eigen::MatrixXd kernel_t_u = kernel.transpose() * scale_row;
  Eigen::MatrixXd scale_col(k, batch), kernel_v(k, batch);
  int iters = 0;
  while (true) {
    scale_col = col_targets.cwiseQuotient(kernel_t_u);
    kernel_v.noalias() = kernel * scale_col;
    scale_row = row_targets.cwiseQuotient(kernel_v);
    kernel_t_u.noalias() = kernel.transpose() * scale_row;
    ++iters;
    if (cfg.fixed_iters > 0) {
      if (iters >= cfg.fixed_iters) break;
    } else {
      const double violation =
          ((scale_col.cwiseProduct(kernel_t_u) - col_targets).cwiseAbs().colwise().sum())
              .maxCoeff();
      if (violation <= cfg.tol || iters >= cfg.max_iters) break;
    }
  }
  if (!scale_row.allFinite() || (scale_row.array() <= 0.0).any()) {
    throw SinkhornUnderflowError(
        "sinkhorn_batch: scaling underflowed or overflowed; reduce lambda or "
        "use the per-instance log-domain solver");
  }
  scale_col = col_targets.cwiseQuotient(kernel_t_u);
  kernel_v.noalias() = kernel * scale_col;

  // Per-column transport cost u' (K o M) v and entropy
  // H = -[sum_i u log u (Kv) + u' (K o log K) v + sum_j v log v (K'u)].
  Eigen::RowVectorXd costs =
      scale_row.cwiseProduct(kernel_cost * scale_col).colwise().sum();
  Eigen::RowVectorXd entropy_terms =
      scale_row.cwiseProduct(scale_row.array().log().matrix())
          .cwiseProduct(kernel_v)
          .colwise()
          .sum();
  entropy_terms += scale_row.cwiseProduct(kernel_log * scale_col).colwise().sum();
  entropy_terms += scale_col.cwiseProduct(scale_col.array().log().matrix())
                       .cwiseProduct(kernel_t_u)
                       .colwise()
                       .sum();

  SinkhornBatchResult result;
  Eigen::MatrixXd log_u = scale_row.array().log().matrix();
  log_u.array().rowwise() -= log_u.colwise().mean().array();
  result.gradients = log_u / cfg.lambda;
  result.transport_costs = costs;
  result.losses = costs + entropy_terms / cfg.lambda;
  result.iters_run = iters;
  return result;
}

}  // namespace otloss
