#include "otloss/relaxed.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "otloss/sinkhorn.hpp"

namespace otloss {

namespace {

constexpr double kEntropyFloor = 1e-300;
constexpr int kStallLimit = 50;

void check_config(const RelaxedConfig& cfg) {
  if (!(cfg.lambda > 0.0)) throw std::invalid_argument("relaxed: lambda must be positive");
  if (!(cfg.gamma_a > 0.0) || !(cfg.gamma_b > 0.0)) {
    throw std::invalid_argument("relaxed: gamma_a and gamma_b must be positive");
  }
  if (!(cfg.tol > 0.0)) throw std::invalid_argument("relaxed: tol must be positive");
  if (cfg.max_iters < 1) throw std::invalid_argument("relaxed: max_iters must be at least 1");
  if (!(cfg.min_mass > 0.0)) throw std::invalid_argument("relaxed: min_mass must be positive");
}

void check_positive_finite(const Eigen::VectorXd& vec, const char* what) {
  if (!vec.allFinite() || (vec.array() <= 0.0).any()) {
    throw std::runtime_error(std::string("relaxed_transport: ") + what +
                             " underflowed or overflowed during the iteration");
  }
}

double entropy_of_plan(const Eigen::MatrixXd& plan) {
  return -(plan.array() * plan.array().max(kEntropyFloor).log()).sum();
}

}  // namespace

double generalized_kl(const Eigen::VectorXd& w, const Eigen::VectorXd& z) {
  if (w.size() != z.size()) throw std::invalid_argument("generalized_kl: dimension mismatch");
  double total = z.sum() - w.sum();
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (!(z(i) > 0.0)) throw std::invalid_argument("generalized_kl: z must be strictly positive");
    if (w(i) < 0.0) throw std::invalid_argument("generalized_kl: w must be nonnegative");
    if (w(i) > 0.0) total += w(i) * std::log(w(i) / z(i));
  }
  return total;
}

RelaxedSolution relaxed_transport(const DiscreteMeasure& h,
                                  const DiscreteMeasure& y,
                                  const GroundMetric& metric,
                                  const RelaxedConfig& cfg) {
  check_config(cfg);
  const int k = metric.size();
  if (h.size() != k || y.size() != k) {
    throw std::invalid_argument("relaxed_transport: dimension mismatch");
  }
  if (!(h.total_mass() > 0.0) || !(y.total_mass() > 0.0)) {
    throw std::invalid_argument("relaxed_transport: measures must have positive total mass");
  }

  const double exp_row = cfg.gamma_a * cfg.lambda / (cfg.gamma_a * cfg.lambda + 1.0);
  const double exp_col = cfg.gamma_b * cfg.lambda / (cfg.gamma_b * cfg.lambda + 1.0);

  const Eigen::VectorXd row_target = h.values().cwiseMax(cfg.min_mass);
  const Eigen::VectorXd col_target = y.values().cwiseMax(cfg.min_mass);
  const Eigen::MatrixXd kernel = entropic_kernel(metric, cfg.lambda);

  Eigen::VectorXd u = Eigen::VectorXd::Ones(k);
  Eigen::VectorXd v = Eigen::VectorXd::Ones(k);
  int iters = 0;
  double residual = std::numeric_limits<double>::infinity();
  double best_residual = residual;
  int stalled = 0;
  bool diverged = false;

  while (true) {
    const Eigen::VectorXd u_prev = u;
    const Eigen::VectorXd v_prev = v;

    Eigen::VectorXd kernel_t_u = kernel.transpose() * u;
    check_positive_finite(kernel_t_u, "column denominator");
    v = col_target.cwiseQuotient(kernel_t_u).array().pow(exp_col);
    check_positive_finite(v, "column scaling");
    Eigen::VectorXd kernel_v = kernel * v;
    check_positive_finite(kernel_v, "row denominator");
    u = row_target.cwiseQuotient(kernel_v).array().pow(exp_row);
    check_positive_finite(u, "row scaling");
    ++iters;

    residual = std::max((u - u_prev).lpNorm<1>() / u.lpNorm<1>(),
                        (v - v_prev).lpNorm<1>() / v.lpNorm<1>());
    if (cfg.fixed_iters > 0) {
      if (iters >= cfg.fixed_iters) break;
      continue;
    }
    if (residual <= cfg.tol || iters >= cfg.max_iters) break;
    if (residual < best_residual) {
      best_residual = residual;
      stalled = 0;
    } else if (++stalled >= kStallLimit) {
      diverged = true;
      break;
    }
  }

  // Column scaling recomputed once from the final row scaling.
  v = col_target.cwiseQuotient(kernel.transpose() * u).array().pow(exp_col);

  Eigen::MatrixXd plan_matrix = u.asDiagonal() * kernel * v.asDiagonal();
  const double transport_cost = (plan_matrix.array() * metric.costs().array()).sum();
  const double entropy = entropy_of_plan(plan_matrix);
  const double kl_row = generalized_kl(plan_matrix.rowwise().sum(), row_target);
  const double kl_col =
      generalized_kl(plan_matrix.colwise().sum().transpose(), col_target);
  const double objective = transport_cost - entropy / cfg.lambda +
                           cfg.gamma_a * kl_row + cfg.gamma_b * kl_col;

  return RelaxedSolution{TransportPlan(std::move(plan_matrix)),
                         std::move(u),
                         std::move(v),
                         objective,
                         transport_cost,
                         kl_row,
                         kl_col,
                         entropy,
                         iters,
                         residual,
                         diverged};
}

Eigen::VectorXd relaxed_gradient(const RelaxedSolution& solution,
                                 const DiscreteMeasure& h, double gamma_a,
                                 double min_mass) {
  if (!(gamma_a > 0.0)) throw std::invalid_argument("relaxed_gradient: gamma_a must be positive");
  if (!(min_mass > 0.0)) throw std::invalid_argument("relaxed_gradient: min_mass must be positive");
  if (h.size() != solution.plan.size()) {
    throw std::invalid_argument("relaxed_gradient: dimension mismatch");
  }
  const Eigen::VectorXd clamped = h.values().cwiseMax(min_mass);
  return gamma_a *
         (1.0 - solution.plan.row_marginal().array() / clamped.array()).matrix();
}

RelaxedBatchResult relaxed_batch(const Eigen::MatrixXd& h_columns,
                                 const Eigen::MatrixXd& y_columns,
                                 const GroundMetric& metric,
                                 const RelaxedConfig& cfg) {
  check_config(cfg);
  const int k = metric.size();
  const Eigen::Index batch = h_columns.cols();
  if (h_columns.rows() != k || y_columns.rows() != k || y_columns.cols() != batch) {
    throw std::invalid_argument("relaxed_batch: dimension mismatch");
  }

  const double exp_row = cfg.gamma_a * cfg.lambda / (cfg.gamma_a * cfg.lambda + 1.0);
  const double exp_col = cfg.gamma_b * cfg.lambda / (cfg.gamma_b * cfg.lambda + 1.0);

  const Eigen::MatrixXd row_targets = h_columns.cwiseMax(cfg.min_mass);
  const Eigen::MatrixXd col_targets = y_columns.cwiseMax(cfg.min_mass);
  const Eigen::MatrixXd kernel = entropic_kernel(metric, cfg.lambda);
  const Eigen::MatrixXd kernel_cost = kernel.cwiseProduct(metric.costs());
  const Eigen::MatrixXd kernel_log =
      kernel.array() * (-cfg.lambda * metric.costs().array() - 1.0);

  Eigen::MatrixXd u = Eigen::MatrixXd::Ones(k, batch);
  Eigen::MatrixXd v = Eigen::MatrixXd::Ones(k, batch);
  Eigen::MatrixXd u_prev(k, batch), v_prev(k, batch);
  int iters = 0;
  while (true) {
    u_prev = u;
    v_prev = v;
    v = col_targets.cwiseQuotient(kernel.transpose() * u).array().pow(exp_col);
    Eigen::MatrixXd kernel_v = kernel * v;
    u = row_targets.cwiseQuotient(kernel_v).array().pow(exp_row);
    ++iters;
    if (cfg.fixed_iters > 0) {
      if (iters >= cfg.fixed_iters) break;
    } else {
      const double residual = std::max(
          (u - u_prev).cwiseAbs().sum() / u.cwiseAbs().sum(),
          (v - v_prev).cwiseAbs().sum() / v.cwiseAbs().sum());
      if (residual <= cfg.tol || iters >= cfg.max_iters) break;
    }
  }
  if (!u.allFinite() || (u.array() <= 0.0).any() || !v.allFinite() ||
      (v.array() <= 0.0).any()) {
    throw std::runtime_error(
        "relaxed_batch: scaling underflowed or overflowed during the iteration");
  }
  v = col_targets.cwiseQuotient(kernel.transpose() * u).array().pow(exp_col);
  Eigen::MatrixXd kernel_v = kernel * v;
  Eigen::MatrixXd kernel_t_u = kernel.transpose() * u;

  Eigen::MatrixXd row_marginals = u.cwiseProduct(kernel_v);
  Eigen::MatrixXd col_marginals = v.cwiseProduct(kernel_t_u);

  Eigen::RowVectorXd costs = u.cwiseProduct(kernel_cost * v).colwise().sum();
  Eigen::RowVectorXd neg_entropy =
      u.cwiseProduct(u.array().log().matrix()).cwiseProduct(kernel_v).colwise().sum();
  neg_entropy += u.cwiseProduct(kernel_log * v).colwise().sum();
  neg_entropy +=
      v.cwiseProduct(v.array().log().matrix()).cwiseProduct(kernel_t_u).colwise().sum();

  // gKL(w || z) columnwise; all marginals are strictly positive here.
  auto gkl_columns = [](const Eigen::MatrixXd& w, const Eigen::MatrixXd& z) {
    Eigen::RowVectorXd out =
        w.cwiseProduct((w.array() / z.array()).log().matrix()).colwise().sum();
    out -= w.colwise().sum();
    out += z.colwise().sum();
    return out;
  };
  Eigen::RowVectorXd kl_rows = gkl_columns(row_marginals, row_targets);
  Eigen::RowVectorXd kl_cols = gkl_columns(col_marginals, col_targets);

  RelaxedBatchResult result;
  result.gradients =
      cfg.gamma_a * (1.0 - row_marginals.array() / row_targets.array()).matrix();
  result.transport_costs = costs;
  result.objectives = costs + neg_entropy / cfg.lambda +
                      cfg.gamma_a * kl_rows + cfg.gamma_b * kl_cols;
  result.iters_run = iters;
  return result;
}

}  // namespace otloss
