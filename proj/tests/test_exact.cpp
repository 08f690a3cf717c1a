#include <doctest.h>

#include <cmath>

#include "otloss/exact.hpp"
#include "support.hpp"

using namespace otloss;
using otloss::testing::random_euclidean_metric;
using otloss::testing::random_measure;
using otloss::testing::random_tangent;

TEST_SUITE_BEGIN("exact");

TEST_CASE("cdf oracle hand values") {
  const DiscreteMeasure a = one_hot(2, 0);
  const DiscreteMeasure b = one_hot(2, 1);
  CHECK(cdf_wasserstein_1d(a, b) == doctest::Approx(1.0));
  CHECK(cdf_wasserstein_1d(a, a) == 0.0);

  Eigen::VectorXd left(3), right(3);
  left << 0.5, 0.5, 0.0;
  right << 0.0, 0.5, 0.5;
  CHECK(cdf_wasserstein_1d(DiscreteMeasure::normalized(left),
                           DiscreteMeasure::normalized(right)) ==
        doctest::Approx(1.0));
}

TEST_CASE("identical marginals ship along the diagonal") {
  Rng rng(11);
  const GroundMetric metric = line_metric(5, 1.0);
  const DiscreteMeasure mu = random_measure(5, rng);
  const ExactSolution solution = exact_transport(mu, mu, metric);
  CHECK(solution.cost == doctest::Approx(0.0).epsilon(1e-12));
  // Off-diagonal costs are strictly positive, so the zero-cost plan is the
  // diagonal embedding of the common marginal.
  Eigen::MatrixXd diag = mu.values().asDiagonal();
  CHECK((solution.plan.matrix() - diag).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("all mass moves across the line") {
  const ExactSolution solution =
      exact_transport(one_hot(3, 0), one_hot(3, 2), line_metric(3, 1.0));
  CHECK(solution.cost == doctest::Approx(2.0));
}

TEST_CASE("zero-one metric reduces to total variation") {
  Eigen::VectorXd a(2), b(2);
  a << 0.7, 0.3;
  b << 0.3, 0.7;
  const ExactSolution solution =
      exact_transport(DiscreteMeasure::normalized(a), DiscreteMeasure::normalized(b),
                      zero_one_metric(2));
  CHECK(solution.cost == doctest::Approx(0.4).epsilon(1e-12));

  Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_index(6));
    const DiscreteMeasure mu = random_measure(k, rng);
    const DiscreteMeasure nu = random_measure(k, rng);
    const double half_l1 = 0.5 * (mu.values() - nu.values()).lpNorm<1>();
    const ExactSolution sol = exact_transport(mu, nu, zero_one_metric(k));
    CHECK(sol.cost == doctest::Approx(half_l1).epsilon(1e-9));
  }
}

TEST_CASE("line metric solves match the cdf oracle") {
  Rng rng(17);
  const GroundMetric metric = line_metric(4, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const DiscreteMeasure mu = random_measure(4, rng);
    const DiscreteMeasure nu = random_measure(4, rng);
    const ExactSolution sol = exact_transport(mu, nu, metric);
    CHECK(std::abs(sol.cost - cdf_wasserstein_1d(mu, nu)) <= 1e-9);
  }
}

TEST_CASE("one-hot losses") {
  const GroundMetric metric = zero_one_metric(2);
  CHECK(one_hot_loss(one_hot(2, 1), 1, metric) == 0.0);

  Eigen::VectorXd h(2);
  h << 0.5, 0.5;
  CHECK(one_hot_loss(DiscreteMeasure::normalized(h), 1, metric) ==
        doctest::Approx(0.5));
  CHECK_THROWS_AS(one_hot_loss(one_hot(2, 0), 5, metric), std::out_of_range);

  Rng rng(19);
  const GroundMetric random_metric = random_euclidean_metric(5, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const DiscreteMeasure pred = random_measure(5, rng);
    const int target = static_cast<int>(rng.uniform_index(5));
    const ExactSolution sol = exact_transport(pred, one_hot(5, target), random_metric);
    CHECK(std::abs(sol.cost - one_hot_loss(pred, target, random_metric)) <= 1e-12);
  }
}

TEST_CASE("plans are feasible and certificates are tight") {
  Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_index(7));
    const GroundMetric metric = random_euclidean_metric(k, rng);
    const DiscreteMeasure mu = random_measure(k, rng);
    const DiscreteMeasure nu = random_measure(k, rng);
    const ExactSolution sol = exact_transport(mu, nu, metric);

    CHECK((sol.plan.row_marginal() - mu.values()).lpNorm<1>() <= 1e-9);
    CHECK((sol.plan.col_marginal() - nu.values()).lpNorm<1>() <= 1e-9);
    CHECK(sol.plan.matrix().minCoeff() >= 0.0);

    // Dual feasibility and strong duality.
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        CHECK(sol.dual_alpha(i) + sol.dual_beta(j) <= metric(i, j) + 1e-9);
      }
    }
    const double dual_value =
        sol.dual_alpha.dot(mu.values()) + sol.dual_beta.dot(nu.values());
    CHECK(std::abs(dual_value - sol.cost) <= 1e-7);

    // Cost consistency with the plan.
    const double primal =
        (sol.plan.matrix().array() * metric.costs().array()).sum();
    CHECK(std::abs(primal - sol.cost) <= 1e-9);
  }
}

TEST_CASE("subgradient is centered and matches finite differences") {
  Rng rng(29);
  int checked = 0;
  for (int trial = 0; trial < 60 && checked < 20; ++trial) {
    const int k = 4;
    const GroundMetric metric = random_euclidean_metric(k, rng);
    const Eigen::VectorXd h = testing::random_interior_simplex(k, rng);
    const DiscreteMeasure nu = random_measure(k, rng);
    const DiscreteMeasure mu = DiscreteMeasure::normalized(h);
    const ExactSolution sol = exact_transport(mu, nu, metric);
    const Eigen::VectorXd grad = dual_subgradient(sol);
    CHECK(std::abs(grad.sum()) <= 1e-9);
    if (sol.dual_degenerate || sol.primal_degenerate) continue;  // not unique

    const Eigen::VectorXd direction = random_tangent(k, rng);
    const double step = 1e-6;
    const auto value = [&](const Eigen::VectorXd& point) {
      return exact_transport(DiscreteMeasure::normalized(point), nu, metric).cost;
    };
    const double fd =
        (value(h + step * direction) - value(h - step * direction)) / (2.0 * step);
    CHECK(grad.dot(direction) == doctest::Approx(fd).epsilon(1e-4));
    ++checked;
  }
  CHECK(checked >= 10);  // enough non-degenerate instances sampled
}

TEST_CASE("metric and bound invariants on random instances") {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_index(6));
    const GroundMetric metric = random_euclidean_metric(k, rng);
    const DiscreteMeasure a = random_measure(k, rng);
    const DiscreteMeasure b = random_measure(k, rng);
    const DiscreteMeasure c = random_measure(k, rng);

    const double ab = exact_transport(a, b, metric).cost;
    const double ba = exact_transport(b, a, metric).cost;
    const double bc = exact_transport(b, c, metric).cost;
    const double ac = exact_transport(a, c, metric).cost;

    CHECK(ab >= 0.0);
    CHECK(ab <= metric.max_cost() + 1e-12);
    CHECK(std::abs(ab - ba) <= 1e-12);
    CHECK(ac <= ab + bc + 1e-9);
    CHECK(ab <= metric.max_cost() * (a.values() - b.values()).lpNorm<1>() + 1e-12);
  }
}

TEST_CASE("input validation") {
  const GroundMetric metric = line_metric(3, 1.0);
  CHECK_THROWS_AS(exact_transport(one_hot(2, 0), one_hot(3, 0), metric),
                  std::invalid_argument);
  Eigen::VectorXd heavy(3);
  heavy << 1.0, 1.0, 1.0;
  CHECK_THROWS_AS(exact_transport(DiscreteMeasure::unnormalized(heavy), one_hot(3, 0), metric),
                  std::invalid_argument);
  CHECK_THROWS_AS(cdf_wasserstein_1d(DiscreteMeasure::unnormalized(heavy), one_hot(3, 0)),
                  std::invalid_argument);
}

TEST_CASE("zero marginal entries carry zero plan mass") {
  Eigen::VectorXd mu(4), nu(4);
  mu << 0.5, 0.0, 0.5, 0.0;
  nu << 0.0, 0.5, 0.0, 0.5;
  const ExactSolution sol = exact_transport(DiscreteMeasure::normalized(mu),
                                            DiscreteMeasure::normalized(nu),
                                            line_metric(4, 1.0));
  CHECK(sol.plan.row_marginal()(1) <= 1e-15);
  CHECK(sol.plan.row_marginal()(3) <= 1e-15);
  CHECK(sol.plan.col_marginal()(0) <= 1e-15);
  CHECK(sol.cost == doctest::Approx(1.0));  // each half step costs 0.5
}

TEST_SUITE_END();
