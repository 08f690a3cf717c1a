#include <doctest.h>

#include "otloss/measures.hpp"
#include "support.hpp"

using namespace otloss;

TEST_SUITE_BEGIN("measures");

TEST_CASE("line metric matches hand values") {
  const GroundMetric m3 = line_metric(3, 1.0);
  const Eigen::MatrixXd expected3 =
      (Eigen::MatrixXd(3, 3) << 0, 1, 2, 1, 0, 1, 2, 1, 0).finished();
  CHECK((m3.costs() - expected3).cwiseAbs().maxCoeff() == 0.0);

  const GroundMetric m2 = line_metric(2, 2.0);
  CHECK(m2(0, 1) == 1.0);
  CHECK(m2(1, 0) == 1.0);
  CHECK(m2(0, 0) == 0.0);
  CHECK(m2.max_cost() == 1.0);
}

TEST_CASE("rescaled line metric lands in [0,1) and preserves ratios") {
  const GroundMetric raw = line_metric(10, 13.0);
  const GroundMetric scaled = line_metric(10, 13.0, /*rescale=*/true);
  CHECK(scaled.costs().maxCoeff() < 1.0);
  CHECK(scaled.costs().minCoeff() == 0.0);
  // Ratios between entries survive the common factor.
  const double ratio = raw(0, 4) / raw(0, 2);
  CHECK(scaled(0, 4) / scaled(0, 2) == doctest::Approx(ratio).epsilon(1e-12));
  // Ordering is untouched.
  for (int j = 2; j < 10; ++j) {
    CHECK(scaled(0, j) > scaled(0, j - 1));
  }
}

TEST_CASE("zero-one metric") {
  const GroundMetric m2 = zero_one_metric(2);
  CHECK(m2(0, 1) == 1.0);
  const GroundMetric m1 = zero_one_metric(1);
  CHECK(m1.costs()(0, 0) == 0.0);
  const GroundMetric m3 = zero_one_metric(3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(m3(i, j) == (i == j ? 0.0 : 1.0));
    }
  }
}

TEST_CASE("line metric with p = 0 is the zero-one metric") {
  const GroundMetric p0 = line_metric(5, 0.0);
  const GroundMetric zo = zero_one_metric(5);
  CHECK((p0.costs() - zo.costs()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("euclidean metric on the unit square") {
  const std::vector<Eigen::Vector2d> corners = {
      {0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const GroundMetric m = euclidean_metric(corners, 1.0);
  CHECK(m(0, 1) == doctest::Approx(1.0));
  CHECK(m(1, 2) == doctest::Approx(1.0));
  CHECK(m(0, 2) == doctest::Approx(std::sqrt(2.0)));
  CHECK(m(1, 3) == doctest::Approx(std::sqrt(2.0)));

  const GroundMetric single = euclidean_metric({{3.0, 4.0}}, 1.0);
  CHECK(single.size() == 1);
  CHECK(single(0, 0) == 0.0);
}

TEST_CASE("3x3 lattice has unit neighbor distance") {
  std::vector<Eigen::Vector2d> points;
  for (int x = 0; x < 3; ++x) {
    for (int y = 0; y < 3; ++y) points.emplace_back(x, y);
  }
  const GroundMetric m = euclidean_metric(points, 1.0);
  CHECK(m(0, 1) == doctest::Approx(1.0));  // (0,0)-(0,1)
  CHECK(m(0, 3) == doctest::Approx(1.0));  // (0,0)-(1,0)
  CHECK(m(0, 4) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("metric builders reject empty inputs") {
  CHECK_THROWS_AS(line_metric(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(zero_one_metric(0), std::invalid_argument);
  CHECK_THROWS_AS(euclidean_metric({}, 1.0), std::invalid_argument);
}

TEST_CASE("metric validation") {
  Eigen::MatrixXd bad_diag = Eigen::MatrixXd::Ones(2, 2);
  CHECK_THROWS_AS(GroundMetric(bad_diag, 1.0), std::invalid_argument);

  Eigen::MatrixXd asym(2, 2);
  asym << 0, 1, 2, 0;
  CHECK_THROWS_AS(GroundMetric(asym, 1.0), std::invalid_argument);

  Eigen::MatrixXd negative(2, 2);
  negative << 0, -1, -1, 0;
  CHECK_THROWS_AS(GroundMetric(negative, 1.0), std::invalid_argument);
}

TEST_CASE("random point sets build valid metrics") {
  Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_index(10));
    const GroundMetric m = testing::random_euclidean_metric(k, rng);
    CHECK(m.costs().diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK((m.costs() - m.costs().transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(m.costs().minCoeff() >= 0.0);
    CHECK(m.max_cost() == m.costs().maxCoeff());
  }
}

TEST_CASE("one-hot measures") {
  const DiscreteMeasure e1 = one_hot(3, 1);
  CHECK(e1[0] == 0.0);
  CHECK(e1[1] == 1.0);
  CHECK(e1[2] == 0.0);
  CHECK(e1.total_mass() == 1.0);
  CHECK(one_hot(1, 0)[0] == 1.0);
  CHECK_THROWS_AS(one_hot(3, 3), std::out_of_range);
  CHECK_THROWS_AS(one_hot(3, -1), std::out_of_range);
}

TEST_CASE("measure validation") {
  Eigen::VectorXd negative(2);
  negative << 0.5, -0.1;
  CHECK_THROWS_AS(DiscreteMeasure::unnormalized(negative), std::invalid_argument);

  Eigen::VectorXd off_simplex(2);
  off_simplex << 0.5, 0.6;
  CHECK_THROWS_AS(DiscreteMeasure::normalized(off_simplex), std::invalid_argument);
  CHECK(DiscreteMeasure::from_values(off_simplex).kind() == MeasureKind::kUnnormalized);

  // Zero total mass is constructible as an unnormalized measure.
  const DiscreteMeasure zero = DiscreteMeasure::unnormalized(Eigen::VectorXd::Zero(3));
  CHECK(zero.total_mass() == 0.0);

  Eigen::VectorXd simplex(2);
  simplex << 0.25, 0.75;
  CHECK(DiscreteMeasure::from_values(simplex).is_normalized());
}

TEST_CASE("transport plan marginals are consistent") {
  Eigen::MatrixXd matrix(2, 2);
  matrix << 0.2, 0.1, 0.3, 0.4;
  const TransportPlan plan(matrix);
  CHECK(plan.row_marginal()(0) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(plan.col_marginal()(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(plan.total_mass() == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::MatrixXd negative(2, 2);
  negative << 0.5, 0.0, -0.1, 0.6;
  CHECK_THROWS_AS(TransportPlan{negative}, std::invalid_argument);
}

TEST_SUITE_END();
