#ifndef OTLOSS_TESTS_SUPPORT_HPP_
#define OTLOSS_TESTS_SUPPORT_HPP_

#include <Eigen/Dense>
#include <vector>

#include "otloss/measures.hpp"
#include "otloss/rng.hpp"

namespace otloss::testing {

// Uniform point on the simplex via normalized exponentials.
inline Eigen::VectorXd random_simplex(int k, Rng& rng) {
  Eigen::VectorXd values(k);
  for (int i = 0; i < k; ++i) values(i) = -std::log(1.0 - rng.uniform());
  return values / values.sum();
}

inline DiscreteMeasure random_measure(int k, Rng& rng) {
  return DiscreteMeasure::normalized(random_simplex(k, rng));
}

// Euclidean distances (power p) between random points in the unit square.
inline GroundMetric random_euclidean_metric(int k, Rng& rng, double p = 1.0,
                                            bool rescale = false) {
  std::vector<Eigen::Vector2d> points;
  points.reserve(k);
  for (int i = 0; i < k; ++i) {
    points.emplace_back(rng.uniform(), rng.uniform());
  }
  return euclidean_metric(points, p, rescale);
}

// Zero-sum direction for probing losses along the simplex tangent space.
inline Eigen::VectorXd random_tangent(int k, Rng& rng) {
  Eigen::VectorXd direction(k);
  for (int i = 0; i < k; ++i) direction(i) = rng.normal();
  direction.array() -= direction.mean();
  const double norm = direction.norm();
  return norm > 0 ? Eigen::VectorXd(direction / norm) : direction;
}

// Interior simplex point: mixes a random measure with the uniform one so
// finite-difference steps stay inside the simplex.
inline Eigen::VectorXd random_interior_simplex(int k, Rng& rng, double pull = 0.2) {
  Eigen::VectorXd values = random_simplex(k, rng);
  return (1.0 - pull) * values + pull * Eigen::VectorXd::Constant(k, 1.0 / k);
}

}  // namespace otloss::testing

#endif  // OTLOSS_TESTS_SUPPORT_HPP_
