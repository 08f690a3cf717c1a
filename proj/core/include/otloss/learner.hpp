#ifndef OTLOSS_LEARNER_HPP_
#define OTLOSS_LEARNER_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "otloss/measures.hpp"
#include "otloss/relaxed.hpp"
#include "otloss/sinkhorn.hpp"

namespace otloss {

// Linear softmax classifier: x maps to softmax(weights * x).
struct LinearSoftmaxModel {
  Eigen::MatrixXd weights;  // label_count x feature_dim

  int label_count() const { return static_cast<int>(weights.rows()); }
  int feature_dim() const { return static_cast<int>(weights.cols()); }
};

enum class LossKind { kExactW, kSinkhornW, kRelaxedW, kKlOnly };

struct TrainConfig {
  int minibatch = 100;
  int iterations = 1000;
  double learning_rate = 0.1;   // constant schedule
  double momentum = 0.7;
  double l2 = 0.0005;           // weight on sum_k |theta_k|^2
  double alpha_kl = 0.0;        // weight on the added KL term
  LossKind loss_kind = LossKind::kSinkhornW;
  SinkhornConfig sinkhorn;
  RelaxedConfig relaxed;
  std::uint64_t rng_seed = 0;
  int log_every = 100;
};

struct Dataset {
  Eigen::MatrixXd features;             // n_examples x feature_dim
  std::vector<DiscreteMeasure> labels;  // one measure per example
  std::vector<std::string> names;       // optional label names

  int size() const { return static_cast<int>(features.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
  int label_dim() const { return labels.empty() ? 0 : labels.front().size(); }
};

struct LossValueGrad {
  double value = 0.0;
  Eigen::VectorXd grad;  // with respect to the prediction
};

// softmax(weights * x) with max-subtraction stabilization.
DiscreteMeasure predict(const LinearSoftmaxModel& model, const Eigen::VectorXd& x);

// Index of the largest predicted probability; ties go to the lowest index.
int argmax_predict(const LinearSoftmaxModel& model, const Eigen::VectorXd& x);

// sum_k y_k log(y_k / h_k) with 0 log 0 = 0 and h clamped away from zero;
// gradient is -y / h.
LossValueGrad kl_loss(const DiscreteMeasure& h, const DiscreteMeasure& y);

// Configured transport loss plus alpha_kl times the KL term. With
// loss_kind = kKlOnly only the KL term is evaluated (the baseline). Labels
// are normalized internally where the chosen solver requires simplex inputs;
// the relaxed solver takes them as given.
LossValueGrad combined_loss(const DiscreteMeasure& h, const DiscreteMeasure& y,
                            const GroundMetric& metric, const TrainConfig& cfg);

// Pulls a loss gradient back through the softmax:
// row k of the result is s_k (g_k - s . g) x'.
Eigen::MatrixXd chain_gradient(const LinearSoftmaxModel& model,
                               const Eigen::VectorXd& x,
                               const Eigen::VectorXd& dloss_dh);

struct TrainLogEntry {
  int iteration = 0;
  double loss = 0.0;  // minibatch data loss averaged since the previous entry
};

struct TrainResult {
  LinearSoftmaxModel model;
  std::vector<TrainLogEntry> log;
};

// Minibatch SGD with momentum and L2 regularization. Weights start from a
// seeded Gaussian (stdev 0.01); minibatches are sampled uniformly with
// replacement from the seeded stream. Fully deterministic given rng_seed.
// iterations = 0 returns the initialization untouched.
TrainResult train_sgd(const Dataset& dataset, const GroundMetric& metric,
                      const TrainConfig& cfg);

// Mean semantic distance from the top k_eval predicted labels to their
// nearest ground-truth tag. `metric_root` carries plain distances (power 1).
double top_k_cost(const DiscreteMeasure& predicted, const std::vector<int>& truth_tags,
                  const GroundMetric& metric_root, int k_eval);

struct EvalMetrics {
  double top_k_cost = 0.0;
  double argmax_accuracy = 0.0;
  double mean_semantic_distance = 0.0;  // top-1 cost
};

// Aggregate metrics over a dataset; ground-truth tags are the labels'
// positive-mass indices.
EvalMetrics evaluate(const LinearSoftmaxModel& model, const Dataset& dataset,
                     const GroundMetric& metric_root, int k_eval);

}  // namespace otloss

#endif  // OTLOSS_LEARNER_HPP_
