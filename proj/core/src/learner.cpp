#include "otloss/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "otloss/exact.hpp"
#include "otloss/rng.hpp"

namespace otloss {

namespace {

// Floor applied to predictions inside logs and divisions of the KL loss.
constexpr double kKlClamp = 1e-12;
constexpr double kLogFloor = 1e-300;
constexpr double kInitStdev = 0.01;

Eigen::VectorXd normalize_values(const Eigen::VectorXd& values, const char* what) {
  const double mass = values.sum();
  if (!(mass > 0.0)) {
    throw std::invalid_argument(std::string(what) + ": cannot normalize zero-mass label");
  }
  return values / mass;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
  Eigen::VectorXd shifted = scores.array() - scores.maxCoeff();
  Eigen::VectorXd out = shifted.array().exp();
  return out / out.sum();
}

// KL value and gradient over a batch of prediction / target columns.
void kl_batch(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets,
              Eigen::MatrixXd& grads, Eigen::RowVectorXd& losses) {
  const Eigen::MatrixXd clamped = predictions.cwiseMax(kKlClamp);
  // Zero target entries contribute zero: the log factor stays finite after
  // flooring and is multiplied by the zero target.
  losses = (targets.array() *
            (targets.array().max(kLogFloor).log() - clamped.array().log()))
               .colwise()
               .sum();
  grads = -targets.cwiseQuotient(clamped);
}

}  // namespace

DiscreteMeasure predict(const LinearSoftmaxModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.feature_dim()) {
    throw std::invalid_argument("predict: feature dimension mismatch");
  }
  if (!x.allFinite()) throw std::invalid_argument("predict: non-finite input");
  return DiscreteMeasure::normalized(softmax(model.weights * x));
}

int argmax_predict(const LinearSoftmaxModel& model, const Eigen::VectorXd& x) {
  const DiscreteMeasure h = predict(model, x);
  int best = 0;
  for (int i = 1; i < h.size(); ++i) {
    if (h[i] > h[best]) best = i;  // strict: ties keep the lowest index
  }
  return best;
}

LossValueGrad kl_loss(const DiscreteMeasure& h, const DiscreteMeasure& y) {
  if (h.size() != y.size()) throw std::invalid_argument("kl_loss: dimension mismatch");
  if (!y.is_normalized()) throw std::invalid_argument("kl_loss: target must be normalized");
  const Eigen::VectorXd clamped = h.values().cwiseMax(kKlClamp);
  double value = 0.0;
  for (int i = 0; i < y.size(); ++i) {
    if (y[i] > 0.0) value += y[i] * (std::log(y[i]) - std::log(clamped(i)));
  }
  return LossValueGrad{value, -y.values().cwiseQuotient(clamped)};
}

LossValueGrad combined_loss(const DiscreteMeasure& h, const DiscreteMeasure& y,
                            const GroundMetric& metric, const TrainConfig& cfg) {
  auto normalized_target = [&]() {
    return y.is_normalized()
               ? y
               : DiscreteMeasure::normalized(normalize_values(y.values(), "combined_loss"));
  };

  if (cfg.loss_kind == LossKind::kKlOnly) {
    return kl_loss(h, normalized_target());
  }

  LossValueGrad total;
  switch (cfg.loss_kind) {
    case LossKind::kExactW: {
      const ExactSolution solution = exact_transport(h, normalized_target(), metric);
      total = LossValueGrad{solution.cost, dual_subgradient(solution)};
      break;
    }
    case LossKind::kSinkhornW: {
      const SinkhornResult result =
          sinkhorn_normalized(h, normalized_target(), metric, cfg.sinkhorn);
      total = LossValueGrad{result.smoothed_loss,
                            sinkhorn_gradient(result.state, cfg.sinkhorn.lambda)};
      break;
    }
    case LossKind::kRelaxedW: {
      const RelaxedSolution solution = relaxed_transport(h, y, metric, cfg.relaxed);
      total = LossValueGrad{
          solution.objective,
          relaxed_gradient(solution, h, cfg.relaxed.gamma_a, cfg.relaxed.min_mass)};
      break;
    }
    case LossKind::kKlOnly:
      break;  // handled above
  }

  if (cfg.alpha_kl > 0.0) {
    const LossValueGrad kl = kl_loss(h, normalized_target());
    total.value += cfg.alpha_kl * kl.value;
    total.grad += cfg.alpha_kl * kl.grad;
  }
  return total;
}

Eigen::MatrixXd chain_gradient(const LinearSoftmaxModel& model,
                               const Eigen::VectorXd& x,
                               const Eigen::VectorXd& dloss_dh) {
  if (dloss_dh.size() != model.label_count()) {
    throw std::invalid_argument("chain_gradient: gradient dimension mismatch");
  }
  const Eigen::VectorXd s = softmax(model.weights * x);
  const Eigen::VectorXd coef = s.array() * (dloss_dh.array() - s.dot(dloss_dh));
  return coef * x.transpose();
}

TrainResult train_sgd(const Dataset& dataset, const GroundMetric& metric,
                      const TrainConfig& cfg) {
  const int n = dataset.size();
  const int feature_dim = dataset.feature_dim();
  const int label_dim = metric.size();
  if (n == 0) throw std::invalid_argument("train_sgd: empty dataset");
  if (static_cast<int>(dataset.labels.size()) != n) {
    throw std::invalid_argument("train_sgd: feature/label count mismatch");
  }
  if (dataset.label_dim() != label_dim) {
    throw std::invalid_argument("train_sgd: label dimension does not match the metric");
  }
  if (cfg.minibatch < 1) throw std::invalid_argument("train_sgd: minibatch must be positive");
  if (cfg.iterations < 0) throw std::invalid_argument("train_sgd: negative iteration count");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) {
    throw std::invalid_argument("train_sgd: momentum must lie in [0, 1)");
  }

  Rng rng(cfg.rng_seed);
  LinearSoftmaxModel model;
  model.weights.resize(label_dim, feature_dim);
  for (int i = 0; i < label_dim; ++i) {
    for (int j = 0; j < feature_dim; ++j) {
      model.weights(i, j) = kInitStdev * rng.normal();
    }
  }

  TrainResult result;
  result.model = model;
  if (cfg.iterations == 0) return result;

  const bool needs_normalized_targets = cfg.loss_kind != LossKind::kRelaxedW;
  const Eigen::MatrixXd features_t = dataset.features.transpose();  // dim x n
  Eigen::MatrixXd targets(label_dim, n);
  for (int i = 0; i < n; ++i) {
    targets.col(i) = dataset.labels[i].values();
    if (needs_normalized_targets || cfg.alpha_kl > 0.0) {
      targets.col(i) = normalize_values(targets.col(i), "train_sgd");
    }
  }
  // The relaxed W-term sees raw labels; its optional KL term normalizes them
  // on the fly below.
  Eigen::MatrixXd raw_targets;
  if (!needs_normalized_targets) {
    raw_targets.resize(label_dim, n);
    for (int i = 0; i < n; ++i) raw_targets.col(i) = dataset.labels[i].values();
  }

  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(label_dim, feature_dim);
  Eigen::MatrixXd& theta = result.model.weights;
  const int batch = cfg.minibatch;
  std::vector<int> picks(batch);
  Eigen::MatrixXd batch_features(feature_dim, batch);
  Eigen::MatrixXd batch_targets(label_dim, batch);
  Eigen::MatrixXd batch_raw(label_dim, batch);
  double window_sum = 0.0;
  int window_count = 0;

  for (int step = 1; step <= cfg.iterations; ++step) {
    for (int b = 0; b < batch; ++b) {
      picks[b] = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
      batch_features.col(b) = features_t.col(picks[b]);
      batch_targets.col(b) = targets.col(picks[b]);
      if (!needs_normalized_targets) batch_raw.col(b) = raw_targets.col(picks[b]);
    }

    // Forward pass, softmax by column.
    Eigen::MatrixXd activations = theta * batch_features;
    activations.array().rowwise() -= activations.colwise().maxCoeff().array();
    Eigen::MatrixXd predictions = activations.array().exp();
    predictions.array().rowwise() /= predictions.colwise().sum().array();

    Eigen::MatrixXd grads(label_dim, batch);
    Eigen::RowVectorXd losses(batch);
    switch (cfg.loss_kind) {
      case LossKind::kKlOnly:
        kl_batch(predictions, batch_targets, grads, losses);
        break;
      case LossKind::kSinkhornW: {
        const SinkhornBatchResult res =
            sinkhorn_batch(predictions, batch_targets, metric, cfg.sinkhorn);
        grads = res.gradients;
        losses = res.losses;
        break;
      }
      case LossKind::kRelaxedW: {
        const RelaxedBatchResult res =
            relaxed_batch(predictions, batch_raw, metric, cfg.relaxed);
        grads = res.gradients;
        losses = res.objectives;
        break;
      }
      case LossKind::kExactW: {
        for (int b = 0; b < batch; ++b) {
          const ExactSolution solution = exact_transport(
              DiscreteMeasure::normalized(predictions.col(b)),
              DiscreteMeasure::normalized(batch_targets.col(b)), metric);
          losses(b) = solution.cost;
          grads.col(b) = dual_subgradient(solution);
        }
        break;
      }
    }

    if (cfg.alpha_kl > 0.0 && cfg.loss_kind != LossKind::kKlOnly) {
      Eigen::MatrixXd kl_grads(label_dim, batch);
      Eigen::RowVectorXd kl_losses(batch);
      if (needs_normalized_targets) {
        kl_batch(predictions, batch_targets, kl_grads, kl_losses);
      } else {
        Eigen::MatrixXd normalized = batch_raw;
        normalized.array().rowwise() /= normalized.colwise().sum().array();
        kl_batch(predictions, normalized, kl_grads, kl_losses);
      }
      grads += cfg.alpha_kl * kl_grads;
      losses += cfg.alpha_kl * kl_losses;
    }

    const double minibatch_loss = losses.mean();
    if (!std::isfinite(minibatch_loss)) {
      throw std::runtime_error("train_sgd: non-finite loss at iteration " +
                               std::to_string(step));
    }

    // Softmax Jacobian pullback, then average over the minibatch.
    Eigen::MatrixXd weighted = predictions.cwiseProduct(grads);
    const Eigen::RowVectorXd inner = weighted.colwise().sum();
    weighted -= predictions * inner.asDiagonal();
    Eigen::MatrixXd theta_grad =
        (weighted * batch_features.transpose()) / static_cast<double>(batch);
    theta_grad += (2.0 * cfg.l2) * theta;

    velocity = cfg.momentum * velocity - cfg.learning_rate * theta_grad;
    theta += velocity;

    window_sum += minibatch_loss;
    ++window_count;
    if (cfg.log_every > 0 && step % cfg.log_every == 0) {
      result.log.push_back(TrainLogEntry{step, window_sum / window_count});
      window_sum = 0.0;
      window_count = 0;
    }
  }
  return result;
}

double top_k_cost(const DiscreteMeasure& predicted, const std::vector<int>& truth_tags,
                  const GroundMetric& metric_root, int k_eval) {
  const int k = metric_root.size();
  if (predicted.size() != k) throw std::invalid_argument("top_k_cost: dimension mismatch");
  if (truth_tags.empty()) throw std::invalid_argument("top_k_cost: empty truth set");
  if (k_eval < 1 || k_eval > k) throw std::invalid_argument("top_k_cost: bad k_eval");
  for (int tag : truth_tags) {
    if (tag < 0 || tag >= k) throw std::out_of_range("top_k_cost: truth tag out of range");
  }

  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (predicted[a] != predicted[b]) return predicted[a] > predicted[b];
    return a < b;  // ties by lower index
  });

  double total = 0.0;
  for (int rank = 0; rank < k_eval; ++rank) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int tag : truth_tags) {
      nearest = std::min(nearest, metric_root(order[rank], tag));
    }
    total += nearest;
  }
  return total / k_eval;
}

EvalMetrics evaluate(const LinearSoftmaxModel& model, const Dataset& dataset,
                     const GroundMetric& metric_root, int k_eval) {
  if (dataset.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  EvalMetrics metrics;
  for (int i = 0; i < dataset.size(); ++i) {
    const DiscreteMeasure h = predict(model, dataset.features.row(i).transpose());
    std::vector<int> truth;
    for (int tag = 0; tag < dataset.labels[i].size(); ++tag) {
      if (dataset.labels[i][tag] > 0.0) truth.push_back(tag);
    }
    if (truth.empty()) throw std::invalid_argument("evaluate: label with no positive tag");
    int best = 0;
    for (int t = 1; t < h.size(); ++t) {
      if (h[t] > h[best]) best = t;
    }
    metrics.top_k_cost += top_k_cost(h, truth, metric_root, k_eval);
    metrics.mean_semantic_distance += top_k_cost(h, truth, metric_root, 1);
    metrics.argmax_accuracy +=
        std::find(truth.begin(), truth.end(), best) != truth.end() ? 1.0 : 0.0;
  }
  const double n = dataset.size();
  metrics.top_k_cost /= n;
  metrics.mean_semantic_distance /= n;
  metrics.argmax_accuracy /= n;
  return metrics;
}

}  // namespace otloss
