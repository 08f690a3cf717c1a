#ifndef OTLOSS_EXPERIMENTS_HPP_
#define OTLOSS_EXPERIMENTS_HPP_

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "otloss/io.hpp"
#include "otloss/learner.hpp"
#include "otloss/measures.hpp"

namespace otloss {

// ---------------------------------------------------------------------------
// Lattice noise study: classes on a D x D planar lattice, training labels
// flipped to a uniformly random neighbor with the configured probability,
// Wasserstein-trained model compared against the KL baseline by mean planar
// distance between predicted and true class.

struct LatticeConfig {
  std::vector<int> grid_sizes = {3, 4, 5, 6, 7};
  std::vector<double> noise_levels = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int repeats = 10;
  int train_per_class = 30;
  int test_per_class = 100;
  double gaussian_stdev = 0.3;
  std::uint64_t seed = 1;
  // SGD settings shared by both losses; loss_kind picks the Wasserstein side
  // and the baseline always runs KL with the same data, init and batches.
  TrainConfig train;
};

struct LatticeDataset {
  Dataset train;  // labels possibly flipped to neighbors
  Dataset test;   // noise-free
  std::vector<Eigen::Vector2d> points;  // class vertex per label
};

// Samples per-class isotropic Gaussians around the lattice vertices.
// Neighboring vertices sit at distance 1. With probability `noise` a training
// label is replaced by a uniformly random lattice neighbor (never the true
// class); the test split is clean. Deterministic per seed.
LatticeDataset generate_lattice_dataset(int grid_size, double noise,
                                        int train_per_class, int test_per_class,
                                        double stdev, std::uint64_t seed);

struct LatticeCell {
  int grid_size = 0;
  double noise = 0.0;
  int repeat = 0;
  double wasserstein_distance = 0.0;  // NaN when training diverged
  double kl_distance = 0.0;
  bool wasserstein_failed = false;
  bool kl_failed = false;
};

struct LatticeResults {
  std::vector<LatticeCell> cells;
  // Aggregates over repeats (one row per grid x noise combination) and the
  // two marginal averages.
  std::vector<std::array<double, 4>> by_grid_and_noise;  // D, noise, w, kl
  std::vector<std::array<double, 3>> by_grid;            // D, w, kl
  std::vector<std::array<double, 3>> by_noise;           // noise, w, kl
};

// Runs every (grid size, noise, repeat) cell, both models per cell, in a
// small thread pool. Cell seeds derive from (seed, cell index), so parallel
// and serial runs produce identical numbers. Writes lattice_cells.csv,
// lattice_grid.csv, lattice_by_grid.csv, lattice_by_noise.csv and
// manifest.json under out_dir (skipped when out_dir is empty).
LatticeResults run_lattice_experiment(const LatticeConfig& cfg,
                                      const std::string& out_dir);

// ---------------------------------------------------------------------------
// Digit metric study: one model per metric exponent p on the |i - j|^p line
// metric (rescaled into [0, 1)), recording the mean predicted probability
// vector per true digit over the test set.

struct DigitStudyConfig {
  std::vector<double> p_values = {0.1, 1.0, 4.0};
  int train_subset = 5000;
  int test_subset = 1000;
  std::uint64_t seed = 1;
  TrainConfig train;  // loss_kind/sinkhorn settings for the Wasserstein loss
};

struct DigitStudyRow {
  double p = 0.0;
  int target_digit = 0;
  int test_count = 0;
  Eigen::VectorXd mean_probabilities;  // length 10
};

struct DigitStudyResults {
  std::vector<DigitStudyRow> rows;
  // Test-set means per p value, aggregated over all examples.
  std::vector<double> true_digit_probability;
  std::vector<double> adjacent_digit_probability;  // |predicted - true| == 1
};

// data_dir holds the four IDX files. Writes posteriors.csv, summary.csv and
// manifest.json under out_dir (skipped when out_dir is empty).
DigitStudyResults run_digit_study(const DigitStudyConfig& cfg,
                                  const std::string& data_dir,
                                  const std::string& out_dir);

// ---------------------------------------------------------------------------
// Synthetic tag world: a stand-in multi-label corpus. Tags embed as random
// unit vectors (their Euclidean distances form the tag metric); an example
// picks a few tags and observes a noisy mixture of their embeddings.

struct TagWorldConfig {
  int tag_count = 50;
  int embed_dim = 10;
  int tags_per_example = 3;
  int train_count = 400;
  int test_count = 100;
  double feature_noise = 0.1;
  std::uint64_t seed = 1;
};

struct TagWorld {
  Dataset train;
  Dataset test;
  GroundMetric metric;  // tag distances, power 1
  std::vector<std::vector<int>> train_tags;
  std::vector<std::vector<int>> test_tags;
};

TagWorld generate_tag_world(const TagWorldConfig& cfg);

// Collapses near-equivalent tags within each tag set: single-linkage
// clusters at the distance threshold, one seeded-random survivor per
// cluster.
std::vector<std::vector<int>> reduce_redundancy(
    const std::vector<std::vector<int>>& tag_sets, const GroundMetric& metric_root,
    double threshold, std::uint64_t seed);

// Small-sample binary-relevance AUC: per example, the probability that a
// random (positive tag, negative tag) pair is ranked correctly, ties at 1/2;
// averaged over examples.
double mean_pairwise_auc(const std::vector<DiscreteMeasure>& predictions,
                         const std::vector<std::vector<int>>& truth_tags);

// Manifest written next to experiment outputs: config fingerprint, seed and
// library version. Content is deterministic for identical configurations.
void write_manifest(const std::string& path, const KeyValueConfig& config);

}  // namespace otloss

#endif  // OTLOSS_EXPERIMENTS_HPP_
