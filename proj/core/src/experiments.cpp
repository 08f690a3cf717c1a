#include "otloss/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "otloss/idx.hpp"
#include "otloss/rng.hpp"
#include "otloss/version.hpp"

namespace otloss {

namespace {

namespace fs = std::filesystem;

std::vector<int> lattice_neighbors(int grid_size, int cls) {
  const int x = cls / grid_size;
  const int y = cls % grid_size;
  std::vector<int> neighbors;
  if (x > 0) neighbors.push_back(cls - grid_size);
  if (x < grid_size - 1) neighbors.push_back(cls + grid_size);
  if (y > 0) neighbors.push_back(cls - 1);
  if (y < grid_size - 1) neighbors.push_back(cls + 1);
  return neighbors;
}

Dataset sample_lattice_split(int grid_size, double noise, int per_class,
                             double stdev, Rng& rng,
                             const std::vector<Eigen::Vector2d>& points) {
  const int classes = grid_size * grid_size;
  const int n = classes * per_class;
  Dataset split;
  split.features.resize(n, 2);
  split.labels.reserve(n);
  int row = 0;
  for (int cls = 0; cls < classes; ++cls) {
    const std::vector<int> neighbors = lattice_neighbors(grid_size, cls);
    for (int s = 0; s < per_class; ++s, ++row) {
      split.features(row, 0) = points[cls].x() + stdev * rng.normal();
      split.features(row, 1) = points[cls].y() + stdev * rng.normal();
      int label = cls;
      if (noise > 0.0 && rng.uniform() < noise) {
        label = neighbors[rng.uniform_index(neighbors.size())];
      }
      split.labels.push_back(one_hot(classes, label));
    }
  }
  return split;
}

// Runs `work(i)` for i in [0, count) over a small pool; results must land in
// preallocated slots so scheduling cannot affect the output.
template <typename Fn>
void parallel_for(int count, const Fn& work) {
  const unsigned pool =
      std::max(1u, std::min(std::thread::hardware_concurrency(),
                            static_cast<unsigned>(count)));
  if (pool <= 1) {
    for (int i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto runner = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= count || failed.load()) break;
      try {
        work(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
        break;
      }
    }
  };
  std::vector<std::thread> threads;
  for (unsigned t = 0; t < pool; ++t) threads.emplace_back(runner);
  for (std::thread& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

double mean_plane_distance(const LinearSoftmaxModel& model, const Dataset& test,
                           const std::vector<Eigen::Vector2d>& points) {
  double total = 0.0;
  for (int i = 0; i < test.size(); ++i) {
    const int predicted = argmax_predict(model, test.features.row(i).transpose());
    int truth = 0;
    for (int c = 1; c < test.labels[i].size(); ++c) {
      if (test.labels[i][c] > test.labels[i][truth]) truth = c;
    }
    total += (points[predicted] - points[truth]).norm();
  }
  return total / test.size();
}

std::string csv_bool(bool value) { return value ? "1" : "0"; }

}  // namespace

LatticeDataset generate_lattice_dataset(int grid_size, double noise,
                                        int train_per_class, int test_per_class,
                                        double stdev, std::uint64_t seed) {
  if (grid_size < 2) throw std::invalid_argument("generate_lattice_dataset: grid_size must be at least 2");
  if (noise < 0.0 || noise > 1.0) {
    throw std::invalid_argument("generate_lattice_dataset: noise must lie in [0, 1]");
  }
  LatticeDataset data;
  data.points.reserve(grid_size * grid_size);
  for (int cls = 0; cls < grid_size * grid_size; ++cls) {
    data.points.emplace_back(cls / grid_size, cls % grid_size);
  }
  Rng train_rng(derive_seed(seed, 1));
  Rng test_rng(derive_seed(seed, 2));
  data.train = sample_lattice_split(grid_size, noise, train_per_class, stdev,
                                    train_rng, data.points);
  data.test =
      sample_lattice_split(grid_size, 0.0, test_per_class, stdev, test_rng, data.points);
  return data;
}

LatticeResults run_lattice_experiment(const LatticeConfig& cfg,
                                      const std::string& out_dir) {
  const int grid_count = static_cast<int>(cfg.grid_sizes.size());
  const int noise_count = static_cast<int>(cfg.noise_levels.size());
  const int cell_count = grid_count * noise_count * cfg.repeats;
  if (cell_count == 0) throw std::invalid_argument("run_lattice_experiment: empty grid");

  LatticeResults results;
  results.cells.resize(cell_count);

  parallel_for(cell_count, [&](int index) {
    const int repeat = index % cfg.repeats;
    const int noise_index = (index / cfg.repeats) % noise_count;
    const int grid_index = index / (cfg.repeats * noise_count);
    const int grid_size = cfg.grid_sizes[grid_index];
    const double noise = cfg.noise_levels[noise_index];

    const std::uint64_t cell_seed = derive_seed(cfg.seed, index);
    const LatticeDataset data =
        generate_lattice_dataset(grid_size, noise, cfg.train_per_class,
                                 cfg.test_per_class, cfg.gaussian_stdev,
                                 derive_seed(cell_seed, 1));
    const GroundMetric metric = euclidean_metric(data.points, 1.0);

    LatticeCell& cell = results.cells[index];
    cell.grid_size = grid_size;
    cell.noise = noise;
    cell.repeat = repeat;

    TrainConfig wasserstein_cfg = cfg.train;
    wasserstein_cfg.rng_seed = derive_seed(cell_seed, 2);
    TrainConfig kl_cfg = wasserstein_cfg;  // same init and minibatch stream
    kl_cfg.loss_kind = LossKind::kKlOnly;
    kl_cfg.alpha_kl = 0.0;

    try {
      const TrainResult trained = train_sgd(data.train, metric, wasserstein_cfg);
      cell.wasserstein_distance =
          mean_plane_distance(trained.model, data.test, data.points);
    } catch (const std::exception&) {
      cell.wasserstein_failed = true;
      cell.wasserstein_distance = std::numeric_limits<double>::quiet_NaN();
    }
    try {
      const TrainResult trained = train_sgd(data.train, metric, kl_cfg);
      cell.kl_distance = mean_plane_distance(trained.model, data.test, data.points);
    } catch (const std::exception&) {
      cell.kl_failed = true;
      cell.kl_distance = std::numeric_limits<double>::quiet_NaN();
    }
  });

  // Aggregations skip failed cells.
  auto aggregate = [&](auto filter) {
    double w_sum = 0.0, kl_sum = 0.0;
    int w_n = 0, kl_n = 0;
    for (const LatticeCell& cell : results.cells) {
      if (!filter(cell)) continue;
      if (!cell.wasserstein_failed) {
        w_sum += cell.wasserstein_distance;
        ++w_n;
      }
      if (!cell.kl_failed) {
        kl_sum += cell.kl_distance;
        ++kl_n;
      }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return std::pair<double, double>{w_n ? w_sum / w_n : nan,
                                     kl_n ? kl_sum / kl_n : nan};
  };

  for (int g = 0; g < grid_count; ++g) {
    for (int v = 0; v < noise_count; ++v) {
      const auto [w, kl] = aggregate([&](const LatticeCell& c) {
        return c.grid_size == cfg.grid_sizes[g] && c.noise == cfg.noise_levels[v];
      });
      results.by_grid_and_noise.push_back(
          {static_cast<double>(cfg.grid_sizes[g]), cfg.noise_levels[v], w, kl});
    }
  }
  for (int g = 0; g < grid_count; ++g) {
    const auto [w, kl] = aggregate(
        [&](const LatticeCell& c) { return c.grid_size == cfg.grid_sizes[g]; });
    results.by_grid.push_back({static_cast<double>(cfg.grid_sizes[g]), w, kl});
  }
  for (int v = 0; v < noise_count; ++v) {
    const auto [w, kl] = aggregate(
        [&](const LatticeCell& c) { return c.noise == cfg.noise_levels[v]; });
    results.by_noise.push_back({cfg.noise_levels[v], w, kl});
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ostringstream cells;
    cells << "grid_size,noise,repeat,wasserstein_distance,kl_distance,"
             "wasserstein_failed,kl_failed\n";
    for (const LatticeCell& c : results.cells) {
      cells << c.grid_size << ',' << format_double(c.noise) << ',' << c.repeat << ','
            << format_double(c.wasserstein_distance) << ','
            << format_double(c.kl_distance) << ',' << csv_bool(c.wasserstein_failed)
            << ',' << csv_bool(c.kl_failed) << '\n';
    }
    write_text_file((fs::path(out_dir) / "lattice_cells.csv").string(), cells.str());

    std::ostringstream grid;
    grid << "grid_size,noise,wasserstein_distance,kl_distance\n";
    for (const auto& row : results.by_grid_and_noise) {
      grid << static_cast<int>(row[0]) << ',' << format_double(row[1]) << ','
           << format_double(row[2]) << ',' << format_double(row[3]) << '\n';
    }
    write_text_file((fs::path(out_dir) / "lattice_grid.csv").string(), grid.str());

    std::ostringstream by_grid;
    by_grid << "grid_size,wasserstein_distance,kl_distance\n";
    for (const auto& row : results.by_grid) {
      by_grid << static_cast<int>(row[0]) << ',' << format_double(row[1]) << ','
              << format_double(row[2]) << '\n';
    }
    write_text_file((fs::path(out_dir) / "lattice_by_grid.csv").string(), by_grid.str());

    std::ostringstream by_noise;
    by_noise << "noise,wasserstein_distance,kl_distance\n";
    for (const auto& row : results.by_noise) {
      by_noise << format_double(row[0]) << ',' << format_double(row[1]) << ','
               << format_double(row[2]) << '\n';
    }
    write_text_file((fs::path(out_dir) / "lattice_by_noise.csv").string(),
                    by_noise.str());

    KeyValueConfig manifest_cfg;
    manifest_cfg.set("experiment", "lattice");
    {
      std::ostringstream grids, noises;
      for (std::size_t i = 0; i < cfg.grid_sizes.size(); ++i) {
        grids << (i ? "," : "") << cfg.grid_sizes[i];
      }
      for (std::size_t i = 0; i < cfg.noise_levels.size(); ++i) {
        noises << (i ? "," : "") << format_double(cfg.noise_levels[i]);
      }
      manifest_cfg.set("grid_sizes", grids.str());
      manifest_cfg.set("noise_levels", noises.str());
    }
    manifest_cfg.set("repeats", std::to_string(cfg.repeats));
    manifest_cfg.set("train_per_class", std::to_string(cfg.train_per_class));
    manifest_cfg.set("test_per_class", std::to_string(cfg.test_per_class));
    manifest_cfg.set("gaussian_stdev", format_double(cfg.gaussian_stdev));
    manifest_cfg.set("seed", std::to_string(cfg.seed));
    manifest_cfg.set("iterations", std::to_string(cfg.train.iterations));
    manifest_cfg.set("minibatch", std::to_string(cfg.train.minibatch));
    manifest_cfg.set("learning_rate", format_double(cfg.train.learning_rate));
    manifest_cfg.set("lambda", format_double(cfg.train.sinkhorn.lambda));
    manifest_cfg.set("sinkhorn_iters", std::to_string(cfg.train.sinkhorn.fixed_iters));
    write_manifest((fs::path(out_dir) / "manifest.json").string(), manifest_cfg);
  }
  return results;
}

DigitStudyResults run_digit_study(const DigitStudyConfig& cfg,
                                  const std::string& data_dir,
                                  const std::string& out_dir) {
  if (cfg.p_values.empty()) throw std::invalid_argument("run_digit_study: no p values");
  const DigitData data =
      load_digit_data(data_dir, cfg.train_subset, cfg.test_subset, cfg.seed);

  DigitStudyResults results;
  for (std::size_t ip = 0; ip < cfg.p_values.size(); ++ip) {
    const double p = cfg.p_values[ip];
    const GroundMetric metric = line_metric(10, p, /*rescale=*/true);
    TrainConfig train_cfg = cfg.train;
    train_cfg.rng_seed = derive_seed(cfg.seed, 100 + ip);
    const TrainResult trained = train_sgd(data.train, metric, train_cfg);

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(10, 10);  // target x predicted
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(10);
    double true_sum = 0.0, adjacent_sum = 0.0;
    for (int i = 0; i < data.test.size(); ++i) {
      const DiscreteMeasure h =
          predict(trained.model, data.test.features.row(i).transpose());
      int truth = 0;
      for (int c = 1; c < 10; ++c) {
        if (data.test.labels[i][c] > data.test.labels[i][truth]) truth = c;
      }
      sums.row(truth) += h.values().transpose();
      counts(truth) += 1;
      true_sum += h[truth];
      if (truth > 0) adjacent_sum += h[truth - 1];
      if (truth < 9) adjacent_sum += h[truth + 1];
    }
    for (int target = 0; target < 10; ++target) {
      DigitStudyRow row;
      row.p = p;
      row.target_digit = target;
      row.test_count = counts(target);
      if (counts(target) > 0) {
        row.mean_probabilities = (sums.row(target) / counts(target)).transpose();
      } else {
        row.mean_probabilities = Eigen::VectorXd::Zero(10);
      }
      results.rows.push_back(std::move(row));
    }
    results.true_digit_probability.push_back(true_sum / data.test.size());
    results.adjacent_digit_probability.push_back(adjacent_sum / data.test.size());
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ostringstream posteriors;
    posteriors << "p,target_digit,test_count";
    for (int d = 0; d < 10; ++d) posteriors << ",prob_" << d;
    posteriors << '\n';
    for (const DigitStudyRow& row : results.rows) {
      posteriors << format_double(row.p) << ',' << row.target_digit << ','
                 << row.test_count;
      for (int d = 0; d < 10; ++d) {
        posteriors << ',' << format_double(row.mean_probabilities(d));
      }
      posteriors << '\n';
    }
    write_text_file((fs::path(out_dir) / "posteriors.csv").string(), posteriors.str());

    std::ostringstream summary;
    summary << "p,true_digit_probability,adjacent_digit_probability\n";
    for (std::size_t ip = 0; ip < cfg.p_values.size(); ++ip) {
      summary << format_double(cfg.p_values[ip]) << ','
              << format_double(results.true_digit_probability[ip]) << ','
              << format_double(results.adjacent_digit_probability[ip]) << '\n';
    }
    write_text_file((fs::path(out_dir) / "summary.csv").string(), summary.str());

    KeyValueConfig manifest_cfg;
    manifest_cfg.set("experiment", "digits");
    {
      std::ostringstream ps;
      for (std::size_t i = 0; i < cfg.p_values.size(); ++i) {
        ps << (i ? "," : "") << format_double(cfg.p_values[i]);
      }
      manifest_cfg.set("p_values", ps.str());
    }
    manifest_cfg.set("train_subset", std::to_string(cfg.train_subset));
    manifest_cfg.set("test_subset", std::to_string(cfg.test_subset));
    manifest_cfg.set("seed", std::to_string(cfg.seed));
    manifest_cfg.set("iterations", std::to_string(cfg.train.iterations));
    manifest_cfg.set("minibatch", std::to_string(cfg.train.minibatch));
    manifest_cfg.set("learning_rate", format_double(cfg.train.learning_rate));
    manifest_cfg.set("lambda", format_double(cfg.train.sinkhorn.lambda));
    manifest_cfg.set("sinkhorn_iters", std::to_string(cfg.train.sinkhorn.fixed_iters));
    write_manifest((fs::path(out_dir) / "manifest.json").string(), manifest_cfg);
  }
  return results;
}

TagWorld generate_tag_world(const TagWorldConfig& cfg) {
  if (cfg.tag_count < 2 || cfg.embed_dim < 1) {
    throw std::invalid_argument("generate_tag_world: bad tag_count or embed_dim");
  }
  if (cfg.tags_per_example < 1 || cfg.tags_per_example > cfg.tag_count) {
    throw std::invalid_argument("generate_tag_world: bad tags_per_example");
  }
  Rng rng(derive_seed(cfg.seed, 31));
  std::vector<Eigen::VectorXd> embeddings;
  embeddings.reserve(cfg.tag_count);
  for (int t = 0; t < cfg.tag_count; ++t) {
    Eigen::VectorXd v(cfg.embed_dim);
    for (int d = 0; d < cfg.embed_dim; ++d) v(d) = rng.normal();
    embeddings.push_back(v.normalized());
  }
  Eigen::MatrixXd costs(cfg.tag_count, cfg.tag_count);
  for (int i = 0; i < cfg.tag_count; ++i) {
    costs(i, i) = 0.0;
    for (int j = i + 1; j < cfg.tag_count; ++j) {
      const double d = (embeddings[i] - embeddings[j]).norm();
      costs(i, j) = d;
      costs(j, i) = d;
    }
  }

  auto make_split = [&](int count, Rng& split_rng, Dataset& split,
                        std::vector<std::vector<int>>& tags_out) {
    split.features.resize(count, cfg.embed_dim);
    split.labels.reserve(count);
    tags_out.reserve(count);
    std::vector<int> pool(cfg.tag_count);
    for (int i = 0; i < count; ++i) {
      std::iota(pool.begin(), pool.end(), 0);
      std::vector<int> chosen;
      for (int t = 0; t < cfg.tags_per_example; ++t) {
        const int j = t + static_cast<int>(split_rng.uniform_index(
                              static_cast<std::uint64_t>(cfg.tag_count - t)));
        std::swap(pool[t], pool[j]);
        chosen.push_back(pool[t]);
      }
      std::sort(chosen.begin(), chosen.end());
      Eigen::VectorXd feature = Eigen::VectorXd::Zero(cfg.embed_dim);
      for (int tag : chosen) feature += embeddings[tag];
      feature /= chosen.size();
      for (int d = 0; d < cfg.embed_dim; ++d) {
        feature(d) += cfg.feature_noise * split_rng.normal();
      }
      split.features.row(i) = feature.transpose();
      Eigen::VectorXd label = Eigen::VectorXd::Zero(cfg.tag_count);
      for (int tag : chosen) label(tag) = 1.0 / chosen.size();
      split.labels.push_back(DiscreteMeasure::normalized(std::move(label)));
      tags_out.push_back(std::move(chosen));
    }
  };

  Rng train_rng(derive_seed(cfg.seed, 32));
  Rng test_rng(derive_seed(cfg.seed, 33));
  Dataset train, test;
  std::vector<std::vector<int>> train_tags, test_tags;
  make_split(cfg.train_count, train_rng, train, train_tags);
  make_split(cfg.test_count, test_rng, test, test_tags);
  return TagWorld{std::move(train), std::move(test),
                  GroundMetric(std::move(costs), 1.0), std::move(train_tags),
                  std::move(test_tags)};
}

std::vector<std::vector<int>> reduce_redundancy(
    const std::vector<std::vector<int>>& tag_sets, const GroundMetric& metric_root,
    double threshold, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<int>> reduced;
  reduced.reserve(tag_sets.size());
  for (const std::vector<int>& tags : tag_sets) {
    // Union-find over this example's tags; single linkage at the threshold.
    std::vector<int> parent(tags.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
      while (parent[a] != a) {
        parent[a] = parent[parent[a]];
        a = parent[a];
      }
      return a;
    };
    for (std::size_t i = 0; i < tags.size(); ++i) {
      for (std::size_t j = i + 1; j < tags.size(); ++j) {
        if (metric_root(tags[i], tags[j]) <= threshold) {
          parent[find(static_cast<int>(j))] = find(static_cast<int>(i));
        }
      }
    }
    // Clusters keyed by their first member so the draw order is stable.
    std::vector<std::vector<int>> clusters;
    std::vector<int> root_to_cluster(tags.size(), -1);
    for (std::size_t i = 0; i < tags.size(); ++i) {
      const int root = find(static_cast<int>(i));
      if (root_to_cluster[root] < 0) {
        root_to_cluster[root] = static_cast<int>(clusters.size());
        clusters.emplace_back();
      }
      clusters[root_to_cluster[root]].push_back(tags[i]);
    }
    std::vector<int> survivors;
    survivors.reserve(clusters.size());
    for (std::vector<int>& cluster : clusters) {
      std::sort(cluster.begin(), cluster.end());
      survivors.push_back(cluster[rng.uniform_index(cluster.size())]);
    }
    std::sort(survivors.begin(), survivors.end());
    reduced.push_back(std::move(survivors));
  }
  return reduced;
}

double mean_pairwise_auc(const std::vector<DiscreteMeasure>& predictions,
                         const std::vector<std::vector<int>>& truth_tags) {
  if (predictions.size() != truth_tags.size()) {
    throw std::invalid_argument("mean_pairwise_auc: size mismatch");
  }
  double total = 0.0;
  int counted = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const DiscreteMeasure& h = predictions[i];
    std::vector<bool> positive(h.size(), false);
    for (int tag : truth_tags[i]) positive[tag] = true;
    double wins = 0.0;
    long pairs = 0;
    for (int pos = 0; pos < h.size(); ++pos) {
      if (!positive[pos]) continue;
      for (int neg = 0; neg < h.size(); ++neg) {
        if (positive[neg]) continue;
        ++pairs;
        if (h[pos] > h[neg]) {
          wins += 1.0;
        } else if (h[pos] == h[neg]) {
          wins += 0.5;
        }
      }
    }
    if (pairs == 0) continue;  // all-positive or all-negative example
    total += wins / pairs;
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("mean_pairwise_auc: no scorable example");
  return total / counted;
}

void write_manifest(const std::string& path, const KeyValueConfig& config) {
  nlohmann::json manifest;
  {
    std::ostringstream hex;
    hex << "0x" << std::hex << config.fingerprint();
    manifest["config_hash"] = hex.str();
  }
  manifest["seed"] = config.get_uint64("seed", 0);
  manifest["version"] = kVersion;
  nlohmann::json entries;
  for (const auto& [key, value] : config.entries()) entries[key] = value;
  manifest["config"] = entries;
  write_text_file(path, manifest.dump(2) + "\n");
}

}  // namespace otloss
