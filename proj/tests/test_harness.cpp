#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "otloss/experiments.hpp"
#include "otloss/idx.hpp"
#include "otloss/io.hpp"
#include "support.hpp"

using namespace otloss;

namespace {

namespace fs = std::filesystem;

int argmax_label(const DiscreteMeasure& label) {
  int best = 0;
  for (int i = 1; i < label.size(); ++i) {
    if (label[i] > label[best]) best = i;
  }
  return best;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("clean lattice labels are the nearest vertex class") {
  const LatticeDataset data = generate_lattice_dataset(3, 0.0, 20, 5, 0.3, 7);
  REQUIRE(data.train.size() == 9 * 20);
  for (int i = 0; i < data.train.size(); ++i) {
    // Labels were assigned before any flip, so at noise zero they equal the
    // generating class regardless of where the Gaussian sample landed.
    const int label = argmax_label(data.train.labels[i]);
    CHECK(label == i / 20);
  }
}

TEST_CASE("full noise always flips to a unit-distance neighbor") {
  const int grid = 4;
  const LatticeDataset data = generate_lattice_dataset(grid, 1.0, 15, 5, 0.3, 11);
  for (int i = 0; i < data.train.size(); ++i) {
    const int truth = i / 15;
    const int label = argmax_label(data.train.labels[i]);
    CHECK(label != truth);
    CHECK((data.points[label] - data.points[truth]).norm() == doctest::Approx(1.0));
  }
  // The test split is noise-free.
  for (int i = 0; i < data.test.size(); ++i) {
    CHECK(argmax_label(data.test.labels[i]) == i / 5);
  }
}

TEST_CASE("empirical flip rate concentrates around the noise level") {
  const int per_class = 1250;  // 9 classes -> 11250 samples
  const LatticeDataset data = generate_lattice_dataset(3, 0.5, per_class, 1, 0.3, 13);
  int flipped = 0;
  for (int i = 0; i < data.train.size(); ++i) {
    if (argmax_label(data.train.labels[i]) != i / per_class) ++flipped;
  }
  const double rate = static_cast<double>(flipped) / data.train.size();
  CHECK(rate == doctest::Approx(0.5).epsilon(0.04));  // 0.5 +/- 0.02
}

TEST_CASE("lattice generation is reproducible per seed") {
  const LatticeDataset a = generate_lattice_dataset(4, 0.3, 10, 10, 0.3, 99);
  const LatticeDataset b = generate_lattice_dataset(4, 0.3, 10, 10, 0.3, 99);
  CHECK((a.train.features.array() == b.train.features.array()).all());
  CHECK((a.test.features.array() == b.test.features.array()).all());
  for (int i = 0; i < a.train.size(); ++i) {
    CHECK(argmax_label(a.train.labels[i]) == argmax_label(b.train.labels[i]));
  }
  const LatticeDataset c = generate_lattice_dataset(4, 0.3, 10, 10, 0.3, 100);
  CHECK(!(a.train.features.array() == c.train.features.array()).all());
}

TEST_CASE("idx files round-trip byte for byte") {
  TempDir dir("otloss_idx_test");
  IdxImages images;
  images.count = 3;
  images.rows = 2;
  images.cols = 2;
  images.pixels = {0, 255, 7, 13, 1, 2, 3, 4, 250, 251, 252, 253};
  const std::string image_path = (dir.path / "images").string();
  write_idx_images(image_path, images);
  const IdxImages loaded = read_idx_images(image_path);
  CHECK(loaded.count == 3);
  CHECK(loaded.rows == 2);
  CHECK(loaded.cols == 2);
  CHECK(loaded.pixels == images.pixels);
  // The file itself reproduces exactly when rewritten.
  const std::string copy_path = (dir.path / "images2").string();
  write_idx_images(copy_path, loaded);
  CHECK(read_text_file(image_path) == read_text_file(copy_path));

  const std::vector<std::uint8_t> labels = {0, 9, 4};
  const std::string label_path = (dir.path / "labels").string();
  write_idx_labels(label_path, labels);
  CHECK(read_idx_labels(label_path) == labels);
}

TEST_CASE("idx loader rejects bad magic and truncation") {
  TempDir dir("otloss_idx_bad");
  const std::string path = (dir.path / "file").string();
  write_text_file(path, std::string("\x00\x00\x08\x01\x00\x00\x00\x02\x05\x07", 10));
  CHECK_THROWS_AS(read_idx_images(path), std::runtime_error);  // label magic
  write_text_file(path, std::string("\x00\x00\x08\x03\x00\x00\x00\x02", 8));
  CHECK_THROWS_AS(read_idx_images(path), std::runtime_error);  // truncated dims
  write_text_file(path, std::string("\x00\x00\x08\x01\x00\x00\x00\x05\x01\x02", 10));
  CHECK_THROWS_AS(read_idx_labels(path), std::runtime_error);  // missing bytes
}

TEST_CASE("synthetic digits load as a labeled dataset") {
  TempDir dir("otloss_synth_digits");
  write_synthetic_digits(dir.path.string(), 120, 40, 17);
  const IdxImages raw = read_idx_images((dir.path / "train-images-idx3-ubyte").string());
  CHECK(raw.count == 120);
  CHECK(raw.rows == 28);
  CHECK(raw.cols == 28);

  const DigitData data = load_digit_data(dir.path.string(), 100, 25, 23);
  CHECK(data.train.size() == 100);
  CHECK(data.test.size() == 25);
  CHECK(data.train.feature_dim() == 784);
  for (int i = 0; i < data.train.size(); ++i) {
    const int label = argmax_label(data.train.labels[i]);
    CHECK(label >= 0);
    CHECK(label <= 9);
    CHECK(data.train.features.row(i).minCoeff() >= 0.0);
    CHECK(data.train.features.row(i).maxCoeff() <= 1.0);
  }
  // Subset selection is deterministic per seed.
  const DigitData again = load_digit_data(dir.path.string(), 100, 25, 23);
  CHECK((again.train.features.array() == data.train.features.array()).all());
}

TEST_CASE("redundancy reduction follows single linkage") {
  // Tags on a line: 0 at x=0, 1 at x=1, 2 at x=2, 3 far away at x=10.
  std::vector<Eigen::Vector2d> points = {{0, 0}, {1, 0}, {2, 0}, {10, 0}};
  const GroundMetric metric = euclidean_metric(points, 1.0);

  // All tags farther apart than the threshold stay untouched.
  const auto unchanged = reduce_redundancy({{0, 3}}, metric, 1.3, 5);
  CHECK(unchanged == std::vector<std::vector<int>>{{0, 3}});

  // Chain 0-1-2 merges through single linkage even though d(0,2) = 2.
  const auto chained = reduce_redundancy({{0, 1, 2}}, metric, 1.3, 5);
  REQUIRE(chained.size() == 1);
  CHECK(chained[0].size() == 1);

  // Distance-zero duplicates collapse to a single survivor.
  std::vector<Eigen::Vector2d> dup_points = {{0, 0}, {0, 0}, {5, 0}};
  const GroundMetric dup_metric = euclidean_metric(dup_points, 1.0);
  const auto deduped = reduce_redundancy({{0, 1, 2}}, dup_metric, 1.3, 5);
  REQUIRE(deduped.size() == 1);
  REQUIRE(deduped[0].size() == 2);
  CHECK(deduped[0][1] == 2);
  CHECK((deduped[0][0] == 0 || deduped[0][0] == 1));

  // Reduction is deterministic per seed.
  CHECK(reduce_redundancy({{0, 1, 2}}, dup_metric, 1.3, 5) == deduped);
}

TEST_CASE("tag world generates consistent multi-label data") {
  TagWorldConfig cfg;
  cfg.tag_count = 12;
  cfg.embed_dim = 6;
  cfg.tags_per_example = 3;
  cfg.train_count = 40;
  cfg.test_count = 10;
  cfg.seed = 29;
  const TagWorld world = generate_tag_world(cfg);
  CHECK(world.metric.size() == 12);
  CHECK(world.train.size() == 40);
  REQUIRE(world.train_tags.size() == 40);
  for (int i = 0; i < 40; ++i) {
    CHECK(world.train_tags[i].size() == 3);
    double mass = 0.0;
    for (int tag : world.train_tags[i]) mass += world.train.labels[i][tag];
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("pairwise AUC scores ranked relevance") {
  Eigen::VectorXd good(4), bad(4), flat(4);
  good << 0.4, 0.4, 0.1, 0.1;
  bad << 0.1, 0.1, 0.4, 0.4;
  flat << 0.25, 0.25, 0.25, 0.25;
  const std::vector<std::vector<int>> truth = {{0, 1}};
  CHECK(mean_pairwise_auc({DiscreteMeasure::normalized(good)}, truth) == 1.0);
  CHECK(mean_pairwise_auc({DiscreteMeasure::normalized(bad)}, truth) == 0.0);
  CHECK(mean_pairwise_auc({DiscreteMeasure::normalized(flat)}, truth) == 0.5);
}

TEST_CASE("tiny lattice experiment emits reloadable artifacts") {
  TempDir dir("otloss_lattice_smoke");
  LatticeConfig cfg;
  cfg.grid_sizes = {3};
  cfg.noise_levels = {0.2, 0.6};
  cfg.repeats = 2;
  cfg.train_per_class = 12;
  cfg.test_per_class = 12;
  cfg.seed = 77;
  cfg.train.loss_kind = LossKind::kSinkhornW;
  cfg.train.sinkhorn.lambda = 30.0;
  cfg.train.sinkhorn.fixed_iters = 10;
  cfg.train.iterations = 120;
  cfg.train.minibatch = 32;
  cfg.train.learning_rate = 0.3;

  const LatticeResults results = run_lattice_experiment(cfg, dir.path.string());
  REQUIRE(results.cells.size() == 4);
  CHECK(results.by_grid_and_noise.size() == 2);  // |grids| x |noises|
  CHECK(results.by_noise.size() == 2);

  // Emitted CSV reloads to exactly the in-memory values.
  const std::string cells_csv = read_text_file((dir.path / "lattice_cells.csv").string());
  std::istringstream lines(cells_csv);
  std::string header, line;
  std::getline(lines, header);
  for (const LatticeCell& cell : results.cells) {
    REQUIRE(std::getline(lines, line));
    std::istringstream fields(line);
    std::string field;
    std::getline(fields, field, ',');
    CHECK(std::stoi(field) == cell.grid_size);
    std::getline(fields, field, ',');
    CHECK(parse_double(field) == cell.noise);
    std::getline(fields, field, ',');
    CHECK(std::stoi(field) == cell.repeat);
    std::getline(fields, field, ',');
    CHECK(parse_double(field) == cell.wasserstein_distance);
    std::getline(fields, field, ',');
    CHECK(parse_double(field) == cell.kl_distance);
  }
  CHECK(fs::exists(dir.path / "manifest.json"));
  CHECK(fs::exists(dir.path / "lattice_by_grid.csv"));
  CHECK(fs::exists(dir.path / "lattice_by_noise.csv"));
}

TEST_CASE("digit study rows are normalized and deterministic") {
  TempDir dir("otloss_digit_smoke");
  write_synthetic_digits(dir.path.string(), 400, 120, 31);

  DigitStudyConfig cfg;
  cfg.p_values = {0.5, 2.0};
  cfg.train_subset = 300;
  cfg.test_subset = 100;
  cfg.seed = 37;
  cfg.train.loss_kind = LossKind::kSinkhornW;
  cfg.train.sinkhorn.lambda = 50.0;
  cfg.train.sinkhorn.fixed_iters = 10;
  cfg.train.iterations = 250;
  cfg.train.minibatch = 50;
  cfg.train.learning_rate = 0.3;

  TempDir out("otloss_digit_out");
  const DigitStudyResults results =
      run_digit_study(cfg, dir.path.string(), out.path.string());
  REQUIRE(results.rows.size() == 20);
  for (const DigitStudyRow& row : results.rows) {
    if (row.test_count == 0) continue;
    CHECK(row.mean_probabilities.sum() == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(fs::exists(out.path / "posteriors.csv"));
  CHECK(fs::exists(out.path / "summary.csv"));

  TempDir out2("otloss_digit_out2");
  const DigitStudyResults again =
      run_digit_study(cfg, dir.path.string(), out2.path.string());
  CHECK(read_text_file((out.path / "posteriors.csv").string()) ==
        read_text_file((out2.path / "posteriors.csv").string()));
}

TEST_SUITE_END();
