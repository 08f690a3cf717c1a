#include "otloss/idx.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "otloss/rng.hpp"

namespace otloss {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
  std::array<unsigned char, 4> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), 4);
  if (!in) throw std::runtime_error("idx: truncated header in " + path);
  return (std::uint32_t(bytes[0]) << 24) | (std::uint32_t(bytes[1]) << 16) |
         (std::uint32_t(bytes[2]) << 8) | std::uint32_t(bytes[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t value) {
  const std::array<unsigned char, 4> bytes{
      static_cast<unsigned char>(value >> 24), static_cast<unsigned char>(value >> 16),
      static_cast<unsigned char>(value >> 8), static_cast<unsigned char>(value)};
  out.write(reinterpret_cast<const char*>(bytes.data()), 4);
}

// Deterministic subset without replacement: partial Fisher-Yates over the
// index range driven by the portable generator.
std::vector<int> draw_subset(int total, int wanted, Rng& rng) {
  std::vector<int> indices(total);
  std::iota(indices.begin(), indices.end(), 0);
  if (wanted <= 0 || wanted >= total) return indices;
  for (int i = 0; i < wanted; ++i) {
    const int j = i + static_cast<int>(rng.uniform_index(
                          static_cast<std::uint64_t>(total - i)));
    std::swap(indices[i], indices[j]);
  }
  indices.resize(wanted);
  return indices;
}

Dataset dataset_from_idx(const IdxImages& images, const std::vector<std::uint8_t>& labels,
                         const std::vector<int>& subset) {
  if (images.count != static_cast<int>(labels.size())) {
    throw std::runtime_error("idx: image/label count mismatch");
  }
  const int pixel_count = images.rows * images.cols;
  Dataset dataset;
  dataset.features.resize(subset.size(), pixel_count);
  dataset.labels.reserve(subset.size());
  for (std::size_t row = 0; row < subset.size(); ++row) {
    const int i = subset[row];
    if (labels[i] > 9) throw std::runtime_error("idx: label value out of range");
    for (int p = 0; p < pixel_count; ++p) {
      dataset.features(static_cast<Eigen::Index>(row), p) =
          images.pixels[static_cast<std::size_t>(i) * pixel_count + p] / 255.0;
    }
    dataset.labels.push_back(one_hot(10, labels[i]));
  }
  return dataset;
}

}  // namespace

IdxImages read_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_idx_images: cannot open " + path);
  if (read_u32_be(in, path) != kImageMagic) {
    throw std::runtime_error("read_idx_images: bad magic in " + path);
  }
  IdxImages images;
  images.count = static_cast<int>(read_u32_be(in, path));
  images.rows = static_cast<int>(read_u32_be(in, path));
  images.cols = static_cast<int>(read_u32_be(in, path));
  const std::size_t total =
      std::size_t(images.count) * images.rows * images.cols;
  images.pixels.resize(total);
  in.read(reinterpret_cast<char*>(images.pixels.data()),
          static_cast<std::streamsize>(total));
  if (in.gcount() != static_cast<std::streamsize>(total)) {
    throw std::runtime_error("read_idx_images: truncated file " + path);
  }
  return images;
}

std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_idx_labels: cannot open " + path);
  if (read_u32_be(in, path) != kLabelMagic) {
    throw std::runtime_error("read_idx_labels: bad magic in " + path);
  }
  const std::uint32_t count = read_u32_be(in, path);
  std::vector<std::uint8_t> labels(count);
  in.read(reinterpret_cast<char*>(labels.data()), count);
  if (in.gcount() != static_cast<std::streamsize>(count)) {
    throw std::runtime_error("read_idx_labels: truncated file " + path);
  }
  return labels;
}

void write_idx_images(const std::string& path, const IdxImages& images) {
  if (images.pixels.size() !=
      std::size_t(images.count) * images.rows * images.cols) {
    throw std::invalid_argument("write_idx_images: pixel buffer size mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_idx_images: cannot open " + path);
  write_u32_be(out, kImageMagic);
  write_u32_be(out, static_cast<std::uint32_t>(images.count));
  write_u32_be(out, static_cast<std::uint32_t>(images.rows));
  write_u32_be(out, static_cast<std::uint32_t>(images.cols));
  out.write(reinterpret_cast<const char*>(images.pixels.data()),
            static_cast<std::streamsize>(images.pixels.size()));
  if (!out) throw std::runtime_error("write_idx_images: write failed for " + path);
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_idx_labels: cannot open " + path);
  write_u32_be(out, kLabelMagic);
  write_u32_be(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
  if (!out) throw std::runtime_error("write_idx_labels: write failed for " + path);
}

DigitData load_digit_data(const std::string& dir, int train_subset, int test_subset,
                          std::uint64_t seed) {
  namespace fs = std::filesystem;
  const IdxImages train_images = read_idx_images((fs::path(dir) / "train-images-idx3-ubyte").string());
  const std::vector<std::uint8_t> train_labels =
      read_idx_labels((fs::path(dir) / "train-labels-idx1-ubyte").string());
  const IdxImages test_images = read_idx_images((fs::path(dir) / "t10k-images-idx3-ubyte").string());
  const std::vector<std::uint8_t> test_labels =
      read_idx_labels((fs::path(dir) / "t10k-labels-idx1-ubyte").string());

  Rng train_rng(derive_seed(seed, 1));
  Rng test_rng(derive_seed(seed, 2));
  DigitData data;
  data.train = dataset_from_idx(train_images, train_labels,
                                draw_subset(train_images.count, train_subset, train_rng));
  data.test = dataset_from_idx(test_images, test_labels,
                               draw_subset(test_images.count, test_subset, test_rng));
  return data;
}

namespace {

// 5x7 glyphs for the digits 0-9, row-major, '#' = ink.
constexpr const char* kGlyphs[10][7] = {
    {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "},
    {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "},
    {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"},
    {"#####", "   # ", "  #  ", "   # ", "    #", "#   #", " ### "},
    {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "},
    {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "},
    {"  ## ", " #   ", "#    ", "#### ", "#   #", "#   #", " ### "},
    {"#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "},
    {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "},
    {" ### ", "#   #", "#   #", " ####", "    #", "   # ", " ##  "},
};

void render_digit(int digit, Rng& rng, std::uint8_t* out) {
  constexpr int kSide = 28;
  constexpr int kScale = 3;  // glyphs upscale to 15x21
  double canvas[kSide * kSide] = {};
  // Random placement keeps the glyph fully inside the canvas.
  const int max_dx = kSide - 5 * kScale;   // 13
  const int max_dy = kSide - 7 * kScale;   // 7
  const int dx = static_cast<int>(rng.uniform_index(max_dx + 1));
  const int dy = static_cast<int>(rng.uniform_index(max_dy + 1));
  const double ink = rng.uniform(180.0, 255.0);
  for (int r = 0; r < 7; ++r) {
    for (int c = 0; c < 5; ++c) {
      if (kGlyphs[digit][r][c] != '#') continue;
      for (int rr = 0; rr < kScale; ++rr) {
        for (int cc = 0; cc < kScale; ++cc) {
          canvas[(dy + r * kScale + rr) * kSide + (dx + c * kScale + cc)] = ink;
        }
      }
    }
  }
  for (int p = 0; p < kSide * kSide; ++p) {
    const double noisy = canvas[p] + 24.0 * rng.normal();
    out[p] = static_cast<std::uint8_t>(std::clamp(noisy, 0.0, 255.0));
  }
}

void generate_split(const std::string& images_path, const std::string& labels_path,
                    int count, Rng& rng) {
  IdxImages images;
  images.count = count;
  images.rows = 28;
  images.cols = 28;
  images.pixels.resize(std::size_t(count) * 28 * 28);
  std::vector<std::uint8_t> labels(count);
  for (int i = 0; i < count; ++i) {
    const int digit = static_cast<int>(rng.uniform_index(10));
    labels[i] = static_cast<std::uint8_t>(digit);
    render_digit(digit, rng, images.pixels.data() + std::size_t(i) * 28 * 28);
  }
  write_idx_images(images_path, images);
  write_idx_labels(labels_path, labels);
}

}  // namespace

void write_synthetic_digits(const std::string& dir, int train_count, int test_count,
                            std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  Rng train_rng(derive_seed(seed, 101));
  Rng test_rng(derive_seed(seed, 102));
  generate_split((fs::path(dir) / "train-images-idx3-ubyte").string(),
                 (fs::path(dir) / "train-labels-idx1-ubyte").string(), train_count,
                 train_rng);
  generate_split((fs::path(dir) / "t10k-images-idx3-ubyte").string(),
                 (fs::path(dir) / "t10k-labels-idx1-ubyte").string(), test_count,
                 test_rng);
}

}  // namespace otloss
