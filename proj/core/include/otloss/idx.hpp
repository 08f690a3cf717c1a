#ifndef OTLOSS_IDX_HPP_
#define OTLOSS_IDX_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "otloss/learner.hpp"

namespace otloss {

// Raw contents of an IDX image file: n images of rows x cols bytes.
struct IdxImages {
  int count = 0;
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major
};

// IDX readers/writers: big-endian headers, magic 0x00000803 for images and
// 0x00000801 for labels. Writing then reading reproduces the bytes exactly.
IdxImages read_idx_images(const std::string& path);
std::vector<std::uint8_t> read_idx_labels(const std::string& path);
void write_idx_images(const std::string& path, const IdxImages& images);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

// Loads the standard four-file digit layout from a directory
// (train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte,
// t10k-labels-idx1-ubyte). Pixels are scaled to [0, 1], labels one-hot over
// ten classes. Subsets (0 = everything) are drawn without replacement from
// the seeded stream, so subset selection is deterministic.
struct DigitData {
  Dataset train;
  Dataset test;
};

DigitData load_digit_data(const std::string& dir, int train_subset, int test_subset,
                          std::uint64_t seed);

// Writes a deterministic synthetic digit dataset in the same four-file IDX
// layout: 28x28 glyph renderings of the digits 0-9 with random shifts and
// pixel noise. A stand-in corpus for environments without the real files.
void write_synthetic_digits(const std::string& dir, int train_count, int test_count,
                            std::uint64_t seed);

}  // namespace otloss

#endif  // OTLOSS_IDX_HPP_
