#ifndef OTLOSS_IO_HPP_
#define OTLOSS_IO_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace otloss {

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double value);
double parse_double(const std::string& text);

// CSV: one row per line, comma separated, '.' decimal, no header. Values are
// written with shortest round-trip formatting, so write/read is bit-exact.
void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& matrix);
Eigen::MatrixXd read_csv_matrix(const std::string& path);

// Vectors are written as a single CSV row; reading accepts a single row or a
// single column.
void write_csv_vector(const std::string& path, const Eigen::VectorXd& vector);
Eigen::VectorXd read_csv_vector(const std::string& path);

// JSON array-of-arrays encoding of a matrix (array of numbers for a vector).
// Round-trips bit-exactly for finite doubles.
std::string matrix_to_json(const Eigen::MatrixXd& matrix);
Eigen::MatrixXd matrix_from_json(const std::string& text);
std::string vector_to_json(const Eigen::VectorXd& vector);
Eigen::VectorXd vector_from_json(const std::string& text);

// Plain-text key-value configuration files: one `key = value` pair per line,
// '#' starts a comment. Values keep their raw text; typed getters parse on
// demand. `fingerprint()` hashes the normalized pairs (FNV-1a), used in
// experiment manifests.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
  // Comma-separated lists.
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;
  std::vector<int> get_int_list(const std::string& key,
                                const std::vector<int>& fallback) const;

  void set(const std::string& key, const std::string& value);
  std::uint64_t fingerprint() const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace otloss

#endif  // OTLOSS_IO_HPP_
