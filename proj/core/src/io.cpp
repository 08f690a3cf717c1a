#include "otloss/io.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include <nlohmann/json.hpp>

namespace otloss {

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (result.ec != std::errc()) {
    throw std::runtime_error("format_double: conversion failed");
  }
  return std::string(buffer, result.ptr);
}

double parse_double(const std::string& text) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  // Tolerate surrounding spaces.
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc() || result.ptr != end) {
    throw std::invalid_argument("parse_double: invalid number '" + text + "'");
  }
  return value;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string strip(const std::string& text) {
  std::size_t a = 0, b = text.size();
  while (a < b && std::isspace(static_cast<unsigned char>(text[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(text[b - 1]))) --b;
  return text.substr(a, b - a);
}

}  // namespace

void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& matrix) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv_matrix: cannot open " + path);
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(matrix(i, j));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_csv_matrix: write failed for " + path);
}

Eigen::MatrixXd read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv_matrix: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (strip(line).empty()) continue;
    std::vector<double> row;
    for (const std::string& field : split(line, ',')) {
      row.push_back(parse_double(field));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error("read_csv_matrix: ragged rows in " + path);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("read_csv_matrix: empty file " + path);
  Eigen::MatrixXd matrix(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return matrix;
}

void write_csv_vector(const std::string& path, const Eigen::VectorXd& vector) {
  write_csv_matrix(path, vector.transpose());
}

Eigen::VectorXd read_csv_vector(const std::string& path) {
  const Eigen::MatrixXd matrix = read_csv_matrix(path);
  if (matrix.rows() == 1) return matrix.row(0).transpose();
  if (matrix.cols() == 1) return matrix.col(0);
  throw std::runtime_error("read_csv_vector: " + path + " is not a single row or column");
}

std::string matrix_to_json(const Eigen::MatrixXd& matrix) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) row.push_back(matrix(i, j));
    rows.push_back(std::move(row));
  }
  return rows.dump();
}

Eigen::MatrixXd matrix_from_json(const std::string& text) {
  const nlohmann::json rows = nlohmann::json::parse(text);
  if (!rows.is_array() || rows.empty() || !rows[0].is_array()) {
    throw std::invalid_argument("matrix_from_json: expected an array of arrays");
  }
  const std::size_t cols = rows[0].size();
  Eigen::MatrixXd matrix(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw std::invalid_argument("matrix_from_json: ragged rows");
    for (std::size_t j = 0; j < cols; ++j) {
      matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j].get<double>();
    }
  }
  return matrix;
}

std::string vector_to_json(const Eigen::VectorXd& vector) {
  nlohmann::json values = nlohmann::json::array();
  for (Eigen::Index i = 0; i < vector.size(); ++i) values.push_back(vector(i));
  return values.dump();
}

Eigen::VectorXd vector_from_json(const std::string& text) {
  const nlohmann::json values = nlohmann::json::parse(text);
  if (!values.is_array()) throw std::invalid_argument("vector_from_json: expected an array");
  Eigen::VectorXd vector(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    vector(static_cast<Eigen::Index>(i)) = values[i].get<double>();
  }
  return vector;
}

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  return from_string(read_text_file(path));
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
  KeyValueConfig config;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string stripped = strip(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("KeyValueConfig: expected 'key = value', got '" + stripped + "'");
    }
    const std::string key = strip(stripped.substr(0, eq));
    const std::string value = strip(stripped.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("KeyValueConfig: empty key");
    config.entries_[key] = value;
  }
  return config;
}

bool KeyValueConfig::has(const std::string& key) const {
  return entries_.count(key) != 0;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : parse_double(it->second);
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : std::stoi(it->second);
}

std::uint64_t KeyValueConfig::get_uint64(const std::string& key,
                                         std::uint64_t fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback
                              : static_cast<std::uint64_t>(std::stoull(it->second));
}

std::vector<double> KeyValueConfig::get_double_list(
    const std::string& key, const std::vector<double>& fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<double> values;
  for (const std::string& field : split(it->second, ',')) {
    values.push_back(parse_double(field));
  }
  return values;
}

std::vector<int> KeyValueConfig::get_int_list(const std::string& key,
                                              const std::vector<int>& fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<int> values;
  for (const std::string& field : split(it->second, ',')) {
    values.push_back(std::stoi(strip(field)));
  }
  return values;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  entries_[key] = value;
}

std::uint64_t KeyValueConfig::fingerprint() const {
  std::uint64_t hash = 0xcbf29ce484222325ULL;  // FNV-1a
  auto mix = [&hash](const std::string& text) {
    for (unsigned char c : text) {
      hash ^= c;
      hash *= 0x100000001b3ULL;
    }
    hash ^= 0x1f;
    hash *= 0x100000001b3ULL;
  };
  for (const auto& [key, value] : entries_) {
    mix(key);
    mix(value);
  }
  return hash;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_text_file: cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_text_file: cannot open " + path);
  out << content;
  if (!out) throw std::runtime_error("write_text_file: write failed for " + path);
}

}  // namespace otloss
