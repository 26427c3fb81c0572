#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cfrf {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Column-major matrix of doubles. Columns are contiguous so split scans and
// per-column statistics stay cache friendly.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t n_rows, std::size_t n_cols, double fill = 0.0)
      : n_rows_(n_rows), n_cols_(n_cols), data_(n_rows * n_cols, fill) {}

  std::size_t rows() const { return n_rows_; }
  std::size_t cols() const { return n_cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[j * n_rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[j * n_rows_ + i]; }

  const double* col(std::size_t j) const { return data_.data() + j * n_rows_; }
  double* col(std::size_t j) { return data_.data() + j * n_rows_; }

  std::vector<double> row(std::size_t i) const {
    std::vector<double> out(n_cols_);
    for (std::size_t j = 0; j < n_cols_; ++j) out[j] = (*this)(i, j);
    return out;
  }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<double> data_;
};

// Covariates plus treatment and outcome. missing_mask is used only by the
// bivariate imputation path; mask[i][j] says whether outcome under arm j is
// observed for row i.
struct Dataset {
  Matrix x;
  std::vector<int> t;
  std::vector<double> y;
  std::vector<std::array<bool, 2>> missing_mask;  // empty unless bivariate

  std::size_t n() const { return x.rows(); }
  std::size_t p() const { return x.cols(); }

  void validate() const;
};

// splitmix64; used to derive independent seeds from (seed, tree, node) keys.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b));
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix64(mix_key(a, b) ^ mix64(c + 0x632be59bd9b4e019ULL));
}

inline std::mt19937_64 make_rng(std::uint64_t key) { return std::mt19937_64(mix64(key)); }

// Global worker count for parallel loops; 0 means hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

// Static chunking over [0, n). Work items must write disjoint state so the
// result is independent of the schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

void log_warning(const std::string& msg);

}  // namespace cfrf
