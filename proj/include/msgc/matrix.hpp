#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace msgc {

/// Dense row-major matrix of doubles used for graph-level (non-differentiable) data.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Writes `m` as CSV: a header `row,c0,c1,...` then one line per row, prefixed by `labels[r]`
/// (or the row index when labels is empty). Values use round-trip precision.
void write_matrix_csv(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& labels = {});

/// Reads a matrix written by write_matrix_csv. Row labels are returned through `labels`.
Matrix read_matrix_csv(const std::string& path, std::vector<std::string>* labels = nullptr);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

}  // namespace msgc
