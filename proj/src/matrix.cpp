#include "msgc/matrix.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include "msgc/csv.hpp"
#include "msgc/error.hpp"

namespace msgc {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("matrix " + std::to_string(rows) + "x" + std::to_string(cols) + " given " +
                         std::to_string(data_.size()) + " values");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

void write_matrix_csv(const std::string& path, const Matrix& m, const std::vector<std::string>& labels) {
  if (!labels.empty() && labels.size() != m.rows()) {
    throw DimensionError("matrix csv: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(m.rows()) + " rows");
  }
  auto out = csv::open_output(path);
  out << "row";
  for (std::size_t c = 0; c < m.cols(); ++c) out << ",c" << c;
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << (labels.empty() ? std::to_string(r) : labels[r]);
    for (double v : m.row(r)) out << ',' << format_double(v);
    out << '\n';
  }
}

Matrix read_matrix_csv(const std::string& path, std::vector<std::string>* labels) {
  csv::Reader reader(path);
  std::vector<std::string> fields;
  if (!reader.next(fields)) throw IngestionError("'" + path + "' is empty");
  const std::size_t cols = fields.size() - 1;
  std::vector<double> values;
  std::size_t rows = 0;
  if (labels) labels->clear();
  while (reader.next(fields)) {
    if (fields.size() != cols + 1) {
      throw IngestionError(path + ":" + std::to_string(reader.line_number()) + ": expected " +
                           std::to_string(cols + 1) + " fields");
    }
    if (labels) labels->push_back(fields[0]);
    for (std::size_t c = 1; c <= cols; ++c) values.push_back(csv::parse_double(fields[c], path));
    ++rows;
  }
  return Matrix(rows, cols, std::move(values));
}

}  // namespace msgc
