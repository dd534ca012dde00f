#include "msgc/csv.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "msgc/error.hpp"

namespace msgc::csv {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    std::string_view field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    out.emplace_back(trim(field));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view s, std::string_view context) {
  s = trim(s);
  if (s == "inf" || s == "+inf" || s == "Inf" || s == "INF") return std::numeric_limits<double>::infinity();
  if (s == "-inf" || s == "-Inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw IngestionError("cannot parse number '" + std::string(s) + "' (" + std::string(context) + ")");
  }
  return value;
}

long long parse_int(std::string_view s, std::string_view context) {
  s = trim(s);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw IngestionError("cannot parse integer '" + std::string(s) + "' (" + std::string(context) + ")");
  }
  return value;
}

Reader::Reader(const std::string& path) : path_(path), in_(path) {
  if (!in_) throw IngestionError("cannot open '" + path + "'");
}

bool Reader::next_line(std::string& line) {
  while (std::getline(in_, line)) {
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!trim(line).empty()) return true;
  }
  return false;
}

bool Reader::next(std::vector<std::string>& fields) {
  std::string line;
  if (!next_line(line)) return false;
  fields = split(line);
  return true;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write '" + path + "'");
  return out;
}

}  // namespace msgc::csv
