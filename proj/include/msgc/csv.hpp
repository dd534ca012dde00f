#pragma once

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace msgc::csv {

std::vector<std::string> split(std::string_view line, char sep = ',');
std::string_view trim(std::string_view s);

/// Parses a double; accepts "inf"/"-inf"/"nan". Throws IngestionError naming `context`.
double parse_double(std::string_view s, std::string_view context);
long long parse_int(std::string_view s, std::string_view context);

/// Line reader that skips blank lines and strips trailing '\r'.
class Reader {
 public:
  explicit Reader(const std::string& path);
  bool next(std::vector<std::string>& fields);
  bool next_line(std::string& line);
  std::size_t line_number() const { return line_no_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
};

/// Output file that throws on open failure.
std::ofstream open_output(const std::string& path);

}  // namespace msgc::csv
