#pragma once

#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

namespace bdsde {

// Formats a double with 17 significant digits (round-trip exact).
std::string format_double(double v);

// Minimal RFC-4180 writer: comma separators, one header row, LF line
// endings, fields quoted only when they contain a comma, quote or newline.
class CsvWriter {
public:
  explicit CsvWriter(const std::string& path);
  ~CsvWriter();

  void header(const std::vector<std::string>& names);
  void field(const std::string& v);
  void field(double v);
  void field(std::size_t v);
  void field(long long v);
  void end_row();

private:
  std::ofstream out_;
  bool row_open_ = false;
  std::size_t columns_ = 0;
  std::size_t written_ = 0;
  std::string path_;
};

}  // namespace bdsde
