#include "bdsde/csv.hpp"

#include <cstdio>

#include "bdsde/errors.hpp"

namespace bdsde {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

bool needs_quoting(const std::string& v) {
  return v.find_first_of(",\"\n\r") != std::string::npos;
}

std::string quoted(const std::string& v) {
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

CsvWriter::CsvWriter(const std::string& path) : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw_error(ErrorCode::io_error, "cannot open " + path + " for writing");
}

CsvWriter::~CsvWriter() {
  if (row_open_) out_ << '\n';
}

void CsvWriter::header(const std::vector<std::string>& names) {
  columns_ = names.size();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out_ << ',';
    out_ << (needs_quoting(names[i]) ? quoted(names[i]) : names[i]);
  }
  out_ << '\n';
}

void CsvWriter::field(const std::string& v) {
  if (row_open_) out_ << ',';
  out_ << (needs_quoting(v) ? quoted(v) : v);
  row_open_ = true;
  ++written_;
}

void CsvWriter::field(double v) { field(format_double(v)); }

void CsvWriter::field(std::size_t v) { field(std::to_string(v)); }

void CsvWriter::field(long long v) { field(std::to_string(v)); }

void CsvWriter::end_row() {
  if (columns_ != 0 && written_ != columns_)
    throw_error(ErrorCode::invalid_input, "csv row width mismatch in " + path_);
  out_ << '\n';
  row_open_ = false;
  written_ = 0;
}

}  // namespace bdsde
