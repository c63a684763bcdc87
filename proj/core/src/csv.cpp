#include "isda/csv.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "isda/error.hpp"

namespace isda {

std::string format_number(double v) {
  if (!std::isfinite(v)) {
    throw NumericalError("csv", "non-finite value in output");
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void CsvWriter::header(const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out_ << ',';
    out_ << names[i];
  }
  out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) { row({}, values); }

void CsvWriter::row(const std::vector<std::string>& text,
                    const std::vector<double>& values) {
  std::string line;
  bool first = true;
  for (const auto& t : text) {
    if (!first) line += ',';
    line += t;
    first = false;
  }
  for (double v : values) {
    if (!first) line += ',';
    line += format_number(v);
    first = false;
  }
  out_ << line << '\n';
}

}  // namespace isda
