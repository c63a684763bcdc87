#pragma once

#include <initializer_list>
#include <iosfwd>
#include <string>
#include <vector>

namespace isda {

/// %.12g rendering used for every numeric CSV cell.
std::string format_number(double v);

/// Minimal CSV emitter: LF line endings, %.12g numbers. A non-finite value
/// throws NumericalError so a NaN never reaches an output file.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void header(const std::vector<std::string>& names);
  void row(const std::vector<double>& values);
  /// Leading text cells followed by numbers.
  void row(const std::vector<std::string>& text,
           const std::vector<double>& values);

 private:
  std::ostream& out_;
};

}  // namespace isda
