#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace pcha {

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;  // one row per data line, columns follow header

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  // Index of a named column, -1 when absent.
  int column(const std::string& name) const;
};

// Reads a numeric CSV with a header line. Throws std::runtime_error with the
// offending line number on ragged rows or non-numeric cells.
CsvTable read_csv(const std::string& path);
CsvTable read_csv_text(const std::string& text, const std::string& origin);

// Shortest decimal form that round-trips a double through strtod.
std::string format_double(double v);

// String-cell writer used for study tables that mix labels and numbers.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values);

}  // namespace pcha
