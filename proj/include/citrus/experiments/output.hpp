#pragma once

// Deterministic text outputs written via a temporary file and rename.

#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

namespace citrus::experiments {

void write_file_atomic(const std::string& path, const std::string& content);

/// Shortest round-trip text for a double; "inf", "-inf" and "nan" otherwise.
std::string format_real(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  CsvTable& row(const std::vector<std::string>& cells);
  std::string str() const;
  std::size_t rows() const { return rows_; }

 private:
  std::size_t width_;
  std::size_t rows_ = 0;
  std::string text_;
};

std::string cell(double v);
std::string cell(std::size_t v);
std::string cell(const std::string& v);

/// JSON number, or a string for non-finite values.
nlohmann::json json_real(double v);

}  // namespace citrus::experiments
