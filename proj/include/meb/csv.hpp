#pragma once

// Small numeric CSV reader/writer shared by the file formats. Values are
// written with 17 significant digits so doubles round-trip exactly; files are
// written to a temporary name and renamed into place on commit().

#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace meb {

// Reads a numeric CSV whose header must equal `header` (when non-empty).
std::vector<std::vector<double>> read_csv(const std::string& path,
                                          const std::vector<std::string>& header);

// Header row of a CSV file.
std::vector<std::string> read_csv_header(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file_atomic(const std::string& path, const std::string& content);

class CsvWriter {
 public:
  CsvWriter(std::string path, const std::vector<std::string>& header);
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;
  ~CsvWriter();

  void row(std::initializer_list<double> values);
  void row(const std::vector<double>& values);
  void commit();

 private:
  std::string path_;
  std::string tmp_path_;
  std::ofstream out_;
  bool committed_ = false;
};

std::string format_double(double v);

}  // namespace meb
