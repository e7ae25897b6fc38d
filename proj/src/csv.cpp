#include "meb/csv.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "meb/error.hpp"

namespace meb {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) fail(ErrorKind::input, where + ": bad number '" + s + "'");
  return v;
}

}  // namespace

std::vector<std::string> read_csv_header(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::input, path + ": empty file");
  return split(line);
}

std::vector<std::vector<double>> read_csv(const std::string& path,
                                          const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::input, path + ": empty file");
  const auto got = split(line);
  if (!header.empty() && got != header) {
    std::string want;
    for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
    fail(ErrorKind::input, path + ": expected header '" + want + "'");
  }
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != got.size()) {
      fail(ErrorKind::input, path + ":" + std::to_string(line_no) + ": wrong column count");
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c, path + ":" + std::to_string(line_no)));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + tmp);
    out << content;
    if (!out) fail(ErrorKind::io, "write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(std::string path, const std::vector<std::string>& header)
    : path_(std::move(path)), tmp_path_(path_ + ".tmp"), out_(tmp_path_, std::ios::trunc) {
  if (!out_) fail(ErrorKind::io, "cannot write " + tmp_path_);
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

CsvWriter::~CsvWriter() {
  if (!committed_) {
    out_.close();
    std::error_code ec;
    std::filesystem::remove(tmp_path_, ec);
  }
}

void CsvWriter::row(std::initializer_list<double> values) {
  bool first = true;
  for (double v : values) {
    out_ << (first ? "" : ",") << format_double(v);
    first = false;
  }
  out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_double(values[i]);
  out_ << '\n';
}

void CsvWriter::commit() {
  out_.close();
  if (!out_) fail(ErrorKind::io, "write failed: " + tmp_path_);
  std::filesystem::rename(tmp_path_, path_);
  committed_ = true;
}

}  // namespace meb
