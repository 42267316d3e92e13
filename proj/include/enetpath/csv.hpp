#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace enetpath {

/**
 * Minimal strict CSV: UTF-8, header row, comma separated, no quoting or
 * escapes. Cells are kept raw; numeric conversion reports exact coordinates
 * (1-based line numbers, the header is line 1).
 */
class CsvTable {
 public:
  static CsvTable parse(std::istream& is, const std::string& origin = "<stream>") {
    CsvTable t;
    t.origin_ = origin;
    std::string line;
    if (!std::getline(is, line))
      throw std::invalid_argument(origin + ": empty file");
    strip_cr(line);
    t.columns_ = split(line);
    if (t.columns_.empty()) throw std::invalid_argument(origin + ": empty header");
    int lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      strip_cr(line);
      if (line.empty() && is.peek() == std::char_traits<char>::eof()) break;
      auto cells = split(line);
      if (cells.size() != t.columns_.size())
        throw std::invalid_argument(origin + ": row " + std::to_string(lineno) + " has " +
                                    std::to_string(cells.size()) + " cells, expected " +
                                    std::to_string(t.columns_.size()));
      t.rows_.push_back(std::move(cells));
    }
    if (t.rows_.empty()) throw std::invalid_argument(origin + ": no data rows");
    return t;
  }

  static CsvTable read(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    return parse(is, path);
  }

  int n_rows() const { return static_cast<int>(rows_.size()); }
  int n_cols() const { return static_cast<int>(columns_.size()); }
  const std::vector<std::string>& columns() const { return columns_; }
  const std::string& cell(int i, int j) const { return rows_[i][j]; }

  bool has_column(const std::string& name) const {
    for (const auto& c : columns_)
      if (c == name) return true;
    return false;
  }

  int column_index(const std::string& name) const {
    for (std::size_t j = 0; j < columns_.size(); ++j)
      if (columns_[j] == name) return static_cast<int>(j);
    throw std::invalid_argument(origin_ + ": missing column '" + name + "'");
  }

  double numeric_cell(int i, int j) const {
    const std::string& s = rows_[i][j];
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
      throw std::invalid_argument(origin_ + ": row " + std::to_string(i + 2) + ", column '" +
                                  columns_[j] + "': cell '" + s + "' is not numeric");
    return v;
  }

  std::vector<double> numeric_column(const std::string& name) const {
    const int j = column_index(name);
    std::vector<double> out(rows_.size());
    for (int i = 0; i < n_rows(); ++i) out[i] = numeric_cell(i, j);
    return out;
  }

  std::vector<std::string> string_column(const std::string& name) const {
    const int j = column_index(name);
    std::vector<std::string> out(rows_.size());
    for (int i = 0; i < n_rows(); ++i) out[i] = rows_[i][j];
    return out;
  }

 private:
  static void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }
  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    out.push_back(cur);
    return out;
  }

  std::string origin_;
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace enetpath
