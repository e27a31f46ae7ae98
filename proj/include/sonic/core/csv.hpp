#pragma once

// Locale-independent CSV emission. Doubles are written in shortest round-trip
// form so that re-running a computation reproduces files byte for byte.

#include <charconv>
#include <cmath>
#include <initializer_list>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace sonic::csv {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

class Writer {
 public:
  Writer(std::ostream& os, std::initializer_list<std::string_view> header) : os_(os) {
    bool first = true;
    for (auto h : header) {
      if (!first) os_ << ',';
      os_ << h;
      first = false;
    }
    os_ << '\n';
    columns_ = header.size();
  }

  void row(std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) os_ << ',';
      os_ << format_double(values[i]);
    }
    os_ << '\n';
  }

  void row(std::initializer_list<double> values) {
    row(std::span<const double>(values.begin(), values.size()));
  }

  std::size_t columns() const { return columns_; }

 private:
  std::ostream& os_;
  std::size_t columns_ = 0;
};

/// Minimal reader for the numeric CSV files written by Writer.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline Table parse(std::string_view text) {
  Table t;
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::size_t c = 0;
    while (true) {
      std::size_t comma = line.find(',', c);
      cells.push_back(line.substr(c, comma == std::string_view::npos ? line.size() - c : comma - c));
      if (comma == std::string_view::npos) break;
      c = comma + 1;
    }
    if (first) {
      for (auto cell : cells) t.header.emplace_back(cell);
      first = false;
      continue;
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (auto cell : cells) {
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc()) v = std::nan("");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace sonic::csv
