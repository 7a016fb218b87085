#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "smoa/common.hpp"

namespace smoa::tools {

// Comma-separated UTF-8 writer: header row first, '.' decimal point always
// (snprintf with the untouched C locale), cells quoted only when they need it.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary), columns_(header.size()) {
    if (!out_) throw ConfigError("cannot open output file '" + path + "'");
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) {
      throw ContractError("csv row has " + std::to_string(cells.size()) +
                          " cells, expected " + std::to_string(columns_));
    }
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << escape(cells[i]);
    }
    out_ << '\n';
  }

  static std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
  static std::string num(int64_t v) { return std::to_string(v); }
  static std::string num(uint64_t v) { return std::to_string(v); }
  static std::string hex(uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
  }

 private:
  static std::string escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    q += '"';
    return q;
  }

  std::ofstream out_;
  size_t columns_;
};

}  // namespace smoa::tools
