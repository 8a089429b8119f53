// pkrank/text_util.h

// Copyright 2026  The pkrank Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Internal helpers for the small CSV files the library reads and writes.

#ifndef PKRANK_TEXT_UTIL_H_
#define PKRANK_TEXT_UTIL_H_

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "pkrank/common.h"

namespace pkrank::internal {

inline std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> SplitFields(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find(sep, start);
    out.emplace_back(Trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double ParseDouble(const std::string &s, const std::string &what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw FormatError("cannot parse " + what + " from '" + s + "'");
  return v;
}

inline long long ParseInt(const std::string &s, const std::string &what) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw FormatError("cannot parse " + what + " from '" + s + "'");
  return v;
}

// Fixed-precision formatting; keeps reports byte-stable.
inline std::string FormatDouble(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

// Reads a CSV file with a header row.  Returns the data rows; the header must
// start with the given column names.
inline std::vector<std::vector<std::string>> ReadCsv(
    const std::string &path, const std::vector<std::string> &columns) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw FormatError(path + ": empty CSV");
  auto header = SplitFields(line);
  if (header.size() < columns.size())
    throw FormatError(path + ": expected columns starting with " + columns[0]);
  for (size_t c = 0; c < columns.size(); ++c)
    if (header[c] != columns[c])
      throw FormatError(path + ": column " + std::to_string(c) + " is '" +
                        header[c] + "', expected '" + columns[c] + "'");
  std::vector<std::vector<std::string>> rows;
  size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (Trim(line).empty()) continue;
    auto f = SplitFields(line);
    if (f.size() != header.size())
      throw FormatError(path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " fields");
    rows.push_back(std::move(f));
  }
  return rows;
}

}  // namespace pkrank::internal

#endif  // PKRANK_TEXT_UTIL_H_
