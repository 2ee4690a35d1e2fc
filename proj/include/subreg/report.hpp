// Copyright (c) subreg-kit contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "subreg/core.hpp"

namespace subreg {

/// Shortest round-trip-stable decimal form (%.12g; "inf", "nan" spelled out).
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v + 0.0);
  return buf;
}

inline std::string fmt(bool b) { return b ? "true" : "false"; }

inline std::string fmt(const Vec& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v(i));
  return s;
}

inline std::string fmt(const std::vector<int>& v, int base = 1) {
  if (v.empty()) return "-";
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i] + base);
  return s;
}

/// Sectioned key-value report with a flat (check, status, value) CSV mirror.
class Report {
 public:
  void section(std::string name) { sections_.push_back({std::move(name), {}}); }

  /// Informational line; text only.
  void kv(const std::string& key, const std::string& value) {
    current().lines.push_back({key, value, ""});
  }
  void kv(const std::string& key, double v) { kv(key, fmt(v)); }

  /// Line that also lands in the CSV as section.key,status,value.
  void check(const std::string& key, const std::string& status, const std::string& value) {
    current().lines.push_back({key, value, status});
  }
  void check(const std::string& key, const std::string& status, double v) {
    check(key, status, fmt(v));
  }

  void warn(const std::string& msg) { warnings_.push_back(msg); }

  std::string text() const {
    std::string out;
    for (const auto& s : sections_) {
      out += "[" + s.name + "]\n";
      for (const auto& l : s.lines) {
        out += l.key + " = " + l.value;
        if (!l.status.empty()) out += "  (" + l.status + ")";
        out += "\n";
      }
      out += "\n";
    }
    if (!warnings_.empty()) {
      out += "[WARNINGS]\n";
      for (const auto& w : warnings_) out += w + "\n";
      out += "\n";
    }
    return out;
  }

  std::string csv() const {
    std::string out = "check,status,value\n";
    for (const auto& s : sections_) {
      for (const auto& l : s.lines) {
        if (l.status.empty() && s.name != "CONFIG") continue;
        out += csv_field(lower(s.name) + "." + l.key) + "," +
               csv_field(l.status.empty() ? "echo" : l.status) + "," + csv_field(l.value) + "\n";
      }
    }
    for (const auto& w : warnings_) out += "warning,warn," + csv_field(w) + "\n";
    return out;
  }

  static std::string csv_field(const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) return v;
    std::string q = "\"";
    for (char c : v) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }

 private:
  struct Line {
    std::string key, value, status;
  };
  struct Section {
    std::string name;
    std::vector<Line> lines;
  };

  Section& current() {
    if (sections_.empty()) section("REPORT");
    return sections_.back();
  }

  static std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  }

  std::vector<Section> sections_;
  std::vector<std::string> warnings_;
};

/// Plain CSV table.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string csv() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + Report::csv_field(r[i]);
      out += "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
};

/// Writes via a temporary file in the same directory and renames it into place.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw InputError("cannot write " + tmp.string());
    f << content;
    f.flush();
    if (!f) throw InputError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace subreg
