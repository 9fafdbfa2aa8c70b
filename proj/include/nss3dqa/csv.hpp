#pragma once

// Feature CSV and manifest CSV reading and writing.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "error.hpp"
#include "features.hpp"
#include "model.hpp"

namespace nss3dqa {

namespace detail::csv {

/// Splits one CSV record, honoring double-quoted fields with "" escapes.
inline std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty() && !was_quoted) {
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw Error("unterminated quoted CSV field");
  out.push_back(std::move(cur));
  if (!was_quoted) {
    auto& last = out.back();
    while (!last.empty() && (last.back() == ' ' || last.back() == '\t')) last.pop_back();
  }
  return out;
}

inline std::string quote(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::vector<std::string> read_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  if (text.starts_with("\xEF\xBB\xBF")) pos = 3;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    pos = end + 1;
  }
  return lines;
}

inline bool skippable(const std::string& line) {
  const auto p = line.find_first_not_of(" \t");
  return p == std::string::npos || line[p] == '#';
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace detail::csv

/// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, std::string_view what) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
    throw Error("invalid number '" + std::string(s) + "' in " + std::string(what));
  return v;
}

struct FeatureRow {
  std::string model_id;
  ModelKind kind = ModelKind::point_cloud;
  std::vector<double> values;
};

inline std::string feature_csv_header() {
  std::string h = "model_id,kind";
  for (std::size_t i = 1; i <= kPointCloudFeatureCount; ++i) h += ",f" + std::to_string(i);
  return h;
}

inline std::string format_feature_row(const FeatureRow& r) {
  if (r.values.size() > kPointCloudFeatureCount) throw Error("feature row wider than the CSV layout");
  std::string s = detail::csv::quote(r.model_id) + "," + to_string(r.kind);
  for (std::size_t i = 0; i < kPointCloudFeatureCount; ++i) {
    s.push_back(',');
    if (i < r.values.size()) s += format_double(r.values[i]);
  }
  return s;
}

inline std::string format_feature_csv(const std::vector<FeatureRow>& rows) {
  std::string out = feature_csv_header() + "\n";
  for (const auto& r : rows) out += format_feature_row(r) + "\n";
  return out;
}

/// Parses a feature CSV. Trailing empty cells are padding; a row's width
/// must match its kind.
inline std::vector<FeatureRow> parse_feature_csv(std::string_view text) {
  const auto lines = detail::csv::read_lines(text);
  std::vector<FeatureRow> rows;
  bool header = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::csv::skippable(lines[ln])) continue;
    const auto cells = detail::csv::split_record(lines[ln]);
    const std::string where = "feature CSV line " + std::to_string(ln + 1);
    if (!header) {
      if (cells.size() < 2 || cells[0] != "model_id" || cells[1] != "kind")
        throw Error(where + ": expected header starting with model_id,kind");
      header = true;
      continue;
    }
    if (cells.size() < 2) throw Error(where + ": too few cells");
    FeatureRow r;
    r.model_id = cells[0];
    try {
      r.kind = parse_model_kind(cells[1]);
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
    std::size_t last = cells.size();
    while (last > 2 && cells[last - 1].empty()) --last;
    for (std::size_t i = 2; i < last; ++i) r.values.push_back(parse_double(cells[i], where));
    if (r.values.size() != feature_count(r.kind))
      throw Error(where + ": " + std::to_string(r.values.size()) + " features for a " + to_string(r.kind) +
                  ", expected " + std::to_string(feature_count(r.kind)));
    rows.push_back(std::move(r));
  }
  if (!header) throw Error("feature CSV has no header row");
  return rows;
}

struct ManifestEntry {
  std::string path;
  double mos = 0;
  std::string group;
};

/// Manifest with header `path,mos,group`; '#' lines are comments.
inline std::vector<ManifestEntry> parse_manifest(std::string_view text) {
  const auto lines = detail::csv::read_lines(text);
  std::vector<ManifestEntry> out;
  bool header = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::csv::skippable(lines[ln])) continue;
    const auto cells = detail::csv::split_record(lines[ln]);
    const std::string where = "manifest line " + std::to_string(ln + 1);
    if (!header) {
      if (cells.size() != 3 || cells[0] != "path" || cells[1] != "mos" || cells[2] != "group")
        throw Error(where + ": expected header path,mos,group");
      header = true;
      continue;
    }
    if (cells.size() != 3) throw Error(where + ": expected 3 cells, got " + std::to_string(cells.size()));
    if (cells[0].empty()) throw Error(where + ": empty path");
    if (cells[1].empty()) throw Error(where + ": missing MOS");
    if (cells[2].empty()) throw Error(where + ": empty group");
    out.push_back({cells[0], parse_double(cells[1], where), cells[2]});
  }
  if (!header) throw Error("manifest has no header row");
  if (out.empty()) throw Error("manifest lists no models");
  return out;
}

inline std::string format_manifest(const std::vector<ManifestEntry>& entries, std::string_view comment = {}) {
  std::string out;
  std::size_t pos = 0;
  while (pos < comment.size()) {
    auto end = comment.find('\n', pos);
    if (end == std::string_view::npos) end = comment.size();
    out += "# " + std::string(comment.substr(pos, end - pos)) + "\n";
    pos = end + 1;
  }
  out += "path,mos,group\n";
  for (const auto& e : entries)
    out += detail::csv::quote(e.path) + "," + format_double(e.mos) + "," + detail::csv::quote(e.group) + "\n";
  return out;
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  try {
    return parse_manifest(detail::csv::read_text(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path) {
  try {
    return parse_feature_csv(detail::csv::read_text(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace nss3dqa
