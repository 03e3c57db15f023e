#include "cyclomdp/series.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "cyclomdp/error.hpp"

namespace cyclomdp {

namespace {

// Howard Hinnant's civil-date algorithm.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy =
      (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
      static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return static_cast<std::int64_t>(era) * 146097 +
         static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int* y, int* m, int* d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  *d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  *m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  *y = static_cast<int>(yy + (*m <= 2));
}

// Splits one CSV line; supports double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

bool is_missing(const std::string& s) {
  if (s.empty()) return true;
  std::string up;
  for (char c : s) up += static_cast<char>(std::toupper(c));
  return up == "NA" || up == "NAN" || up == "NULL";
}

}  // namespace

std::int64_t parse_iso8601(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  std::string s = trim(text);
  if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.pop_back();
  char sep = 0;
  int got = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep,
                        &h, &mi, &se);
  bool ok = false;
  if (got >= 7 && (sep == 'T' || sep == ' ' || sep == 't'))
    ok = true;
  else if (got == 3 || (got == 4 && sep == 0))
    ok = std::sscanf(s.c_str(), "%d-%d-%d", &y, &mo, &d) == 3;
  require(ok && mo >= 1 && mo <= 12 && d >= 1 && d <= 31 && h >= 0 && h < 24 &&
              mi >= 0 && mi < 60 && se >= 0 && se <= 60,
          strf("unparseable timestamp '%s' (expected ISO-8601)", text.c_str()));
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
}

std::string format_iso8601(std::int64_t ts) {
  std::int64_t days = ts >= 0 ? ts / 86400 : (ts - 86399) / 86400;
  std::int64_t sod = ts - days * 86400;
  int y, m, d;
  civil_from_days(days, &y, &m, &d);
  return strf("%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
              static_cast<int>(sod / 3600), static_cast<int>(sod / 60 % 60),
              static_cast<int>(sod % 60));
}

Series ingest_csv(const std::string& path, const SeriesSchema& schema) {
  std::ifstream in(path);
  require(in.good(), strf("ingest_csv: cannot open '%s'", path.c_str()));

  std::string line;
  require(static_cast<bool>(std::getline(in, line)),
          strf("ingest_csv: '%s' is empty", path.c_str()));
  auto header = split_csv_line(line);
  int time_col = -1, value_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == schema.time_column) time_col = static_cast<int>(i);
    if (trim(header[i]) == schema.value_column)
      value_col = static_cast<int>(i);
  }
  require(time_col >= 0, strf("ingest_csv: column '%s' not found in '%s'",
                              schema.time_column.c_str(), path.c_str()));
  require(value_col >= 0, strf("ingest_csv: column '%s' not found in '%s'",
                               schema.value_column.c_str(), path.c_str()));

  struct Parsed {
    std::int64_t ts;
    double value;
    int line_no;
  };
  std::vector<Parsed> parsed;
  Series out;
  out.unit = schema.unit;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    require(static_cast<int>(fields.size()) > std::max(time_col, value_col),
            strf("ingest_csv: line %d has %zu fields", line_no,
                 fields.size()));
    std::string vtext = trim(fields[value_col]);
    if (is_missing(vtext)) {
      if (schema.drop_missing) {
        ++out.dropped_missing;
        continue;
      }
      fail(strf("ingest_csv: missing value on line %d", line_no));
    }
    char* end = nullptr;
    double v = std::strtod(vtext.c_str(), &end);
    require(end && *end == '\0' && std::isfinite(v),
            strf("ingest_csv: bad value '%s' on line %d", vtext.c_str(),
                 line_no));
    std::int64_t ts;
    std::string ttext = trim(fields[time_col]);
    if (schema.time_format == TimeFormat::EpochSeconds) {
      char* tend = nullptr;
      double tv = std::strtod(ttext.c_str(), &tend);
      require(tend && *tend == '\0' && std::isfinite(tv),
              strf("ingest_csv: bad epoch timestamp '%s' on line %d",
                   ttext.c_str(), line_no));
      ts = static_cast<std::int64_t>(std::llround(tv));
    } else {
      try {
        ts = parse_iso8601(ttext);
      } catch (const Error& e) {
        fail(strf("ingest_csv: line %d: %s", line_no, e.what()));
      }
    }
    parsed.push_back({ts, v, line_no});
  }
  require(!parsed.empty(), strf("ingest_csv: no data rows in '%s'",
                                path.c_str()));

  std::stable_sort(parsed.begin(), parsed.end(),
                   [](const Parsed& a, const Parsed& b) { return a.ts < b.ts; });
  for (std::size_t i = 1; i < parsed.size(); ++i)
    if (parsed[i].ts == parsed[i - 1].ts)
      fail(strf("ingest_csv: duplicate timestamp %s on line %d (first seen on "
                "line %d)",
                format_iso8601(parsed[i].ts).c_str(), parsed[i].line_no,
                parsed[i - 1].line_no));

  out.records.reserve(parsed.size());
  for (const auto& p : parsed) out.records.push_back({p.ts, p.value});

  // Infer the native step (median of diffs) and annotate gaps.
  if (out.records.size() >= 2) {
    std::vector<std::int64_t> diffs;
    diffs.reserve(out.records.size() - 1);
    for (std::size_t i = 1; i < out.records.size(); ++i)
      diffs.push_back(out.records[i].timestamp - out.records[i - 1].timestamp);
    std::vector<std::int64_t> sorted = diffs;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                     sorted.end());
    out.step_seconds = sorted[sorted.size() / 2];
    for (std::size_t i = 0; i < diffs.size(); ++i)
      if (diffs[i] > out.step_seconds)
        out.gaps.push_back({i, out.records[i].timestamp,
                            out.records[i + 1].timestamp});
  }
  return out;
}

}  // namespace cyclomdp
