#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cyclomdp {

struct SeriesRecord {
  std::int64_t timestamp = 0;  // epoch seconds, UTC
  double value = 0.0;
};

enum class TimeFormat { Iso8601, EpochSeconds };

struct SeriesSchema {
  std::string time_column = "timestamp";
  std::string value_column = "value";
  TimeFormat time_format = TimeFormat::Iso8601;
  std::string unit;  // "MW", "m/s", "blocks", ...
  bool drop_missing = true;
};

struct SeriesGap {
  std::size_t index = 0;  // record preceding the gap
  std::int64_t from = 0, to = 0;
};

struct Series {
  std::vector<SeriesRecord> records;  // strictly increasing timestamps
  std::string unit;
  std::int64_t step_seconds = 0;  // inferred native step
  std::vector<SeriesGap> gaps;
  int dropped_missing = 0;
};

// Parses a UTF-8 comma-separated file with a header row. Malformed rows are
// reported with their line numbers; duplicate timestamps are rejected naming
// the line; missing values follow the schema policy (drop by default).
Series ingest_csv(const std::string& path, const SeriesSchema& schema);

// "YYYY-MM-DD[ T]HH:MM:SS[Z]" or "YYYY-MM-DD" (UTC) -> epoch seconds.
std::int64_t parse_iso8601(const std::string& text);
std::string format_iso8601(std::int64_t epoch_seconds);

// Maps calendar instants onto model time (real offsets from an epoch, in
// units of `unit_seconds`).
struct TimeMap {
  std::int64_t epoch = 0;
  double unit_seconds = 3600.0;

  double to_model_time(std::int64_t ts) const {
    return static_cast<double>(ts - epoch) / unit_seconds;
  }
};

}  // namespace cyclomdp
