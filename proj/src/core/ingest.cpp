#include "driftscope/core/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include "driftscope/errors.hpp"

namespace driftscope {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool is_missing(std::string_view s) {
  s = trim(s);
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null";
}

// Fixed-width digit group at `pos`; advances `pos` on success.
bool take_digits(std::string_view s, std::size_t& pos, std::size_t width, int& out) {
  if (pos + width > s.size()) return false;
  if (!parse_int(s.substr(pos, width), out)) return false;
  pos += width;
  return true;
}

bool take_char(std::string_view s, std::size_t& pos, char c) {
  if (pos < s.size() && s[pos] == c) {
    ++pos;
    return true;
  }
  return false;
}

std::optional<int> parse_label_token(std::string_view s) {
  s = trim(s);
  if (s == "1" || s == "true" || s == "TRUE" || s == "True") return 1;
  if (s == "0" || s == "false" || s == "FALSE" || s == "False") return 0;
  if (auto v = parse_double(s); v && (*v == 0.0 || *v == 1.0)) return static_cast<int>(*v);
  return std::nullopt;
}

}  // namespace

std::optional<EpochSeconds> parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  const std::string_view s = trim(text);
  if (s.empty()) return std::nullopt;

  if (EpochSeconds epoch = 0; parse_int(s, epoch)) return epoch;

  std::size_t pos = 0;
  int y = 0, mo = 0, d = 0;
  if (!take_digits(s, pos, 4, y) || !take_char(s, pos, '-') || !take_digits(s, pos, 2, mo) ||
      !take_char(s, pos, '-') || !take_digits(s, pos, 2, d)) {
    return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;

  int hh = 0, mm = 0, ss = 0;
  if (pos < s.size() && (s[pos] == 'T' || s[pos] == ' ')) {
    ++pos;
    if (!take_digits(s, pos, 2, hh) || !take_char(s, pos, ':') || !take_digits(s, pos, 2, mm)) return std::nullopt;
    if (take_char(s, pos, ':')) {
      if (!take_digits(s, pos, 2, ss)) return std::nullopt;
      if (take_char(s, pos, '.') || take_char(s, pos, ',')) {
        const std::size_t start = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        if (pos == start) return std::nullopt;
      }
    }
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  }

  int offset_seconds = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' || s[pos] == 'z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      const int sign = s[pos] == '-' ? -1 : 1;
      ++pos;
      int oh = 0, om = 0;
      if (!take_digits(s, pos, 2, oh)) return std::nullopt;
      take_char(s, pos, ':');
      if (pos < s.size() && !take_digits(s, pos, 2, om)) return std::nullopt;
      if (oh > 23 || om > 59) return std::nullopt;
      offset_seconds = sign * (oh * 3600 + om * 60);
    }
  }
  if (pos != s.size()) return std::nullopt;

  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<EpochSeconds>(days) * 86400 + hh * 3600 + mm * 60 + ss - offset_seconds;
}

std::string format_timestamp(EpochSeconds t) {
  using namespace std::chrono;
  const auto day_count = (t >= 0 ? t / 86400 : -((-t + 86399) / 86400));
  const EpochSeconds secs = t - day_count * 86400;
  const year_month_day ymd{sys_days{days{day_count}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(secs / 3600),
                static_cast<int>(secs / 60 % 60), static_cast<int>(secs % 60));
  return buf;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else if (c != '\r' && c != '\n') {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

IngestResult ingest_csv(std::istream& in, const DatasetSchema& schema, const std::string& file_name) {
  const std::string where = file_name.empty() ? std::string("input") : file_name;
  std::string line;
  if (!std::getline(in, line)) throw MalformedHeader(where + ": missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = split_csv_line(line);
  const std::size_t dims = schema.attribute_count();
  auto header_ok = [&] {
    if (header.size() != dims + 3) return false;
    if (trim(header[0]) != "timestamp" || trim(header[1]) != "source") return false;
    const auto label = trim(header[2]);
    if (label != "label" && label != schema.label_name) return false;
    for (std::size_t k = 0; k < dims; ++k) {
      if (trim(header[k + 3]) != schema.attribute_names[k]) return false;
    }
    return true;
  };
  if (!header_ok()) {
    std::string expected = "timestamp,source,label";
    for (const auto& a : schema.attribute_names) expected += "," + a;
    throw MalformedHeader(where + ": header does not match schema; expected `" + expected + "`");
  }

  // Predicate on the label column or on one of the attributes.
  std::optional<std::size_t> predicate_attr;
  bool predicate_on_label = false;
  if (schema.label_predicate) {
    const auto& column = schema.label_predicate->column;
    if (column.empty() || column == "label" || column == schema.label_name) {
      predicate_on_label = true;
    } else if (auto k = schema.attribute_index(column)) {
      predicate_attr = *k;
    } else {
      throw ConfigError("label predicate refers to unknown column " + column);
    }
  }

  struct MeanAcc {
    double sum = 0.0;
    std::size_t count = 0;
  };
  std::map<SourceId, std::vector<MeanAcc>> running;

  IngestResult result;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    auto reject = [&](std::string reason) { result.rejects.push_back({file_name, row, std::move(reason)}); };

    const auto fields = split_csv_line(line);
    if (fields.size() != dims + 3) {
      reject("expected " + std::to_string(dims + 3) + " columns, found " + std::to_string(fields.size()));
      continue;
    }
    const auto ts = parse_timestamp(fields[0]);
    if (!ts) {
      reject("unparseable timestamp `" + fields[0] + "`");
      continue;
    }
    const std::string source{trim(fields[1])};
    if (!schema.source_index(source)) {
      reject("unknown source `" + source + "`");
      continue;
    }

    std::vector<std::optional<double>> cells(dims);
    bool bad_cell = false;
    for (std::size_t k = 0; k < dims && !bad_cell; ++k) {
      if (is_missing(fields[k + 3])) continue;
      cells[k] = parse_double(fields[k + 3]);
      if (!cells[k]) {
        reject("unparseable value `" + fields[k + 3] + "` for attribute " + schema.attribute_names[k]);
        bad_cell = true;
      }
    }
    if (bad_cell) continue;

    std::optional<int> label;
    if (predicate_on_label) {
      if (auto v = parse_double(fields[2])) label = schema.label_predicate->apply(*v) ? 1 : 0;
    } else if (predicate_attr) {
      if (cells[*predicate_attr]) label = schema.label_predicate->apply(*cells[*predicate_attr]) ? 1 : 0;
    } else {
      label = parse_label_token(fields[2]);
    }
    if (!label) {
      reject("unparseable label `" + fields[2] + "`");
      continue;
    }

    auto& acc = running[source];
    if (acc.empty()) acc.resize(dims);
    DataRecord record{source, *ts, std::vector<double>(dims), *label};
    for (std::size_t k = 0; k < dims; ++k) {
      if (cells[k]) {
        record.x[k] = *cells[k];
      } else {
        record.x[k] = acc[k].count > 0 ? acc[k].sum / static_cast<double>(acc[k].count) : 0.0;
      }
    }
    for (std::size_t k = 0; k < dims; ++k) {
      if (cells[k]) {
        acc[k].sum += *cells[k];
        ++acc[k].count;
      }
    }
    result.records.push_back(std::move(record));
  }

  result.rows_read = row;
  if (result.rejects.size() * 2 > row) {
    throw IngestError(where + ": " + std::to_string(result.rejects.size()) + " of " + std::to_string(row) +
                      " rows rejected (first: row " + std::to_string(result.rejects.front().row) + ", " +
                      result.rejects.front().reason + ")");
  }
  std::stable_sort(result.records.begin(), result.records.end(), [](const DataRecord& a, const DataRecord& b) {
    if (a.source_id != b.source_id) return a.source_id < b.source_id;
    return a.timestamp < b.timestamp;
  });
  return result;
}

}  // namespace driftscope
