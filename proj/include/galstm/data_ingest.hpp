#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "galstm/errors.hpp"
#include "galstm/numerics.hpp"

namespace galstm {

// ---------------------------------------------------------------------------
// Calendar date

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  friend constexpr auto operator<=>(const Date&, const Date&) = default;

  static constexpr bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

  static constexpr int days_in_month(int y, int m) {
    constexpr std::array<int, 12> days{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && is_leap(y) ? 29 : days[static_cast<std::size_t>(m - 1)];
  }

  constexpr bool valid() const {
    return month >= 1 && month <= 12 && day >= 1 && day <= days_in_month(year, month);
  }

  // Accepts YYYY/M/D and YYYY-MM-DD.
  static std::optional<Date> parse(std::string_view s) {
    const char sep = s.find('/') != std::string_view::npos ? '/' : '-';
    std::array<int, 3> parts{};
    std::size_t pos = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const std::size_t end = k < 2 ? s.find(sep, pos) : s.size();
      if (end == std::string_view::npos || end == pos) return std::nullopt;
      const auto field = s.substr(pos, end - pos);
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), parts[k]);
      if (ec != std::errc{} || ptr != field.data() + field.size()) return std::nullopt;
      pos = end + 1;
    }
    Date d{parts[0], parts[1], parts[2]};
    if (!d.valid()) return std::nullopt;
    return d;
  }

  std::string iso() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
  }
};

inline std::ostream& operator<<(std::ostream& os, const Date& d) { return os << d.iso(); }

// ---------------------------------------------------------------------------
// Records and series

enum class Column { open, high, low, close };

inline constexpr std::array<Column, 4> kAllColumns{Column::open, Column::high, Column::low,
                                                   Column::close};

inline std::string_view column_name(Column c) {
  switch (c) {
    case Column::open: return "Open";
    case Column::high: return "High";
    case Column::low: return "Low";
    case Column::close: return "Close";
  }
  return "?";
}

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

inline std::optional<Column> parse_column(std::string_view s) {
  const auto lower = lowercase(s);
  for (Column c : kAllColumns) {
    if (lower == lowercase(column_name(c))) return c;
  }
  return std::nullopt;
}

struct OhlcRecord {
  Date date;
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;

  double value(Column c) const {
    switch (c) {
      case Column::open: return open;
      case Column::high: return high;
      case Column::low: return low;
      case Column::close: return close;
    }
    return close;
  }

  friend bool operator==(const OhlcRecord&, const OhlcRecord&) = default;
};

// Date-ordered records. Construct through load_csv/make_series so the
// ordering and uniqueness invariants hold.
struct Series {
  std::vector<OhlcRecord> records;
  Column target = Column::close;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  const Date& first_date() const { return records.front().date; }
  const Date& last_date() const { return records.back().date; }

  std::vector<double> values(Column c) const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.value(c));
    return out;
  }
  std::vector<double> values() const { return values(target); }

  friend bool operator==(const Series&, const Series&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

// Sorts by date and rejects duplicates. OHLC consistency problems are
// appended to `warnings` rather than raised.
inline Series make_series(std::vector<OhlcRecord> records, Column target = Column::close,
                          std::vector<std::string>* warnings = nullptr) {
  if (records.empty()) throw EmptySeriesError("series has no records");
  std::stable_sort(records.begin(), records.end(),
                   [](const auto& a, const auto& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].date == records[i - 1].date) {
      throw DuplicateDateError(0, "duplicate date " + records[i].date.iso());
    }
  }
  if (warnings != nullptr) {
    for (const auto& r : records) {
      if (r.low > std::min(r.open, r.close) || r.high < std::max(r.open, r.close)) {
        warnings->push_back(r.date.iso() + ": high/low range does not contain open/close");
      }
    }
  }
  return Series{std::move(records), target};
}

inline Series parse_csv(std::istream& in, Column target = Column::close,
                        std::vector<std::string>* warnings = nullptr) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (!have_header && std::getline(in, line)) {
    ++line_no;
    have_header = !detail::trim(line).empty();
  }
  if (!have_header) throw SchemaError("missing header row (expected Date,Open,High,Low,Close)");

  const auto header = detail::split_fields(line);
  std::array<std::size_t, 5> index{};
  constexpr std::array<std::string_view, 5> names{"date", "open", "high", "low", "close"};
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto it = std::find_if(header.begin(), header.end(),
                                 [&](std::string_view h) { return lowercase(h) == names[k]; });
    if (it == header.end()) {
      throw SchemaError("missing column '" + std::string(names[k]) + "' in header");
    }
    index[k] = static_cast<std::size_t>(it - header.begin());
  }
  const std::size_t needed = *std::max_element(index.begin(), index.end()) + 1;

  std::vector<OhlcRecord> records;
  std::vector<std::size_t> lines;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() < needed) throw ParseError(line_no, "too few fields");
    OhlcRecord rec;
    const auto date = Date::parse(fields[index[0]]);
    if (!date) throw ParseError(line_no, "unparseable date '" + std::string(fields[index[0]]) + "'");
    rec.date = *date;
    std::array<double*, 4> slots{&rec.open, &rec.high, &rec.low, &rec.close};
    for (std::size_t k = 0; k < 4; ++k) {
      const auto field = fields[index[k + 1]];
      const auto v = detail::parse_double(field);
      if (!v) throw ParseError(line_no, "unparseable number '" + std::string(field) + "'");
      if (!std::isfinite(*v) || *v <= 0.0) {
        throw ParseError(line_no, "price must be finite and positive, got '" + std::string(field) + "'");
      }
      *slots[k] = *v;
    }
    records.push_back(rec);
    lines.push_back(line_no);
  }
  if (records.empty()) throw EmptySeriesError("no data rows after header");

  // Report duplicates with the line of the second occurrence.
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return records[a].date < records[b].date; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (records[order[i]].date == records[order[i - 1]].date) {
      const auto later = std::max(lines[order[i]], lines[order[i - 1]]);
      throw DuplicateDateError(later, "duplicate date " + records[order[i]].date.iso());
    }
  }
  return make_series(std::move(records), target, warnings);
}

inline Series load_csv(const std::filesystem::path& path, Column target = Column::close,
                       std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return parse_csv(in, target, warnings);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path.string() + ": " + e.what());
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  } catch (const EmptySeriesError& e) {
    throw EmptySeriesError(path.string() + ": " + e.what());
  }
}

inline void write_csv(const Series& series, std::ostream& out) {
  out << "Date,Open,High,Low,Close\n";
  for (const auto& r : series.records) {
    out << r.date.iso() << ',' << detail::format_double(r.open) << ','
        << detail::format_double(r.high) << ',' << detail::format_double(r.low) << ','
        << detail::format_double(r.close) << '\n';
  }
}

inline void write_csv(const Series& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_csv(series, out);
}

// ---------------------------------------------------------------------------
// Descriptive statistics

struct ColumnStats {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample (n-1); 0 for a single observation
  double min = 0.0;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  double max = 0.0;
};

struct SeriesStats {
  std::array<ColumnStats, 4> columns;

  const ColumnStats& operator[](Column c) const { return columns[static_cast<std::size_t>(c)]; }
};

// Quantile of sorted data by linear interpolation between closest ranks:
// position p*(n-1), interpolated between its floor and ceil.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline ColumnStats describe_values(std::vector<double> v) {
  if (v.empty()) throw EmptySeriesError("describe: no values");
  ColumnStats s;
  s.count = v.size();
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.q25 = quantile_sorted(v, 0.25);
  s.q50 = quantile_sorted(v, 0.50);
  s.q75 = quantile_sorted(v, 0.75);
  return s;
}

inline SeriesStats describe(const Series& series) {
  if (series.empty()) throw EmptySeriesError("describe: empty series");
  SeriesStats out;
  for (Column c : kAllColumns) {
    out.columns[static_cast<std::size_t>(c)] = describe_values(series.values(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Min-max scaling

struct ScalerParams {
  double lo = 0.0;
  double hi = 1.0;

  double scale(double v) const { return (v - lo) / (hi - lo); }
  double inverse(double s) const { return lo + s * (hi - lo); }

  friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

inline ScalerParams fit_scaler(std::span<const double> values) {
  if (values.empty()) throw EmptySeriesError("fit_scaler: no values");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  if (!(*mx > *mn)) throw DegenerateScaleError("fit_scaler: column is constant");
  return {*mn, *mx};
}

inline ScalerParams fit_scaler(const Series& train, Column column) {
  const auto v = train.values(column);
  return fit_scaler(v);
}

inline double scale(double value, const ScalerParams& s) { return s.scale(value); }
inline double inverse_scale(double scaled_value, const ScalerParams& s) { return s.inverse(scaled_value); }

inline std::vector<double> scale_all(std::span<const double> values, const ScalerParams& s) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(s.scale(v));
  return out;
}

// ---------------------------------------------------------------------------
// Sliding windows

// Row i of `inputs` is window i; targets(i) is the value that follows it.
struct WindowedDataset {
  Matrix inputs;
  Vector targets;
  std::size_t lookback = 0;
  ScalerParams scaler;

  std::size_t size() const { return static_cast<std::size_t>(targets.size()); }
  Vector window(std::size_t i) const { return inputs.row(static_cast<Eigen::Index>(i)).transpose(); }
};

// Windows over already-scaled values. Targets start at index `first_target`
// (default: lookback); values before it only serve as context.
inline WindowedDataset make_windows(std::span<const double> scaled_values, std::size_t lookback,
                                    const ScalerParams& scaler,
                                    std::optional<std::size_t> first_target = std::nullopt) {
  if (lookback == 0) throw InsufficientDataError("make_windows: lookback must be positive");
  const std::size_t start = first_target.value_or(lookback);
  if (start < lookback) throw InsufficientDataError("make_windows: first target lacks context");
  if (scaled_values.size() <= start) {
    throw InsufficientDataError("make_windows: series of length " +
                                std::to_string(scaled_values.size()) +
                                " is too short for lookback " + std::to_string(lookback));
  }
  const std::size_t count = scaled_values.size() - start;
  WindowedDataset ds;
  ds.lookback = lookback;
  ds.scaler = scaler;
  ds.inputs.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(lookback));
  ds.targets.resize(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t t = start + i;
    for (std::size_t j = 0; j < lookback; ++j) {
      ds.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = scaled_values[t - lookback + j];
    }
    ds.targets(static_cast<Eigen::Index>(i)) = scaled_values[t];
  }
  return ds;
}

inline WindowedDataset make_windows(const Series& series, std::size_t lookback,
                                    const ScalerParams& scaler) {
  if (lookback >= series.size()) {
    throw InsufficientDataError("make_windows: lookback " + std::to_string(lookback) +
                                " >= series length " + std::to_string(series.size()));
  }
  const auto scaled_values = scale_all(series.values(), scaler);
  return make_windows(scaled_values, lookback, scaler);
}

// ---------------------------------------------------------------------------
// Chronological split

struct SplitSeries {
  Series train;
  Series test;
};

// train = dates <= boundary, test = the rest. Both sides must be non-empty.
inline SplitSeries chronological_split(const Series& series, const Date& boundary) {
  if (series.empty()) throw EmptySeriesError("chronological_split: empty series");
  if (boundary < series.first_date() || !(boundary < series.last_date())) {
    throw SplitError("split boundary " + boundary.iso() + " is outside [" +
                     series.first_date().iso() + ", " + series.last_date().iso() + ")");
  }
  const auto cut = std::upper_bound(series.records.begin(), series.records.end(), boundary,
                                    [](const Date& d, const OhlcRecord& r) { return d < r.date; });
  SplitSeries out;
  out.train = Series{{series.records.begin(), cut}, series.target};
  out.test = Series{{cut, series.records.end()}, series.target};
  return out;
}

}  // namespace galstm
