#pragma once

// Monthly commodity series: CSV ingestion, export and validation.
//
// Schema (exact header):
//   month,breeding_herd,production_kg,imports_kg,exports_kg,price_p_per_kg
// Months are ISO "YYYY-MM", unique and contiguous. Empty cells are missing values.

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "foodsys/errors.hpp"

namespace foodsys {

using Series = std::vector<std::optional<double>>;

enum class SeriesId { herd, new_supplies, price, production, imports, exports };

inline constexpr std::array<SeriesId, 6> all_series{SeriesId::herd,       SeriesId::new_supplies,
                                                    SeriesId::price,      SeriesId::production,
                                                    SeriesId::imports,    SeriesId::exports};

inline const char* to_string(SeriesId id) {
  switch (id) {
    case SeriesId::herd: return "herd";
    case SeriesId::new_supplies: return "new_supplies";
    case SeriesId::price: return "price";
    case SeriesId::production: return "production";
    case SeriesId::imports: return "imports";
    case SeriesId::exports: return "exports";
  }
  return "unknown";
}

struct YearMonth {
  int year = 2015;
  int month = 1;  // 1..12

  int ordinal() const { return year * 12 + (month - 1); }
  static YearMonth from_ordinal(int ord) { return {ord / 12, ord % 12 + 1}; }
  YearMonth plus(int months) const { return from_ordinal(ordinal() + months); }

  std::string str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
    return buf;
  }
  friend bool operator==(const YearMonth&, const YearMonth&) = default;
};

// Month i of the dataset sits at model time t = i months.
struct Dataset {
  YearMonth start{2015, 1};
  Series herd;          // breeding herd [head]
  Series production;    // [kg/month]
  Series imports;       // [kg/month]
  Series exports;       // [kg/month]
  Series price;         // [pence/kg deadweight]
  Series new_supplies;  // production + imports - exports [kg/month]

  std::size_t months() const { return price.size(); }

  const Series& series(SeriesId id) const {
    switch (id) {
      case SeriesId::herd: return herd;
      case SeriesId::new_supplies: return new_supplies;
      case SeriesId::price: return price;
      case SeriesId::production: return production;
      case SeriesId::imports: return imports;
      case SeriesId::exports: return exports;
    }
    throw usage_error("unknown series");
  }
  Series& series(SeriesId id) { return const_cast<Series&>(std::as_const(*this).series(id)); }

  static Dataset empty(std::size_t months, YearMonth start = {2015, 1}) {
    Dataset d;
    d.start = start;
    for (SeriesId id : all_series) d.series(id).assign(months, std::nullopt);
    return d;
  }

  std::size_t observed(SeriesId id) const {
    const auto& s = series(id);
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](const auto& v) { return v.has_value(); }));
  }

  std::size_t total_observed() const {
    std::size_t n = 0;
    for (SeriesId id : all_series) n += observed(id);
    return n;
  }

  // Recomputes new_supplies wherever production, imports and exports are all present.
  void derive_new_supplies() {
    new_supplies.assign(months(), std::nullopt);
    for (std::size_t i = 0; i < months(); ++i)
      if (production[i] && imports[i] && exports[i])
        new_supplies[i] = *production[i] + *imports[i] - *exports[i];
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline constexpr std::string_view csv_header =
    "month,breeding_herd,production_kg,imports_kg,exports_kg,price_p_per_kg";

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  out.push_back(cell);
  return out;
}

inline std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline YearMonth parse_month(const std::string& cell, std::size_t row) {
  int y = 0, m = 0;
  char tail = 0;
  if (cell.size() != 7 || cell[4] != '-' || std::sscanf(cell.c_str(), "%4d-%2d%c", &y, &m, &tail) != 2 ||
      !std::isdigit(static_cast<unsigned char>(cell[0])) || !std::isdigit(static_cast<unsigned char>(cell[5])) ||
      m < 1 || m > 12)
    throw load_error(row, "month", "malformed month '" + cell + "', expected YYYY-MM");
  return {y, m};
}

inline std::optional<double> parse_value(const std::string& raw, std::size_t row, const std::string& column) {
  const std::string cell = trim(raw);
  if (cell.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v))
    throw load_error(row, column, "non-numeric value '" + cell + "'");
  if (v < 0.0) throw load_error(row, column, "negative value '" + cell + "'");
  return v;
}

} // namespace detail

inline Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw load_error(1, "header", "file is empty; header required");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  if (line != csv_header) throw load_error(1, "header", "header must be exactly '" + std::string(csv_header) + "'");

  static const char* columns[] = {"month", "breeding_herd", "production_kg", "imports_kg", "exports_kg",
                                  "price_p_per_kg"};
  Dataset d;
  std::optional<YearMonth> first;
  int last_ordinal = 0;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 6)
      throw load_error(row, cells.size() < 6 ? columns[cells.size()] : "price_p_per_kg",
                       "expected 6 cells, found " + std::to_string(cells.size()));
    const YearMonth ym = detail::parse_month(detail::trim(cells[0]), row);
    if (!first) {
      first = ym;
    } else if (ym.ordinal() <= last_ordinal) {
      throw load_error(row, "month", (ym.ordinal() == last_ordinal ? "duplicate month " : "month out of order ") + ym.str());
    } else if (ym.ordinal() != last_ordinal + 1) {
      throw load_error(row, "month", "months are not contiguous: gap before " + ym.str());
    }
    last_ordinal = ym.ordinal();
    d.herd.push_back(detail::parse_value(cells[1], row, columns[1]));
    d.production.push_back(detail::parse_value(cells[2], row, columns[2]));
    d.imports.push_back(detail::parse_value(cells[3], row, columns[3]));
    d.exports.push_back(detail::parse_value(cells[4], row, columns[4]));
    d.price.push_back(detail::parse_value(cells[5], row, columns[5]));
  }
  if (first) d.start = *first;
  d.derive_new_supplies();
  return d;
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw load_error(0, "", "cannot open '" + path + "'");
  return read_csv(in);
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream& out, const Dataset& d) {
  out << csv_header << '\n';
  auto cell = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  for (std::size_t i = 0; i < d.months(); ++i) {
    out << d.start.plus(static_cast<int>(i)).str() << ',' << cell(d.herd[i]) << ',' << cell(d.production[i]) << ','
        << cell(d.imports[i]) << ',' << cell(d.exports[i]) << ',' << cell(d.price[i]) << '\n';
  }
}

enum class Severity { info, warning, fatal };

inline const char* to_string(Severity s) {
  switch (s) {
    case Severity::info: return "info";
    case Severity::warning: return "warning";
    case Severity::fatal: return "fatal";
  }
  return "unknown";
}

struct Finding {
  Severity severity;
  std::string series;
  std::string message;
};

struct SeriesStats {
  SeriesId id;
  std::size_t observed = 0;
  std::size_t missing = 0;
  std::size_t longest_gap = 0;
  std::optional<double> min, max;
  bool positive = true;  // lognormal support
};

struct ValidationReport {
  std::size_t months = 0;
  YearMonth start;
  std::vector<SeriesStats> series;
  std::vector<Finding> findings;

  bool fatal() const {
    return std::any_of(findings.begin(), findings.end(), [](const Finding& f) { return f.severity == Severity::fatal; });
  }
};

inline ValidationReport validate(const Dataset& d) {
  ValidationReport rep;
  rep.months = d.months();
  rep.start = d.start;
  std::size_t observed_series = 0;
  for (SeriesId id : all_series) {
    const auto& s = d.series(id);
    SeriesStats st;
    st.id = id;
    std::size_t run = 0;
    std::vector<int> observed_calendar_months;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s[i]) {
        ++st.missing;
        st.longest_gap = std::max(st.longest_gap, ++run);
        continue;
      }
      run = 0;
      ++st.observed;
      const double v = *s[i];
      st.min = st.min ? std::min(*st.min, v) : v;
      st.max = st.max ? std::max(*st.max, v) : v;
      if (!(v > 0.0)) {
        st.positive = false;
        rep.findings.push_back({Severity::fatal, to_string(id),
                                "non-positive value at " + d.start.plus(static_cast<int>(i)).str() +
                                    " violates lognormal support"});
      }
      observed_calendar_months.push_back(d.start.plus(static_cast<int>(i)).month);
    }
    if (st.observed > 0) ++observed_series;
    if (st.observed > 0 && st.missing > 0) {
      const bool survey = std::all_of(observed_calendar_months.begin(), observed_calendar_months.end(),
                                      [](int m) { return m == 6 || m == 12; });
      rep.findings.push_back({Severity::info, to_string(id),
                              survey ? "observed only in June/December survey months"
                                     : std::to_string(st.missing) + " missing months, longest gap " +
                                           std::to_string(st.longest_gap)});
    }
    if (id == SeriesId::price && st.observed > 0 && (*st.min < 50.0 || *st.max > 300.0))
      rep.findings.push_back({Severity::warning, "price", "values outside plausible range 50-300 p/kg"});
    if (id == SeriesId::herd && st.observed > 0 && (*st.min < 1e5 || *st.max > 1e6))
      rep.findings.push_back({Severity::warning, "herd", "values outside plausible range 1e5-1e6 head"});
    rep.series.push_back(st);
  }
  if (observed_series == 0) rep.findings.push_back({Severity::fatal, "", "no observed series"});
  return rep;
}

} // namespace foodsys
