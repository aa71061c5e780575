#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace farmtreat {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Bad inputs (files, schemas, parameter ranges). CLI exit code 2.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failures (rank deficiency, non-convergence, degenerate
// spectra). CLI exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Calendar dates (proleptic Gregorian), used for daily panels.

struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  // Days since 1970-01-01 (negative before). Howard Hinnant's civil
  // calendar algorithm.
  long serial() const {
    long y = year;
    const long m = month;
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy =
        static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + day - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
  }

  // 0 = Monday ... 6 = Sunday.
  int weekday() const {
    long s = serial();
    return static_cast<int>(((s % 7) + 7 + 3) % 7);
  }

  auto operator<=>(const Date&) const = default;

  std::string to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
  }

  static bool leap(int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
  }

  static int days_in_month(int y, int m) {
    static const int d[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    return m == 2 && leap(y) ? 29 : d[m - 1];
  }

  // Parses "YYYY-MM-DD". Throws ValidationError on malformed input.
  static Date parse(const std::string& s) {
    int y = 0, m = 0, d = 0;
    char dash1 = 0, dash2 = 0, tail = 0;
    int got = std::sscanf(s.c_str(), "%d%c%d%c%d%c", &y, &dash1, &m, &dash2,
                          &d, &tail);
    if (got != 5 || dash1 != '-' || dash2 != '-' || m < 1 || m > 12 || d < 1 ||
        d > days_in_month(y, m)) {
      throw ValidationError("not an ISO date: '" + s + "'");
    }
    return Date{y, m, d};
  }
};

// ---------------------------------------------------------------------------
// Time axis of a panel: integer periods or calendar dates.

class TimeIndex {
 public:
  TimeIndex() = default;
  explicit TimeIndex(std::vector<long> periods) : axis_(std::move(periods)) {}
  explicit TimeIndex(std::vector<Date> dates) : axis_(std::move(dates)) {}

  static TimeIndex consecutive(Index t) {
    std::vector<long> p(static_cast<std::size_t>(t));
    for (Index i = 0; i < t; ++i) p[static_cast<std::size_t>(i)] = i + 1;
    return TimeIndex(std::move(p));
  }

  Index size() const {
    return std::visit([](const auto& v) { return static_cast<Index>(v.size()); },
                      axis_);
  }

  bool has_dates() const {
    return std::holds_alternative<std::vector<Date>>(axis_);
  }

  const std::vector<long>& periods() const {
    return std::get<std::vector<long>>(axis_);
  }
  const std::vector<Date>& dates() const {
    return std::get<std::vector<Date>>(axis_);
  }

  bool strictly_increasing() const {
    return std::visit(
        [](const auto& v) {
          for (std::size_t i = 1; i < v.size(); ++i)
            if (!(v[i - 1] < v[i])) return false;
          return true;
        },
        axis_);
  }

  std::string label(Index i) const {
    if (has_dates()) return dates()[static_cast<std::size_t>(i)].to_string();
    return std::to_string(periods()[static_cast<std::size_t>(i)]);
  }

  // Position of a time label (period number or ISO date), or -1.
  Index find(const std::string& label_str) const {
    if (has_dates()) {
      Date d = Date::parse(label_str);
      const auto& v = dates();
      for (std::size_t i = 0; i < v.size(); ++i)
        if (v[i] == d) return static_cast<Index>(i);
      return -1;
    }
    long p = 0;
    try {
      p = std::stol(label_str);
    } catch (const std::exception&) {
      throw ValidationError("not an integer period: '" + label_str + "'");
    }
    const auto& v = periods();
    for (std::size_t i = 0; i < v.size(); ++i)
      if (v[i] == p) return static_cast<Index>(i);
    return -1;
  }

  bool operator==(const TimeIndex& other) const { return axis_ == other.axis_; }

 private:
  std::variant<std::vector<long>, std::vector<Date>> axis_ =
      std::vector<long>{};
};

}  // namespace farmtreat
