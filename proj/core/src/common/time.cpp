#include "hg/common/time.hpp"

#include <charconv>
#include <cstdio>

#include "hg/common/error.hpp"

namespace hg {
namespace {

// Howard Hinnant's civil calendar algorithms.
std::int32_t days_from_civil(std::int32_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int32_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int32_t>(doe) - 719468;
}

void civil_from_days(std::int32_t z, std::int32_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int32_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int32_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

class Cursor {
 public:
  explicit Cursor(std::string_view text) : text_(text) {}

  int digits(std::size_t n) {
    if (pos_ + n > text_.size()) fail();
    int value = 0;
    for (std::size_t i = 0; i < n; ++i) {
      char c = text_[pos_ + i];
      if (c < '0' || c > '9') fail();
      value = value * 10 + (c - '0');
    }
    pos_ += n;
    return value;
  }

  void expect(char c) {
    if (pos_ >= text_.size() || text_[pos_] != c) fail();
    ++pos_;
  }

  bool accept(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool done() const { return pos_ == text_.size(); }

  [[noreturn]] void fail() const {
    throw Error(ErrorCode::kValidation,
                "malformed time value '" + std::string(text_) + "'");
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

Date checked_date(Cursor& cur) {
  int y = cur.digits(4);
  cur.expect('-');
  int m = cur.digits(2);
  cur.expect('-');
  int d = cur.digits(2);
  if (m < 1 || m > 12 || d < 1 || d > 31) cur.fail();
  Date date{days_from_civil(y, static_cast<unsigned>(m), static_cast<unsigned>(d))};
  std::int32_t yy;
  unsigned mm, dd;
  civil_from_days(date.days, yy, mm, dd);
  if (yy != y || static_cast<int>(mm) != m || static_cast<int>(dd) != d) cur.fail();
  return date;
}

}  // namespace

Date date_of(Timestamp ts) {
  return {static_cast<std::int32_t>(floor_div(ts.ms, kMsPerDay))};
}

Timestamp at(Date date, TimeOfDay tod) { return date.start() + tod.ms; }

std::string format_timestamp(Timestamp ts) {
  Date date = date_of(ts);
  std::int64_t in_day = ts.ms - date.start().ms;
  std::int32_t y;
  unsigned m, d;
  civil_from_days(date.days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", y, m, d,
                static_cast<int>(in_day / 3'600'000),
                static_cast<int>(in_day / 60'000 % 60),
                static_cast<int>(in_day / 1000 % 60), static_cast<int>(in_day % 1000));
  return buf;
}

Timestamp parse_timestamp(std::string_view text) {
  Cursor cur(text);
  Date date = checked_date(cur);
  cur.expect('T');
  int hh = cur.digits(2);
  cur.expect(':');
  int mi = cur.digits(2);
  cur.expect(':');
  int ss = cur.digits(2);
  int ms = 0;
  if (cur.accept('.')) ms = cur.digits(3);
  cur.expect('Z');
  if (!cur.done() || hh > 23 || mi > 59 || ss > 59) cur.fail();
  return at(date, TimeOfDay{((hh * 60 + mi) * 60 + ss) * 1000 + ms});
}

std::optional<Timestamp> try_parse_timestamp(std::string_view text) {
  try {
    return parse_timestamp(text);
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::string format_date(Date date) {
  std::int32_t y;
  unsigned m, d;
  civil_from_days(date.days, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
  return buf;
}

Date parse_date(std::string_view text) {
  Cursor cur(text);
  Date date = checked_date(cur);
  if (!cur.done()) cur.fail();
  return date;
}

std::string format_time_of_day(TimeOfDay tod) {
  char buf[16];
  int secs = tod.ms / 1000;
  if (secs % 60 == 0) {
    std::snprintf(buf, sizeof buf, "%02d:%02d", secs / 3600, secs / 60 % 60);
  } else {
    std::snprintf(buf, sizeof buf, "%02d:%02d:%02d", secs / 3600, secs / 60 % 60,
                  secs % 60);
  }
  return buf;
}

TimeOfDay parse_time_of_day(std::string_view text) {
  Cursor cur(text);
  int hh = cur.digits(2);
  cur.expect(':');
  int mi = cur.digits(2);
  int ss = 0;
  if (cur.accept(':')) ss = cur.digits(2);
  if (!cur.done() || mi > 59 || ss > 59 || hh > 24 || (hh == 24 && (mi || ss))) {
    cur.fail();
  }
  return TimeOfDay{((hh * 60 + mi) * 60 + ss) * 1000};
}

}  // namespace hg
