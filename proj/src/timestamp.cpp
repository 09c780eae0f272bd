#include "histchain/timestamp.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <stdexcept>

namespace histchain {

namespace {

unsigned parse_digits(std::string_view text, std::size_t pos, std::size_t width) {
  unsigned value = 0;
  const char* first = text.data() + pos;
  for (std::size_t i = 0; i < width; ++i) {
    if (first[i] < '0' || first[i] > '9') {
      throw std::invalid_argument("bad timestamp: " + std::string(text));
    }
  }
  std::from_chars(first, first + width, value);
  return value;
}

}  // namespace

MinuteStamp MinuteStamp::from_civil(int year, unsigned month, unsigned day, unsigned hour,
                                    unsigned minute) {
  using namespace std::chrono;
  const year_month_day date{std::chrono::year{year}, std::chrono::month{month},
                            std::chrono::day{day}};
  if (!date.ok() || hour > 23 || minute > 59) {
    throw std::invalid_argument("invalid civil time");
  }
  const auto days_since_epoch = sys_days{date}.time_since_epoch().count();
  return MinuteStamp(static_cast<std::int64_t>(days_since_epoch) * 1440 + hour * 60 + minute);
}

MinuteStamp MinuteStamp::parse(std::string_view iso) {
  // YYYY-MM-DDTHH:MM
  if (iso.size() != 16 || iso[4] != '-' || iso[7] != '-' || iso[10] != 'T' || iso[13] != ':') {
    throw std::invalid_argument("bad timestamp: " + std::string(iso));
  }
  return from_civil(static_cast<int>(parse_digits(iso, 0, 4)), parse_digits(iso, 5, 2),
                    parse_digits(iso, 8, 2), parse_digits(iso, 11, 2), parse_digits(iso, 14, 2));
}

std::string MinuteStamp::iso() const {
  using namespace std::chrono;
  std::int64_t days = minutes_ / 1440;
  std::int64_t rem = minutes_ % 1440;
  if (rem < 0) {
    rem += 1440;
    --days;
  }
  const year_month_day date{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()),
                static_cast<int>(rem / 60), static_cast<int>(rem % 60));
  return buf;
}

std::string MinuteStamp::clock() const { return iso().substr(11); }

}  // namespace histchain
