#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace histchain {

/// Wall-clock minute, counted from 1970-01-01T00:00 UTC.
/// Rendered as `YYYY-MM-DDTHH:MM` everywhere it is serialized.
class MinuteStamp {
 public:
  constexpr MinuteStamp() = default;
  constexpr explicit MinuteStamp(std::int64_t minutes) : minutes_(minutes) {}

  static MinuteStamp from_civil(int year, unsigned month, unsigned day, unsigned hour,
                                unsigned minute);
  /// Throws std::invalid_argument on anything but the exact ISO minute form.
  static MinuteStamp parse(std::string_view iso);

  constexpr std::int64_t minutes() const { return minutes_; }
  std::string iso() const;
  /// `HH:MM`, the short form used in historian tables.
  std::string clock() const;

  constexpr MinuteStamp operator+(std::int64_t m) const { return MinuteStamp(minutes_ + m); }
  constexpr auto operator<=>(const MinuteStamp&) const = default;

 private:
  std::int64_t minutes_ = 0;
};

}  // namespace histchain
