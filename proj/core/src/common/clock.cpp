#include "storyend/common/clock.hpp"

#include <ctime>

#include <fmt/format.h>

#include "storyend/common/error.hpp"

namespace storyend {

std::string format_timestamp(std::chrono::system_clock::time_point tp) {
  using namespace std::chrono;
  const auto ms = duration_cast<milliseconds>(tp.time_since_epoch()).count();
  auto secs = static_cast<std::time_t>(ms / 1000);
  auto millis = ms % 1000;
  if (millis < 0) {
    millis += 1000;
    --secs;
  }
  std::tm utc{};
  gmtime_r(&secs, &utc);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", utc.tm_year + 1900, utc.tm_mon + 1,
                     utc.tm_mday, utc.tm_hour, utc.tm_min, utc.tm_sec, millis);
}

std::chrono::system_clock::time_point parse_timestamp(const std::string& text) {
  std::tm utc{};
  int millis = 0;
  int consumed = 0;
  const int fields = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &utc.tm_year, &utc.tm_mon,
                                 &utc.tm_mday, &utc.tm_hour, &utc.tm_min, &utc.tm_sec, &consumed);
  if (fields != 6) throw ConfigError("malformed timestamp '" + text + "'");
  std::string_view rest(text.c_str() + consumed);
  if (!rest.empty() && rest.front() == '.') {
    rest.remove_prefix(1);
    int digits = 0;
    while (!rest.empty() && rest.front() >= '0' && rest.front() <= '9') {
      if (digits < 3) millis = millis * 10 + (rest.front() - '0');
      ++digits;
      rest.remove_prefix(1);
    }
    for (; digits < 3; ++digits) millis *= 10;
  }
  if (rest != "Z" && !rest.empty()) throw ConfigError("timestamp must be UTC ('Z'): '" + text + "'");
  utc.tm_year -= 1900;
  utc.tm_mon -= 1;
  const std::time_t secs = timegm(&utc);
  return std::chrono::system_clock::time_point{std::chrono::seconds(secs)} + std::chrono::milliseconds(millis);
}

}  // namespace storyend
