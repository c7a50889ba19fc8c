#pragma once

#include <chrono>
#include <memory>
#include <string>

namespace storyend {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::chrono::system_clock::time_point now() const = 0;
};

class SystemClock final : public Clock {
 public:
  std::chrono::system_clock::time_point now() const override {
    return std::chrono::system_clock::now();
  }
};

/// Always reports the same instant; used for reproducible runs.
class FixedClock final : public Clock {
 public:
  explicit FixedClock(std::chrono::system_clock::time_point at) : at_(at) {}
  std::chrono::system_clock::time_point now() const override { return at_; }

 private:
  std::chrono::system_clock::time_point at_;
};

/// RFC 3339 UTC with millisecond precision, e.g. 2024-01-01T00:00:00.000Z.
std::string format_timestamp(std::chrono::system_clock::time_point tp);
std::chrono::system_clock::time_point parse_timestamp(const std::string& text);

inline std::string timestamp_now(const Clock& clock) { return format_timestamp(clock.now()); }

}  // namespace storyend
