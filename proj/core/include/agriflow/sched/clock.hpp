#pragma once

#include <atomic>

#include "agriflow/time.hpp"

namespace agriflow::sched {

enum class ClockMode { kReal, kSimulated };

/// Source of "now" for the whole platform. A simulated clock only moves when
/// told to and never backwards.
class Clock {
 public:
  static Clock real();
  static Clock simulated(Timestamp start);

  Clock(const Clock& other) : mode_(other.mode_), now_(other.now_.load()) {}

  ClockMode mode() const noexcept { return mode_; }
  Timestamp now() const;

  /// Simulated mode only. Throws kInvalidArgument when `t` is in the past or
  /// the clock is real.
  void set(Timestamp t);

 private:
  Clock(ClockMode mode, Timestamp start) : mode_(mode), now_(start.time_since_epoch().count()) {}

  ClockMode mode_;
  std::atomic<std::int64_t> now_;  // seconds since epoch, simulated mode
};

}  // namespace agriflow::sched
