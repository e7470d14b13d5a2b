#include "agriflow/sched/clock.hpp"

#include "agriflow/error.hpp"

namespace agriflow::sched {

Clock Clock::real() { return Clock(ClockMode::kReal, Timestamp{}); }

Clock Clock::simulated(Timestamp start) { return Clock(ClockMode::kSimulated, start); }

Timestamp Clock::now() const {
  if (mode_ == ClockMode::kReal) return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  return Timestamp{std::chrono::seconds{now_.load()}};
}

void Clock::set(Timestamp t) {
  if (mode_ == ClockMode::kReal) throw Error(ErrorCode::kInvalidArgument, "the real clock cannot be set");
  const std::int64_t target = t.time_since_epoch().count();
  std::int64_t current = now_.load();
  if (target < current) {
    throw Error(ErrorCode::kInvalidArgument,
                "simulated time cannot move backwards (now " + format_timestamp(now()) + ")");
  }
  now_.store(target);
}

}  // namespace agriflow::sched
