#include "scenefuse/clock.hpp"

#include <thread>

namespace scenefuse {

void SystemClock::sleep_for(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

SystemClock& system_clock() {
  static SystemClock clock;
  return clock;
}

}  // namespace scenefuse
