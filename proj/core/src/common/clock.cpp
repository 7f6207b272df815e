#include "hg/common/clock.hpp"

#include <chrono>

namespace hg {

Timestamp SystemClock::now() const {
  using namespace std::chrono;
  return {duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count()};
}

}  // namespace hg
