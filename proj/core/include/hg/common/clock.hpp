#pragma once

#include <atomic>
#include <cstdint>

#include "hg/common/time.hpp"

namespace hg {

// Time source injected into every component that reads "now", so tests and
// the simulator can drive days of study time deterministically.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override;
};

class ManualClock final : public Clock {
 public:
  explicit ManualClock(Timestamp start = {}) : now_ms_(start.ms) {}

  Timestamp now() const override { return {now_ms_.load()}; }
  void set(Timestamp ts) { now_ms_.store(ts.ms); }
  void advance_ms(std::int64_t delta) { now_ms_.fetch_add(delta); }

 private:
  std::atomic<std::int64_t> now_ms_;
};

}  // namespace hg
