#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <span>

namespace hg {

// Source of unpredictable bytes for ids, salts and tokens. The seeded
// variant exists so simulations can reproduce server state exactly.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;
};

class SecureRandom final : public RandomSource {
 public:
  void fill(std::span<std::uint8_t> out) override;
};

class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}
  void fill(std::span<std::uint8_t> out) override;

 private:
  std::mutex mu_;
  std::mt19937_64 engine_;
};

}  // namespace hg
