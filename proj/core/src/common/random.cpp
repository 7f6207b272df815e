#include "hg/common/random.hpp"

#include <openssl/rand.h>

#include "hg/common/error.hpp"

namespace hg {

void SecureRandom::fill(std::span<std::uint8_t> out) {
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
    throw Error(ErrorCode::kInternal, "RAND_bytes failed");
  }
}

void SeededRandom::fill(std::span<std::uint8_t> out) {
  std::lock_guard lock(mu_);
  for (auto& b : out) b = static_cast<std::uint8_t>(engine_() >> 56);
}

}  // namespace hg
