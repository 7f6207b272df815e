#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "hg/common/random.hpp"

namespace hg {

enum class EntityKind {
  kStudy,
  kSubject,
  kCohort,
  kTest,
  kTestSet,
  kTask,
  kOccurrence,
  kDatapoint,
  kDataset,
  kResult,
  kJob,
  kRule,
};

// "stu", "sub", ... as used in id prefixes.
std::string_view id_prefix(EntityKind kind);

// Length of the random part of every id.
inline constexpr std::size_t kIdBodyLength = 26;

// Produces <prefix>_<26 lowercase base32 chars> from 128 random bits.
class IdGenerator {
 public:
  explicit IdGenerator(std::shared_ptr<RandomSource> source);

  std::string next(EntityKind kind);

  // Random bearer token (not an entity id).
  std::string token();

  RandomSource& source() { return *source_; }

 private:
  std::shared_ptr<RandomSource> source_;
};

bool has_prefix(std::string_view id, EntityKind kind);

}  // namespace hg
