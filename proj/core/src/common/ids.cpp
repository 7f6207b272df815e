#include "hg/common/ids.hpp"

#include <array>

#include "hg/common/crypto.hpp"

namespace hg {

std::string_view id_prefix(EntityKind kind) {
  switch (kind) {
    case EntityKind::kStudy: return "stu";
    case EntityKind::kSubject: return "sub";
    case EntityKind::kCohort: return "coh";
    case EntityKind::kTest: return "tst";
    case EntityKind::kTestSet: return "tse";
    case EntityKind::kTask: return "tsk";
    case EntityKind::kOccurrence: return "occ";
    case EntityKind::kDatapoint: return "dp";
    case EntityKind::kDataset: return "ds";
    case EntityKind::kResult: return "res";
    case EntityKind::kJob: return "job";
    case EntityKind::kRule: return "rul";
  }
  return "unk";
}

IdGenerator::IdGenerator(std::shared_ptr<RandomSource> source)
    : source_(std::move(source)) {}

std::string IdGenerator::next(EntityKind kind) {
  std::array<std::uint8_t, 16> raw{};
  source_->fill(raw);
  std::string id(id_prefix(kind));
  id.push_back('_');
  id += crypto::base32_lower(raw);
  return id;
}

std::string IdGenerator::token() {
  std::array<std::uint8_t, 24> raw{};
  source_->fill(raw);
  return "hgt_" + crypto::base32_lower(raw);
}

bool has_prefix(std::string_view id, EntityKind kind) {
  auto prefix = id_prefix(kind);
  return id.size() == prefix.size() + 1 + kIdBodyLength && id.starts_with(prefix) &&
         id[prefix.size()] == '_';
}

}  // namespace hg
