#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hg/domain/entities.hpp"

namespace hg::store {

// Append-only, content-addressed blob storage. Identical bytes always map to
// the same ObjectRef digest.
class ObjectStore {
 public:
  virtual ~ObjectStore() = default;

  virtual ObjectRef put(std::span<const std::uint8_t> bytes, const std::string& media_type) = 0;

  // Throws NOT_FOUND when absent and CORRUPT when the stored bytes no longer
  // hash to the digest.
  virtual std::vector<std::uint8_t> get(const ObjectRef& ref) const = 0;

  virtual bool contains(const std::string& sha256) const = 0;
};

// Local directory layout: <root>/<first two hex chars>/<digest>.
class FsObjectStore final : public ObjectStore {
 public:
  explicit FsObjectStore(std::filesystem::path root);

  ObjectRef put(std::span<const std::uint8_t> bytes, const std::string& media_type) override;
  std::vector<std::uint8_t> get(const ObjectRef& ref) const override;
  bool contains(const std::string& sha256) const override;

  std::filesystem::path path_for(const std::string& sha256) const;

 private:
  std::filesystem::path root_;
};

}  // namespace hg::store
