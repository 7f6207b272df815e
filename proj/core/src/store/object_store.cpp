#include "hg/store/object_store.hpp"

#include <atomic>
#include <fstream>
#include <iterator>
#include <thread>

#include "hg/common/crypto.hpp"
#include "hg/common/error.hpp"

namespace hg::store {

namespace fs = std::filesystem;

FsObjectStore::FsObjectStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
}

fs::path FsObjectStore::path_for(const std::string& sha256) const {
  if (sha256.size() != 64 || sha256.find_first_not_of("0123456789abcdef") != std::string::npos) {
    throw Error(ErrorCode::kValidation, "malformed object digest '" + sha256 + "'");
  }
  return root_ / sha256.substr(0, 2) / sha256;
}

ObjectRef FsObjectStore::put(std::span<const std::uint8_t> bytes, const std::string& media_type) {
  ObjectRef ref{crypto::to_hex(crypto::sha256(bytes)), bytes.size(), media_type};
  fs::path target = path_for(ref.sha256);
  if (fs::exists(target)) return ref;

  fs::create_directories(target.parent_path());
  static std::atomic<std::uint64_t> counter{0};
  fs::path tmp = target;
  tmp += ".tmp" + std::to_string(counter.fetch_add(1)) + "." +
         std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kUnavailable, "cannot write object " + tmp.string());
  }
  fs::rename(tmp, target);
  return ref;
}

std::vector<std::uint8_t> FsObjectStore::get(const ObjectRef& ref) const {
  fs::path p = path_for(ref.sha256);
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "object " + ref.sha256 + " not found");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (crypto::to_hex(crypto::sha256(bytes)) != ref.sha256) {
    throw Error(ErrorCode::kCorrupt, "object " + ref.sha256 + " failed digest verification");
  }
  return bytes;
}

bool FsObjectStore::contains(const std::string& sha256) const {
  return fs::exists(path_for(sha256));
}

}  // namespace hg::store
