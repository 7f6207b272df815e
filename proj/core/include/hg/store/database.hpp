#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <type_traits>
#include <string>
#include <string_view>
#include <vector>

struct sqlite3;
struct sqlite3_stmt;

namespace hg::store {

class Database;

// Prepared statement bound to one Database; finalized on destruction. It
// holds the connection lock for its lifetime so that statements from other
// threads never interleave with an open transaction.
class Statement {
 public:
  Statement(Database& db, std::string_view sql);
  ~Statement();
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;
  Statement(Statement&& other) noexcept;

  Statement& bind(int index, std::string_view value);
  Statement& bind(int index, const std::string& value) { return bind(index, std::string_view(value)); }
  Statement& bind(int index, const char* value) { return bind(index, std::string_view(value)); }
  Statement& bind(int index, std::int64_t value);
  Statement& bind(int index, int value) { return bind(index, std::int64_t{value}); }
  Statement& bind(int index, double value);
  Statement& bind(int index, const std::vector<std::uint8_t>& blob);
  Statement& bind_null(int index);
  Statement& bind(int index, const std::optional<std::string>& value);
  Statement& bind(int index, const std::optional<std::int64_t>& value);

  // True while a row is available.
  bool step();
  // Runs to completion; returns sqlite3_changes().
  int exec();
  void reset();

  std::string text(int col) const;
  std::int64_t int64(int col) const;
  double real(int col) const;
  bool is_null(int col) const;
  std::vector<std::uint8_t> blob(int col) const;
  std::optional<std::string> optional_text(int col) const;
  std::optional<std::int64_t> optional_int64(int col) const;

 private:
  std::unique_lock<std::recursive_mutex> lock_;
  Database* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

// Single SQLite connection guarded by a recursive mutex. Every public
// operation of the stores runs inside transaction(), which serializes
// writers and makes compare-and-set updates linearizable.
class Database {
 public:
  // ":memory:" for an in-memory database.
  explicit Database(const std::string& path);
  ~Database();
  Database(const Database&) = delete;
  Database& operator=(const Database&) = delete;

  void execute(std::string_view sql);

  // Nested calls join the outermost transaction. An exception rolls back.
  template <typename Fn>
  auto transaction(Fn&& fn) -> decltype(fn()) {
    std::lock_guard lock(mu_);
    Scope scope(*this);
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      scope.commit();
    } else {
      auto result = fn();
      scope.commit();
      return result;
    }
  }

  std::int64_t last_insert_rowid() const;
  int changes() const;
  sqlite3* handle() { return db_; }
  [[noreturn]] void fail(std::string_view what) const;

 private:
  friend class Statement;

  class Scope {
   public:
    explicit Scope(Database& db);
    ~Scope();
    void commit();

   private:
    Database& db_;
    bool outer_;
    bool done_ = false;
  };

  sqlite3* db_ = nullptr;
  std::recursive_mutex mu_;
  int depth_ = 0;
};

}  // namespace hg::store
