#pragma once

#include <atomic>
#include <cstddef>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>

#include "bytebeat/api.hpp"
#include "bytebeat/semantics.hpp"

namespace bytebeat {

/// Thread-safe LRU cache of compiled programs keyed by (expression text, mode).
class ProgramCache {
public:
  explicit ProgramCache(std::size_t capacity = 64) : capacity_(capacity ? capacity : 1) {}

  /// Returns the cached program or compiles it. Throws ApiError on bad input.
  std::shared_ptr<const Program> get(std::string_view expr, Mode mode) {
    Key key{std::string(expr), mode};
    {
      std::lock_guard lock(mu_);
      if (auto it = index_.find(key); it != index_.end()) {
        lru_.splice(lru_.begin(), lru_, it->second);
        return it->second->second;
      }
    }
    auto program = std::make_shared<const Program>(compile(check_expression(expr, mode)));
    ++compilations_;

    std::lock_guard lock(mu_);
    if (auto it = index_.find(key); it != index_.end()) {
      // Another thread compiled it first; keep the resident copy.
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
    lru_.emplace_front(key, program);
    index_.emplace(std::move(key), lru_.begin());
    while (lru_.size() > capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    return program;
  }

  bool contains(std::string_view expr, Mode mode) const {
    std::lock_guard lock(mu_);
    return index_.count(Key{std::string(expr), mode}) != 0;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return lru_.size();
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t compilations() const noexcept { return compilations_.load(); }

private:
  using Key = std::pair<std::string, Mode>;
  using Entry = std::pair<Key, std::shared_ptr<const Program>>;

  std::size_t capacity_;
  mutable std::mutex mu_;
  std::list<Entry> lru_;
  std::map<Key, std::list<Entry>::iterator> index_;
  std::atomic<std::size_t> compilations_{0};
};

}  // namespace bytebeat
