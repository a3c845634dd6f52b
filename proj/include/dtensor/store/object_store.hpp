#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dtensor/bytes.hpp"
#include "dtensor/error.hpp"

namespace dtensor::store {

/// Minimal key-value object store. Keys are '/'-separated UTF-8 paths.
class ObjectStore {
 public:
  virtual ~ObjectStore() = default;

  virtual void put(const std::string& key, std::span<const std::uint8_t> bytes) = 0;
  virtual Bytes get(const std::string& key) const = 0;
  virtual bool exists(const std::string& key) const = 0;
  /// Keys starting with `prefix`, sorted.
  virtual std::vector<std::string> list(const std::string& prefix) const = 0;
  virtual void erase(const std::string& key) = 0;

  virtual std::uint64_t size(const std::string& key) const { return get(key).size(); }
};

/// Object store backed by a local directory. put() writes a temporary file
/// and renames it over the destination, so readers never see partial objects.
class LocalDirStore final : public ObjectStore {
 public:
  explicit LocalDirStore(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) fail(ErrorCode::Io, "cannot create " + root_.string() + ": " + ec.message());
  }

  const std::filesystem::path& root() const { return root_; }

  void put(const std::string& key, std::span<const std::uint8_t> bytes) override {
    const auto dest = path_of(key);
    std::error_code ec;
    std::filesystem::create_directories(dest.parent_path(), ec);
    if (ec) fail(ErrorCode::Io, "cannot create " + dest.parent_path().string());
    auto tmp = dest;
    tmp += ".tmp-" + std::to_string(std::random_device{}());
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (!out.flush()) fail(ErrorCode::Io, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, dest, ec);
    if (ec) {
      std::filesystem::remove(tmp);
      fail(ErrorCode::Io, "rename failed for " + dest.string() + ": " + ec.message());
    }
  }

  Bytes get(const std::string& key) const override {
    std::ifstream in(path_of(key), std::ios::binary);
    if (!in) fail(ErrorCode::NotFound, "no object '" + key + "'");
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  bool exists(const std::string& key) const override {
    return std::filesystem::is_regular_file(path_of(key));
  }

  std::vector<std::string> list(const std::string& prefix) const override {
    std::vector<std::string> keys;
    std::error_code ec;
    if (!std::filesystem::exists(root_, ec)) return keys;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root_)) {
      if (!entry.is_regular_file()) continue;
      auto key = std::filesystem::relative(entry.path(), root_).generic_string();
      if (key.find(".tmp-") != std::string::npos) continue;
      if (key.starts_with(prefix)) keys.push_back(std::move(key));
    }
    std::sort(keys.begin(), keys.end());
    return keys;
  }

  void erase(const std::string& key) override {
    std::error_code ec;
    if (!std::filesystem::remove(path_of(key), ec)) return;
    // Prune directories the key left empty, never the root itself.
    for (auto rel = std::filesystem::path(key).parent_path(); !rel.empty(); rel = rel.parent_path()) {
      if (!std::filesystem::remove(root_ / rel, ec)) break;  // fails on non-empty
    }
  }

  std::uint64_t size(const std::string& key) const override {
    std::error_code ec;
    const auto n = std::filesystem::file_size(path_of(key), ec);
    if (ec) fail(ErrorCode::NotFound, "no object '" + key + "'");
    return n;
  }

 private:
  std::filesystem::path path_of(const std::string& key) const {
    if (key.empty() || key.front() == '/' || key.find("..") != std::string::npos) {
      fail(ErrorCode::InvalidId, "invalid object key '" + key + "'");
    }
    return root_ / key;
  }

  std::filesystem::path root_;
};

/// In-process store, mostly for tests and benchmarks that should not touch disk.
class MemoryStore final : public ObjectStore {
 public:
  void put(const std::string& key, std::span<const std::uint8_t> bytes) override {
    std::lock_guard lock(mu_);
    objects_[key] = Bytes(bytes.begin(), bytes.end());
  }

  Bytes get(const std::string& key) const override {
    std::lock_guard lock(mu_);
    auto it = objects_.find(key);
    if (it == objects_.end()) fail(ErrorCode::NotFound, "no object '" + key + "'");
    return it->second;
  }

  bool exists(const std::string& key) const override {
    std::lock_guard lock(mu_);
    return objects_.contains(key);
  }

  std::vector<std::string> list(const std::string& prefix) const override {
    std::lock_guard lock(mu_);
    std::vector<std::string> keys;
    for (auto it = objects_.lower_bound(prefix); it != objects_.end() && it->first.starts_with(prefix); ++it) {
      keys.push_back(it->first);
    }
    return keys;
  }

  void erase(const std::string& key) override {
    std::lock_guard lock(mu_);
    objects_.erase(key);
  }

  std::uint64_t size(const std::string& key) const override {
    std::lock_guard lock(mu_);
    auto it = objects_.find(key);
    if (it == objects_.end()) fail(ErrorCode::NotFound, "no object '" + key + "'");
    return it->second.size();
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, Bytes> objects_;
};

}  // namespace dtensor::store
