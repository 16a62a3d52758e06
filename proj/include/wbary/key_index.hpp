#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace wbary {

/// Open-addressing map from fixed-width integer keys (stored externally,
/// `width` entries per id) to dense ids. Ids are assigned by the caller.
class KeyIndex {
 public:
  KeyIndex() = default;
  explicit KeyIndex(std::size_t width) : width_(width) {}

  std::size_t width() const { return width_; }

  /// Id whose key equals `key`, or -1.
  std::int64_t find(std::span<const std::int64_t> key, const std::vector<std::int64_t>& store) const;

  /// Registers `id`, whose key is already at store[id * width].
  void insert(std::uint32_t id, const std::vector<std::int64_t>& store);

  void rebuild(std::size_t count, const std::vector<std::int64_t>& store);

 private:
  static std::uint64_t hash(std::span<const std::int64_t> key);
  void grow(const std::vector<std::int64_t>& store);

  std::size_t width_ = 0;
  std::size_t count_ = 0;
  std::vector<std::uint32_t> slots_;  // id + 1, 0 marks an empty slot
};

}  // namespace wbary
