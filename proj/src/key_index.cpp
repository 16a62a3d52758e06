#include "wbary/key_index.hpp"

#include <algorithm>

namespace wbary {

std::uint64_t KeyIndex::hash(std::span<const std::int64_t> key) {
  std::uint64_t h = 0x9e3779b97f4a7c15ull;
  for (std::int64_t v : key) {
    std::uint64_t x = static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    h ^= x;
  }
  return h;
}

std::int64_t KeyIndex::find(std::span<const std::int64_t> key, const std::vector<std::int64_t>& store) const {
  if (slots_.empty()) return -1;
  const std::size_t mask = slots_.size() - 1;
  for (std::size_t s = hash(key) & mask;; s = (s + 1) & mask) {
    std::uint32_t v = slots_[s];
    if (v == 0) return -1;
    const std::int64_t* stored = store.data() + static_cast<std::size_t>(v - 1) * width_;
    if (std::equal(key.begin(), key.end(), stored)) return v - 1;
  }
}

void KeyIndex::insert(std::uint32_t id, const std::vector<std::int64_t>& store) {
  if ((count_ + 1) * 2 > slots_.size()) grow(store);
  const std::size_t mask = slots_.size() - 1;
  std::span<const std::int64_t> key(store.data() + static_cast<std::size_t>(id) * width_, width_);
  std::size_t s = hash(key) & mask;
  while (slots_[s] != 0) s = (s + 1) & mask;
  slots_[s] = id + 1;
  ++count_;
}

void KeyIndex::grow(const std::vector<std::int64_t>& store) {
  std::vector<std::uint32_t> old = std::move(slots_);
  slots_.assign(std::max<std::size_t>(16, old.size() * 2), 0);
  count_ = 0;
  for (std::uint32_t v : old)
    if (v != 0) insert(v - 1, store);
}

void KeyIndex::rebuild(std::size_t count, const std::vector<std::int64_t>& store) {
  std::size_t cap = 16;
  while (cap < count * 2 + 2) cap *= 2;
  slots_.assign(cap, 0);
  count_ = 0;
  for (std::size_t id = 0; id < count; ++id) insert(static_cast<std::uint32_t>(id), store);
}

}  // namespace wbary
