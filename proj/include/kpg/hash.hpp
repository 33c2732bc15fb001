#pragma once

#include <cstdint>
#include <cstring>
#include <string>

namespace kpg {

// FNV-1a 64-bit streaming hash; used for cache keys and provenance stamps.
// Stable across platforms of equal endianness (we assume little-endian).
class Hasher {
 public:
  void bytes(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void add(double v) { bytes(&v, sizeof(v)); }
  void add(int64_t v) { bytes(&v, sizeof(v)); }
  void add(int v) { add(static_cast<int64_t>(v)); }
  void add(bool v) { add(static_cast<int64_t>(v)); }
  void add(uint64_t v) { bytes(&v, sizeof(v)); }
  void add(const std::string& s) {
    add(static_cast<int64_t>(s.size()));
    bytes(s.data(), s.size());
  }
  uint64_t value() const { return state_; }

 private:
  uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace kpg
