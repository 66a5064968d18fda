#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace poisonbench {

// Streaming FNV-1a (64-bit). Used for config fingerprints, dataset
// fingerprints and seed derivation salts; stable across platforms.
class Fnv1a {
 public:
  void update_bytes(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ull;
    }
  }

  void update(std::string_view s) { update_bytes(s.data(), s.size()); }

  void update(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    update_bytes(b, 8);
  }

  void update(std::int64_t v) { update(static_cast<std::uint64_t>(v)); }

  void update(double v) {
    std::uint64_t bits;
    static_assert(sizeof bits == sizeof v);
    std::memcpy(&bits, &v, sizeof bits);
    update(bits);
  }

  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

inline std::uint64_t fnv1a(std::string_view s) {
  Fnv1a h;
  h.update(s);
  return h.digest();
}

std::string to_hex(std::uint64_t v);

}  // namespace poisonbench
