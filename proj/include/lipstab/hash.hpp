#pragma once

#include <cstdint>
#include <cstring>
#include <string_view>

namespace lipstab {

/// 64-bit FNV-1a.
class Fnv1a {
 public:
  Fnv1a& bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= b[i];
      h_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& str(std::string_view s) { return bytes(s.data(), s.size()); }
  template <class T>
  Fnv1a& value(const T& v) {
    return bytes(&v, sizeof(T));
  }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace lipstab
