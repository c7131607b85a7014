#include "varlab/types.hpp"

#include <cstdio>

namespace varlab {

int emotion_index(std::string_view name) {
  for (int i = 0; i < kNumEmotions; ++i) {
    if (kEmotionNames[i] == name) return i;
  }
  return -1;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace varlab
