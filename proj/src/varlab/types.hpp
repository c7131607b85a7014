#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace varlab {

inline constexpr int kNumEmotions = 6;

// Canonical class order used by every classifier, dataset and report.
enum class Emotion : int {
  kSurprise = 0,
  kFear = 1,
  kDisgust = 2,
  kHappiness = 3,
  kSadness = 4,
  kAnger = 5,
};

inline constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "surprise", "fear", "disgust", "happiness", "sadness", "anger"};

// Returns -1 for unknown names.
int emotion_index(std::string_view name);

using Embedding = Eigen::VectorXd;
using EmotionProbs = std::array<double, kNumEmotions>;

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds from a base
// seed so that chains, observers and sessions never share a generator.
constexpr std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Eigen::VectorXd standard_normal(Rng& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

// 64-bit FNV-1a, rendered as 16 hex digits. Stable across platforms, used
// for config hashes and opaque stimulus ids.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace varlab
