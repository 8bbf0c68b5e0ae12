#ifndef RWDRE_RNG_HPP_
#define RWDRE_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <span>

namespace rwdre::rng {

// Counter-based generator: every variate is a pure function of (key, counter),
// so realizations can be materialized lazily and in any order. The mixer is
// two rounds of the splitmix64 finalizer over key + counter * golden gamma.

inline constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Value of the stream `key` at position `counter`.
inline std::uint64_t at(std::uint64_t key, std::uint64_t counter) {
  return mix64(mix64(key + counter * kGamma));
}

inline double to_unit(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Keyed hash for deriving child stream keys (seed hierarchies, per-cell
// randomness). Order-sensitive.
inline std::uint64_t hash_words(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x2545f4914f6cdd1dULL;
  for (std::uint64_t w : words) h = mix64(h ^ (w + kGamma));
  return h;
}

// Sequential view of a counter-based stream.
struct Stream {
  std::uint64_t key = 0;
  std::uint64_t counter = 0;

  std::uint64_t next_u64() { return at(key, counter++); }
  double next_unit() { return to_unit(next_u64()); }
  // Draw from a finite distribution by inverse CDF with strict exceedance.
  int next_index(std::span<const double> probs) {
    double u = next_unit();
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      cum += probs[i];
      if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }
};

// Batch kernels: fill out[i] = at(key, start + i). The scalar reference and
// the SIMD variant produce bit-identical output; dispatch happens once at
// first call based on CPU features.
void fill_u64_scalar(std::uint64_t key, std::uint64_t start,
                     std::span<std::uint64_t> out);
#if defined(__x86_64__) || defined(_M_X64)
void fill_u64_avx2(std::uint64_t key, std::uint64_t start,
                   std::span<std::uint64_t> out);
#endif
void fill_u64(std::uint64_t key, std::uint64_t start,
              std::span<std::uint64_t> out);
void fill_unit(std::uint64_t key, std::uint64_t start, std::span<double> out);

// Name of the kernel variant selected at runtime ("scalar" or "avx2").
const char* active_kernel();

}  // namespace rwdre::rng

#endif  // RWDRE_RNG_HPP_
