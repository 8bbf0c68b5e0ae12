// AVX2 variant of the counter-based batch generator. Compiled with -mavx2
// in its own translation unit; selected at runtime only when the CPU
// supports it. Output is bit-identical to fill_u64_scalar.

#include "rwdre/rng.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace rwdre::rng {

namespace {

// 64-bit lane-wise multiply built from 32-bit multiplies (AVX2 has no
// _mm256_mullo_epi64).
inline __m256i mullo64(__m256i a, __m256i b) {
  __m256i a_hi = _mm256_srli_epi64(a, 32);
  __m256i b_hi = _mm256_srli_epi64(b, 32);
  __m256i lo = _mm256_mul_epu32(a, b);
  __m256i cross1 = _mm256_mul_epu32(a_hi, b);
  __m256i cross2 = _mm256_mul_epu32(a, b_hi);
  __m256i cross = _mm256_add_epi64(cross1, cross2);
  return _mm256_add_epi64(lo, _mm256_slli_epi64(cross, 32));
}

inline __m256i mix64_vec(__m256i x) {
  const __m256i m1 = _mm256_set1_epi64x(static_cast<long long>(0xbf58476d1ce4e5b9ULL));
  const __m256i m2 = _mm256_set1_epi64x(static_cast<long long>(0x94d049bb133111ebULL));
  x = _mm256_xor_si256(x, _mm256_srli_epi64(x, 30));
  x = mullo64(x, m1);
  x = _mm256_xor_si256(x, _mm256_srli_epi64(x, 27));
  x = mullo64(x, m2);
  x = _mm256_xor_si256(x, _mm256_srli_epi64(x, 31));
  return x;
}

}  // namespace

void fill_u64_avx2(std::uint64_t key, std::uint64_t start,
                   std::span<std::uint64_t> out) {
  const __m256i gamma4 = _mm256_set1_epi64x(static_cast<long long>(4 * kGamma));
  const __m256i keyv = _mm256_set1_epi64x(static_cast<long long>(key));
  __m256i ctr = _mm256_set_epi64x(
      static_cast<long long>((start + 3) * kGamma),
      static_cast<long long>((start + 2) * kGamma),
      static_cast<long long>((start + 1) * kGamma),
      static_cast<long long>(start * kGamma));

  std::size_t i = 0;
  for (; i + 4 <= out.size(); i += 4) {
    __m256i x = _mm256_add_epi64(keyv, ctr);
    x = mix64_vec(mix64_vec(x));
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out.data() + i), x);
    ctr = _mm256_add_epi64(ctr, gamma4);
  }
  for (; i < out.size(); ++i) out[i] = at(key, start + i);
}

}  // namespace rwdre::rng

#endif  // x86_64
