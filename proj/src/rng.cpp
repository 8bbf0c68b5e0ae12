#include "rwdre/rng.hpp"

namespace rwdre::rng {

void fill_u64_scalar(std::uint64_t key, std::uint64_t start,
                     std::span<std::uint64_t> out) {
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = at(key, start + i);
}

namespace {

using FillFn = void (*)(std::uint64_t, std::uint64_t, std::span<std::uint64_t>);

FillFn select_fill() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2")) return &fill_u64_avx2;
#endif
  return &fill_u64_scalar;
}

FillFn g_fill = nullptr;

}  // namespace

void fill_u64(std::uint64_t key, std::uint64_t start,
              std::span<std::uint64_t> out) {
  if (!g_fill) g_fill = select_fill();
  g_fill(key, start, out);
}

void fill_unit(std::uint64_t key, std::uint64_t start, std::span<double> out) {
  constexpr std::size_t kBlock = 256;
  std::uint64_t buf[kBlock];
  std::size_t done = 0;
  while (done < out.size()) {
    std::size_t n = std::min(kBlock, out.size() - done);
    fill_u64(key, start + done, std::span<std::uint64_t>(buf, n));
    for (std::size_t i = 0; i < n; ++i) out[done + i] = to_unit(buf[i]);
    done += n;
  }
}

const char* active_kernel() {
  if (!g_fill) g_fill = select_fill();
#if defined(__x86_64__) || defined(_M_X64)
  if (g_fill == &fill_u64_avx2) return "avx2";
#endif
  return "scalar";
}

}  // namespace rwdre::rng
