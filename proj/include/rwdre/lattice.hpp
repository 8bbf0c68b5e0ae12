#ifndef RWDRE_LATTICE_HPP_
#define RWDRE_LATTICE_HPP_

#include <array>
#include <cstdint>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace rwdre {

// Lattice points live on Z^d with d <= kMaxDim. Unused coordinates are
// kept at zero so that equality and hashing work independently of d.
inline constexpr int kMaxDim = 4;

struct Vec {
  std::array<std::int32_t, kMaxDim> c{};

  Vec() = default;
  explicit Vec(std::initializer_list<std::int32_t> xs) {
    if (xs.size() > static_cast<std::size_t>(kMaxDim))
      throw std::invalid_argument("Vec: dimension exceeds kMaxDim");
    std::size_t i = 0;
    for (auto x : xs) c[i++] = x;
  }
  static Vec from(std::span<const std::int32_t> xs) {
    if (xs.size() > static_cast<std::size_t>(kMaxDim))
      throw std::invalid_argument("Vec: dimension exceeds kMaxDim");
    Vec v;
    for (std::size_t i = 0; i < xs.size(); ++i) v.c[i] = xs[i];
    return v;
  }

  std::int32_t& operator[](int i) { return c[i]; }
  std::int32_t operator[](int i) const { return c[i]; }

  friend Vec operator+(Vec a, const Vec& b) {
    for (int i = 0; i < kMaxDim; ++i) a.c[i] += b.c[i];
    return a;
  }
  friend Vec operator-(Vec a, const Vec& b) {
    for (int i = 0; i < kMaxDim; ++i) a.c[i] -= b.c[i];
    return a;
  }
  friend Vec operator-(Vec a) {
    for (int i = 0; i < kMaxDim; ++i) a.c[i] = -a.c[i];
    return a;
  }
  friend bool operator==(const Vec& a, const Vec& b) { return a.c == b.c; }
  friend auto operator<=>(const Vec& a, const Vec& b) { return a.c <=> b.c; }
};

struct VecHash {
  std::size_t operator()(const Vec& v) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (int i = 0; i < kMaxDim; ++i) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v.c[i])) +
           0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

// A space-time cell (x, t) in Z^d x Z.
struct Cell {
  Vec x;
  std::int64_t t = 0;

  friend bool operator==(const Cell& a, const Cell& b) {
    return a.x == b.x && a.t == b.t;
  }
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

struct CellHash {
  std::size_t operator()(const Cell& c) const noexcept {
    std::size_t h = VecHash{}(c.x);
    return h ^ (static_cast<std::size_t>(c.t) * 0xff51afd7ed558ccdULL);
  }
};

// Componentwise sum of two space-time shifts.
inline Cell shift(const Cell& cell, const Cell& by) {
  return Cell{cell.x + by.x, cell.t + by.t};
}

// Index of a local pattern over Delta, 1-based. Patterns are enumerated
// lexicographically: the first Delta element is the most significant digit,
// alphabet symbols in natural order.
std::int64_t pattern_index(std::span<const int> pattern, int alphabet_size);

// Inverse of pattern_index: writes the |Delta| symbols of pattern #index.
std::vector<int> pattern_of_index(std::int64_t index, int alphabet_size,
                                  int window_size);

}  // namespace rwdre

#endif  // RWDRE_LATTICE_HPP_
