#include "rwdre/lattice.hpp"

namespace rwdre {

std::int64_t pattern_index(std::span<const int> pattern, int alphabet_size) {
  std::int64_t idx = 0;
  for (int symbol : pattern) {
    if (symbol < 0 || symbol >= alphabet_size)
      throw std::invalid_argument("pattern_index: symbol out of alphabet");
    idx = idx * alphabet_size + symbol;
  }
  return idx + 1;
}

std::vector<int> pattern_of_index(std::int64_t index, int alphabet_size,
                                  int window_size) {
  std::int64_t x = index - 1;
  if (x < 0) throw std::invalid_argument("pattern_of_index: index < 1");
  std::vector<int> pattern(window_size, 0);
  for (int j = window_size - 1; j >= 0; --j) {
    pattern[j] = static_cast<int>(x % alphabet_size);
    x /= alphabet_size;
  }
  if (x != 0) throw std::invalid_argument("pattern_of_index: index too large");
  return pattern;
}

}  // namespace rwdre
