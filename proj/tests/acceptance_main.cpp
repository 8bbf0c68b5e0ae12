#include <algorithm>
#include <iostream>
#include <thread>

#include "acceptance.hpp"

int main() {
  const int threads = std::clamp(
      static_cast<int>(std::thread::hardware_concurrency()), 1, 8);
  return rwdre::acceptance::run_all(std::cout, threads) == 0 ? 0 : 1;
}
