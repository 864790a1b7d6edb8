#include "unravel/parallel.hpp"

#include <cstdlib>
#include <string>

namespace unravel {

int worker_count() {
  if (const char* env = std::getenv("UNRAVEL_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

}  // namespace unravel
