#include "qsynth/parallel.hpp"

#include <cstdlib>
#include <string>

namespace qsynth {

unsigned default_workers() {
  if (const char* env = std::getenv("QS_WORKERS")) {
    try {
      int n = std::stoi(env);
      if (n >= 1)
        return static_cast<unsigned>(n);
    } catch (...) {
    }
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace qsynth
