#include "marblesim/parallel.hpp"

#include <cstdlib>
#include <string>

namespace marblesim {

unsigned default_workers() {
    if (const char* env = std::getenv("MARBLESIM_WORKERS")) {
        try {
            long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (...) {
        }
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace marblesim
