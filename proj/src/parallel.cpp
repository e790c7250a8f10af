#include "tensortomo/parallel.hpp"

#include <atomic>

namespace tensortomo {

namespace {
std::atomic<int> g_cap{0};
}

void set_thread_cap(int n) { g_cap = std::max(0, n); }

int thread_count() {
  const int hw = std::max(1u, std::thread::hardware_concurrency());
  const int cap = g_cap.load();
  return cap > 0 ? std::min(cap, hw) : hw;
}

}  // namespace tensortomo
