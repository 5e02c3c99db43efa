#include "splatedit/threading.hpp"

#include <atomic>

namespace splatedit {

namespace {
std::atomic<int> g_thread_count{int(std::thread::hardware_concurrency())};
}

int thread_count() {
    const int n = g_thread_count.load(std::memory_order_relaxed);
    return n > 0 ? n : 1;
}

void set_thread_count(int n) { g_thread_count.store(n > 0 ? n : 1, std::memory_order_relaxed); }

}  // namespace splatedit
