#include "sbsde/threading.hpp"

#include <atomic>
#include <thread>

namespace sbsde {

namespace {
int g_threads = 1;
}

void set_default_threads(int n) {
    if (n < 0) {
        g_threads = 1;
    } else if (n > 0) {
        g_threads = n;
    }
}

int default_threads() { return g_threads; }

void parallel_for_blocks(std::size_t n,
                         const std::function<void(std::size_t, std::size_t)>& fn,
                         int threads) {
    if (n == 0) return;
    if (threads <= 0) threads = g_threads;
    const std::size_t n_blocks = (n + kPathBlock - 1) / kPathBlock;
    if (threads <= 1 || n_blocks == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) {
            const std::size_t begin = b * kPathBlock;
            fn(begin, std::min(n, begin + kPathBlock));
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks) return;
            const std::size_t begin = b * kPathBlock;
            fn(begin, std::min(n, begin + kPathBlock));
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), n_blocks);
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
}

} // namespace sbsde
