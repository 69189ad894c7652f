#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace sbsde {

/* Work is cut into fixed-size blocks of paths. Blocks may run on any number
   of worker threads, but every reduction combines per-block partials in block
   order on one thread, so results are byte-identical for any thread count.
   The block size is a constant on purpose: making it depend on the thread
   count would silently change float summation order. */
inline constexpr std::size_t kPathBlock = 2048;

void set_default_threads(int n); // 0 keeps the current value; negative resets to 1
int default_threads();

/* Runs fn(begin, end) over [0, n) in blocks of kPathBlock. fn must only write
   to per-item slots (no shared accumulation). threads = 0 uses the default. */
void parallel_for_blocks(std::size_t n,
                         const std::function<void(std::size_t, std::size_t)>& fn,
                         int threads = 0);

/* Deterministic reduction: make(begin, end) produces a block partial (blocks
   possibly in parallel), combine folds them in increasing block order. */
template <typename T>
T blocked_reduce(std::size_t n, T init,
                 const std::function<T(std::size_t, std::size_t)>& make,
                 const std::function<void(T&, const T&)>& combine,
                 int threads = 0) {
    if (n == 0) return init;
    const std::size_t n_blocks = (n + kPathBlock - 1) / kPathBlock;
    std::vector<T> partials(n_blocks, init);
    parallel_for_blocks(
        n,
        [&](std::size_t begin, std::size_t end) {
            partials[begin / kPathBlock] = make(begin, end);
        },
        threads);
    T acc = init;
    for (const T& part : partials) combine(acc, part);
    return acc;
}

} // namespace sbsde
