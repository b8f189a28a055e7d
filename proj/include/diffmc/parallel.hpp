#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace dmc {

/// Thread count used when callers pass 0.
inline int default_thread_count() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(chunk, begin, end) over `chunks` contiguous ranges of [0, n).
///
/// Chunk boundaries depend only on n and `chunks`, never on the thread count,
/// so callers that merge per-chunk results in chunk order are deterministic.
template <class Fn>
void parallel_chunks(std::size_t n, std::size_t chunks, int threads, Fn&& fn) {
    if (n == 0) return;
    chunks = std::clamp<std::size_t>(chunks, 1, n);
    const auto bounds = [&](std::size_t c) { return n * c / chunks; };
    if (threads <= 0) threads = default_thread_count();
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), chunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) fn(c, bounds(c), bounds(c + 1));
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t c = w; c < chunks; c += workers) fn(c, bounds(c), bounds(c + 1));
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace dmc
