#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace bbmlab {

// Replica-level parallel map with a static partition. Every replica derives
// its randomness from its own index, so results are bit-identical for any
// thread count.
inline void parallel_for_index(std::uint64_t n, unsigned threads,
                               const std::function<void(std::uint64_t)>& body) {
    if (threads <= 1 || n < 2) {
        for (std::uint64_t i = 0; i < n; ++i) body(i);
        return;
    }
    const unsigned workers = std::min<std::uint64_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (std::uint64_t i = w; i < n; i += workers) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace bbmlab
