#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace hmprate {

/// Runs fn(i) for i in [0, count) over `workers` threads with a fixed
/// contiguous partition. fn must write only to per-index state, so results
/// are identical for every worker count.
template <typename Fn>
void parallel_for(std::int64_t count, int workers, Fn&& fn) {
    if (count <= 0) return;
    if (workers <= 1 || count == 1) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const int nw = static_cast<int>(std::min<std::int64_t>(workers, count));
    std::vector<std::thread> pool;
    pool.reserve(nw);
    for (int w = 0; w < nw; ++w) {
        const std::int64_t lo = count * w / nw;
        const std::int64_t hi = count * (w + 1) / nw;
        pool.emplace_back([lo, hi, &fn] {
            for (std::int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace hmprate
