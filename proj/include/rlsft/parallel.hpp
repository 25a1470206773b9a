#pragma once
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace rlsft {

// Runs fn(i) for i in [0, n) and returns results in index order. Each index
// owns its output slot, so the result is identical for any worker count.
template <typename T>
std::vector<T> parallel_map(size_t n, int workers, const std::function<T(size_t)>& fn) {
    std::vector<T> out(n);
    if (workers <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    size_t nw = std::min<size_t>(workers, n);
    std::vector<std::thread> threads;
    threads.reserve(nw);
    for (size_t w = 0; w < nw; ++w) {
        threads.emplace_back([&, w] {
            for (size_t i = w; i < n; i += nw) out[i] = fn(i);
        });
    }
    for (auto& t : threads) t.join();
    return out;
}

inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : int(hc > 8 ? 8 : hc);
}

}  // namespace rlsft
