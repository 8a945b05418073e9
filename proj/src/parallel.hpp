#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace mrf {

// Work is split into a fixed number of chunks independent of the thread
// count, and chunk results are merged in chunk order, so reductions are
// bit-identical for any --threads value.
constexpr int kReductionChunks = 256;

inline void parallel_chunks(size_t n_items, int threads,
                            const std::function<void(size_t begin, size_t end, int chunk)>& body) {
    if (n_items == 0) return;
    int nchunks = (int)std::min<size_t>(kReductionChunks, n_items);
    if (threads <= 1) {
        for (int c = 0; c < nchunks; ++c) {
            size_t b = n_items * c / nchunks, e = n_items * (c + 1) / nchunks;
            body(b, e, c);
        }
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            int c = next.fetch_add(1);
            if (c >= nchunks) return;
            size_t b = n_items * c / nchunks, e = n_items * (c + 1) / nchunks;
            body(b, e, c);
        }
    };
    std::vector<std::thread> pool;
    int nt = std::min<int>(threads, nchunks);
    pool.reserve(nt);
    for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

// Deterministic sum of f(i) over i < n: per-chunk partial sums are combined
// in chunk order.
inline double parallel_sum(size_t n, int threads, const std::function<double(size_t)>& f) {
    std::vector<double> partial(kReductionChunks, 0.0);
    parallel_chunks(n, threads, [&](size_t b, size_t e, int c) {
        double s = 0;
        for (size_t i = b; i < e; ++i) s += f(i);
        partial[c] = s;
    });
    double total = 0;
    for (double p : partial) total += p;
    return total;
}

}  // namespace mrf
