#pragma once

#include <algorithm>
#include <cstddef>
#include <future>
#include <thread>
#include <utility>
#include <vector>

namespace bdr {

/// Global worker count used by the parallel reductions. 0 means "use
/// std::thread::hardware_concurrency()".
int num_threads();
void set_num_threads(int n);

namespace detail {

inline int& thread_setting() {
    static int n = 0;
    return n;
}

constexpr std::size_t kLeafBlock = 64;

// Fixed binary tree over [lo, hi): leaves are contiguous blocks of kLeafBlock
// indices accumulated sequentially, inner nodes combine halves. The tree shape
// depends only on (lo, hi), never on the thread count, so floating-point
// results are bit-stable under any parallel schedule.
template <class T, class Item, class Combine>
T tree_reduce_range(std::size_t lo, std::size_t hi, int split_depth,
                    const Item& item, const Combine& combine) {
    const std::size_t n = hi - lo;
    if (n <= kLeafBlock) {
        T acc = item(lo);
        for (std::size_t i = lo + 1; i < hi; ++i) acc = combine(std::move(acc), item(i));
        return acc;
    }
    // Split at the block-aligned midpoint so the tree is independent of depth.
    const std::size_t half_blocks = (n / kLeafBlock + 1) / 2;
    const std::size_t mid = lo + half_blocks * kLeafBlock;
    if (split_depth > 0) {
        auto right = std::async(std::launch::async, [&] {
            return tree_reduce_range<T>(mid, hi, split_depth - 1, item, combine);
        });
        T left = tree_reduce_range<T>(lo, mid, split_depth - 1, item, combine);
        return combine(std::move(left), right.get());
    }
    T left = tree_reduce_range<T>(lo, mid, 0, item, combine);
    return combine(std::move(left), tree_reduce_range<T>(mid, hi, 0, item, combine));
}

}  // namespace detail

inline int num_threads() {
    const int n = detail::thread_setting();
    if (n > 0) return n;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

inline void set_num_threads(int n) { detail::thread_setting() = n < 0 ? 0 : n; }

/// Deterministic pairwise (tree) reduction of item(0), ..., item(n-1).
/// combine must be associative up to the fixed evaluation tree; item is called
/// exactly once per index. Exceptions from item propagate to the caller.
template <class T, class Item, class Combine>
T tree_reduce(std::size_t n, T identity, const Item& item, const Combine& combine) {
    if (n == 0) return identity;
    int depth = 0;
    for (int t = 1; t < num_threads() && depth < 8; t *= 2) ++depth;
    return detail::tree_reduce_range<T>(0, n, depth, item, combine);
}

/// Parallel loop over [0, n) with no reduction (independent side effects on
/// disjoint slots). Order of execution is unspecified.
template <class Body>
void parallel_for(std::size_t n, const Body& body) {
    const int workers = num_threads();
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::future<void>> futures;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::size_t lo = static_cast<std::size_t>(w) * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        futures.push_back(std::async(std::launch::async, [lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        }));
    }
    for (auto& f : futures) f.get();
}

}  // namespace bdr
