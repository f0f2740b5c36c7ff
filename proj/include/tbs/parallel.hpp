#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

#include "tbs/common.hpp"

namespace tbs {

/// Worker count from TBS_THREADS, else the hardware concurrency.
int default_threads();
void set_default_threads(int threads);

/// Calls fn(begin, end) on contiguous ranges covering [0, count), one range per worker.
/// The first exception thrown by any worker is rethrown after all workers join.
template <typename F>
void parallel_for(Index count, int threads, F&& fn) {
    if (threads <= 0) threads = default_threads();
    const Index workers = std::min<Index>(threads, std::max<Index>(count, 1));
    if (workers <= 1) {
        if (count > 0) fn(Index{0}, count);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    auto run = [&](Index w) {
        const Index begin = count * w / workers;
        const Index end = count * (w + 1) / workers;
        try {
            fn(begin, end);
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    for (Index w = 1; w < workers; ++w) pool.emplace_back(run, w);
    run(0);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline constexpr Index kReduceChunk = 4096;

/// Sum of f(i) over [0, count): fixed chunks summed sequentially, then a pairwise tree
/// over chunk partials. Bitwise identical for any thread count.
template <typename Scalar, typename F>
Scalar deterministic_sum(Index count, int threads, F&& f) {
    const Index chunks = (count + kReduceChunk - 1) / kReduceChunk;
    std::vector<Scalar> partial(std::max<Index>(chunks, 1), Scalar(0));
    parallel_for(chunks, threads, [&](Index c0, Index c1) {
        for (Index c = c0; c < c1; ++c) {
            const Index end = std::min(count, (c + 1) * kReduceChunk);
            Scalar s(0);
            for (Index i = c * kReduceChunk; i < end; ++i) s += f(i);
            partial[c] = s;
        }
    });
    for (Index width = 1; width < chunks; width *= 2)
        for (Index i = 0; i + width < chunks; i += 2 * width) partial[i] += partial[i + width];
    return partial[0];
}

template <typename Vec>
typename Vec::Scalar deterministic_dot(const Vec& a, const Vec& b, int threads) {
    using S = typename Vec::Scalar;
    return deterministic_sum<S>(a.size(), threads, [&](Index i) { return a[i] * b[i]; });
}

}  // namespace tbs
