#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace magpic::detail {

/// Splits [0, n) into at most `workers` contiguous chunks and runs
/// fn(chunk, begin, end) for each, chunk 0 on the calling thread. The first
/// exception in chunk order is rethrown after all chunks finish.
template <class Fn>
void for_each_chunk(std::size_t n, unsigned workers, Fn&& fn) {
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(workers, n));
    if (chunks == 1) {
        fn(std::size_t{0}, std::size_t{0}, n);
        return;
    }
    std::vector<std::exception_ptr> errors(chunks);
    auto run = [&](std::size_t c) {
        const std::size_t begin = n * c / chunks;
        const std::size_t end = n * (c + 1) / chunks;
        try {
            fn(c, begin, end);
        } catch (...) {
            errors[c] = std::current_exception();
        }
    };
    std::vector<std::jthread> threads;
    threads.reserve(chunks - 1);
    for (std::size_t c = 1; c < chunks; ++c) {
        threads.emplace_back(run, c);
    }
    run(0);
    threads.clear();
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

inline std::size_t chunk_count(std::size_t n, unsigned workers) {
    return std::max<std::size_t>(1, std::min<std::size_t>(workers, n));
}

} // namespace magpic::detail
