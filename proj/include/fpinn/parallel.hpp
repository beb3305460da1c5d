#pragma once

#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fpinn {

/// Runs fn(chunk, begin, end) over [0, count) split into contiguous chunks,
/// one per worker. threads <= 1 runs inline. Chunk boundaries depend only on
/// count and threads, so a reduction buffered per chunk index and combined in
/// chunk order is reproducible for a fixed thread count. The first exception
/// thrown by a worker is rethrown on the calling thread after all join.
inline void parallel_for_chunks(int count, int threads,
                                const std::function<void(int, int, int)>& fn)
{
    if (count <= 0)
        return;
    if (threads <= 1 || count == 1) {
        fn(0, 0, count);
        return;
    }
    const int workers = std::min(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    const int base = count / workers;
    const int extra = count % workers;
    std::mutex err_mutex;
    std::exception_ptr first_error;
    int begin = 0;
    for (int w = 0; w < workers; ++w) {
        const int len = base + (w < extra ? 1 : 0);
        const int end = begin + len;
        pool.emplace_back([&fn, &err_mutex, &first_error, w, begin, end] {
            try {
                fn(w, begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error)
                    first_error = std::current_exception();
            }
        });
        begin = end;
    }
    for (auto& t : pool)
        t.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

inline void parallel_for(int count, int threads, const std::function<void(int, int)>& fn)
{
    parallel_for_chunks(count, threads,
                        [&fn](int, int begin, int end) { fn(begin, end); });
}

} // namespace fpinn
