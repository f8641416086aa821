#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bri2d
{
inline unsigned default_workers()
{
    return std::max(1u, std::thread::hardware_concurrency());
}

/*!
 * Evaluate fn(i) for i in [0, n) on a pool of workers.
 *
 * Results are stored by index, so any reduction over the returned vector is
 * independent of scheduling and of the worker count.
 */
template<class Fn>
auto parallel_map(std::size_t n, unsigned workers, Fn&& fn)
    -> std::vector<decltype(fn(std::size_t{}))>
{
    using R = decltype(fn(std::size_t{}));
    std::vector<R> out(n);
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1)
    {
        for (std::size_t i = 0; i < n; ++i)
        {
            out[i] = fn(i);
        }
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_lock;
    auto work = [&] {
        for (;;)
        {
            std::size_t i = next.fetch_add(1);
            if (i >= n)
            {
                return;
            }
            try
            {
                out[i] = fn(i);
            }
            catch (...)
            {
                std::lock_guard<std::mutex> g(error_lock);
                if (!error)
                {
                    error = std::current_exception();
                }
                next.store(n);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
    {
        pool.emplace_back(work);
    }
    for (auto& t : pool)
    {
        t.join();
    }
    if (error)
    {
        std::rethrow_exception(error);
    }
    return out;
}

}  // namespace bri2d
