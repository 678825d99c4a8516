#ifndef QACTION_PARALLEL_HPP
#define QACTION_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qaction
{

/// Number of worker threads used by library loops. 0 means hardware
/// concurrency. Results never depend on this value.
inline std::size_t& thread_count() noexcept
{
    static std::size_t count = 1;
    return count;
}

inline std::size_t resolved_thread_count() noexcept
{
    const auto n = thread_count();
    if (n != 0)
        return n;
    return std::max< std::size_t >(1, std::thread::hardware_concurrency());
}

/// Calls body(i) for i in [0, n). Each index writes only its own output, so
/// the order in which workers pick indices does not affect results. The
/// first exception (lowest index) is rethrown after all workers finish.
template < class Body >
void parallel_for(std::size_t n, Body&& body)
{
    const auto workers = std::min(resolved_thread_count(), n);
    if (workers <= 1)
    {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }

    std::atomic< std::size_t > next{0};
    std::mutex                 error_mutex;
    std::size_t                error_index = n;
    std::exception_ptr         error;

    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++)
        {
            try
            {
                body(i);
            }
            catch (...)
            {
                const std::lock_guard lock{error_mutex};
                if (i < error_index)
                {
                    error_index = i;
                    error       = std::current_exception();
                }
            }
        }
    };

    {
        std::vector< std::jthread > pool;
        pool.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w)
            pool.emplace_back(work);
        work();
    }
    if (error)
        std::rethrow_exception(error);
}

/// Ordered map: out[i] = fn(i).
template < class T, class Fn >
std::vector< T > parallel_map(std::size_t n, Fn&& fn)
{
    std::vector< T > out(n);
    parallel_for(n, [&](std::size_t i) { out[i] = fn(i); });
    return out;
}

} // namespace qaction

#endif // QACTION_PARALLEL_HPP
