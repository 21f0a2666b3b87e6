#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace pcp {

using rng_t = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t value)
{
    value += 0x9e3779b97f4a7c15ULL;
    value = (value ^ (value >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    value = (value ^ (value >> 27U)) * 0x94d049bb133111ebULL;
    return value ^ (value >> 31U);
}

/// Stream tags keep per-purpose random streams disjoint for the same index.
enum class stream : std::uint64_t
{
    split = 1,
    fit = 2,
    calibration = 3,
    test = 4,
    selection = 5,
    quadrature = 6,
    data = 7,
    repetition = 8,
    slab = 9,
    coefficients = 10,
};

inline std::uint64_t derive_seed(std::uint64_t seed, stream tag, std::uint64_t index = 0)
{
    auto h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(tag));
    return splitmix64(h ^ index);
}

inline rng_t make_rng(std::uint64_t seed, stream tag, std::uint64_t index = 0)
{
    return rng_t{derive_seed(seed, tag, index)};
}

inline double uniform01(rng_t& rng)
{
    return std::uniform_real_distribution<double>{0.0, 1.0}(rng);
}

inline double standard_normal(rng_t& rng)
{
    return std::normal_distribution<double>{0.0, 1.0}(rng);
}

/// Runs body(i) for i in [0, count) across hardware threads.
/// Each index must derive its own random stream, so the result does not
/// depend on scheduling. The first exception thrown by any worker is rethrown.
template <typename body_t>
void parallel_for(std::size_t count, body_t&& body)
{
    const auto workers = std::min<std::size_t>(count, std::max(1U, std::thread::hardware_concurrency()));
    if (workers <= 1)
    {
        for (std::size_t i = 0; i < count; ++ i)
        {
            body(i);
        }
        return;
    }

    std::mutex mutex;
    std::exception_ptr failure;
    std::size_t next = 0;

    auto worker = [&]()
    {
        for (;;)
        {
            std::size_t index = 0;
            {
                const std::lock_guard lock{mutex};
                if (failure || next >= count)
                {
                    return;
                }
                index = next ++;
            }
            try
            {
                body(index);
            }
            catch (...)
            {
                const std::lock_guard lock{mutex};
                if (!failure)
                {
                    failure = std::current_exception();
                }
            }
        }
    };

    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (std::size_t t = 0; t < workers; ++ t)
    {
        threads.emplace_back(worker);
    }
    threads.clear();

    if (failure)
    {
        std::rethrow_exception(failure);
    }
}

} // namespace pcp
