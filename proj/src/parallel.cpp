#include "cfood/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace cfood {

int resolve_threads(int requested)
{
    if (requested > 0)
        return requested;
    if (const char* env = std::getenv("CF_OOD_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0)
                return v;
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::int64_t n, int threads, const std::function<void(std::int64_t)>& body)
{
    if (n <= 0)
        return;
    const std::int64_t workers = std::clamp<std::int64_t>(threads, 1, n);
    if (workers == 1) {
        for (std::int64_t i = 0; i < n; ++i)
            body(i);
        return;
    }

    struct Failure {
        std::int64_t index = -1;
        std::exception_ptr error;
    };
    std::vector<Failure> failures(static_cast<std::size_t>(workers));
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::int64_t chunk = (n + workers - 1) / workers;
    for (std::int64_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            const std::int64_t begin = w * chunk;
            const std::int64_t end = std::min(n, begin + chunk);
            for (std::int64_t i = begin; i < end; ++i) {
                try {
                    body(i);
                } catch (...) {
                    failures[static_cast<std::size_t>(w)] = {i, std::current_exception()};
                    return;
                }
            }
        });
    }
    pool.clear();
    // Chunks are ordered, so the first failing worker holds the lowest failing index.
    for (const auto& f : failures)
        if (f.error)
            std::rethrow_exception(f.error);
}

} // namespace cfood
