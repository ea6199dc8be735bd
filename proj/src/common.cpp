#include "pyrocast/common.hpp"

#include <algorithm>
#include <cstdio>

namespace pyrocast {

int& thread_cap() {
    static int cap = 0;
    return cap;
}

int effective_threads() {
    int cap = thread_cap();
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    if (cap > 0) return std::min(cap, hw);
    return hw;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& chunk_fn) {
    if (n <= 0) return;
    int workers = effective_threads();
    if (workers <= 1 || n == 1) {
        chunk_fn(0, n);
        return;
    }
    workers = static_cast<int>(std::min<std::int64_t>(workers, n));
    std::int64_t per = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        std::int64_t lo = w * per;
        std::int64_t hi = std::min<std::int64_t>(lo + per, n);
        if (lo >= hi) break;
        pool.emplace_back([&chunk_fn, lo, hi] { chunk_fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

}  // namespace pyrocast
