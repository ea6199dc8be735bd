#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "pyrocast/common.hpp"

namespace pyrocast {

// Counter-based stream: output i is a pure function of (key, i), so streams can
// be split by name without coupling and replayed independently of draw order
// elsewhere in the program.
class RngStream {
  public:
    RngStream() : key_(0x9e3779b97f4a7c15ull) {}
    RngStream(std::uint64_t seed, std::string_view name) : key_(derive(seed, name)) {}

    RngStream split(std::string_view child) const { return RngStream(derive(key_, child)); }
    RngStream split(std::uint64_t child_index) const {
        std::uint64_t buf = child_index;
        return RngStream(fnv1a64(&buf, sizeof(buf), key_ ^ 0x51ed2701a3c5e891ull));
    }

    std::uint64_t next_u64() {
        std::uint64_t z = key_ + (++counter_) * 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    float next_float() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    double normal() {
        // Box-Muller; one value per pair keeps the stream stateless apart from the counter.
        double u1 = next_double(), u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Unbiased draw from [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw parameter_error("next_below(0)");
        std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    std::uint64_t key() const { return key_; }

  private:
    explicit RngStream(std::uint64_t key) : key_(key) {}
    static std::uint64_t derive(std::uint64_t seed, std::string_view name) {
        std::uint64_t h = fnv1a64(name.data(), name.size(), 0xcbf29ce484222325ull ^ seed);
        // one splitmix round so similar names do not give similar keys
        h += 0x9e3779b97f4a7c15ull;
        h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
        h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
        return h ^ (h >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace pyrocast
