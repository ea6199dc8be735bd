#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>
#include <functional>

namespace pyrocast {

// Error taxonomy. usage_error maps to CLI exit code 2, runtime_failure to 1.
struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct runtime_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct dimension_error : usage_error { using usage_error::usage_error; };
struct parameter_error : usage_error { using usage_error::usage_error; };
struct bounds_error : usage_error { using usage_error::usage_error; };
struct schema_error : usage_error { using usage_error::usage_error; };
struct grid_error : usage_error { using usage_error::usage_error; };
struct state_error : usage_error { using usage_error::usage_error; };
struct config_error : usage_error { using usage_error::usage_error; };

struct format_error : runtime_failure { using runtime_failure::runtime_failure; };
struct numeric_error : runtime_failure { using runtime_failure::runtime_failure; };
struct divergence_error : runtime_failure { using runtime_failure::runtime_failure; };
struct undefined_metric_error : runtime_failure { using runtime_failure::runtime_failure; };

// Global worker-count cap, set from the CLI --threads flag. 0 means "hardware".
int& thread_cap();
int effective_threads();

// Static row partitioning; every index is owned by exactly one worker, so the
// result is identical for any thread count as long as workers never reduce
// into shared state.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& chunk_fn);

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ull);
std::string to_hex(std::uint64_t v);

}  // namespace pyrocast
