#include <atomic>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "pyrocast/common.hpp"
#include "pyrocast/date.hpp"
#include "pyrocast/rng.hpp"

using namespace pyrocast;

TEST_CASE("error taxonomy maps onto the two exit-code bases") {
    CHECK_THROWS_AS(throw dimension_error("x"), usage_error);
    CHECK_THROWS_AS(throw parameter_error("x"), usage_error);
    CHECK_THROWS_AS(throw bounds_error("x"), usage_error);
    CHECK_THROWS_AS(throw schema_error("x"), usage_error);
    CHECK_THROWS_AS(throw grid_error("x"), usage_error);
    CHECK_THROWS_AS(throw state_error("x"), usage_error);
    CHECK_THROWS_AS(throw config_error("x"), usage_error);
    CHECK_THROWS_AS(throw format_error("x"), runtime_failure);
    CHECK_THROWS_AS(throw numeric_error("x"), runtime_failure);
    CHECK_THROWS_AS(throw divergence_error("x"), runtime_failure);
}

TEST_CASE("fnv1a64 matches the published reference values") {
    CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar", 6) == 0x85944171f73967e8ull);
}

TEST_CASE("parallel_for covers every index exactly once") {
    const std::int64_t n = 10007;
    std::vector<std::atomic<int>> hits(n);
    parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i) hits[i].fetch_add(1);
    });
    for (std::int64_t i = 0; i < n; ++i) CHECK(hits[i].load() == 1);

    bool ran = false;
    parallel_for(0, [&](std::int64_t, std::int64_t) { ran = true; });
    CHECK_FALSE(ran);
}

TEST_CASE("date round-trips and validates") {
    CHECK(Date::parse("1970-01-01").days() == 0);
    CHECK(Date::parse("2009-03-06").to_string() == "2009-03-06");
    CHECK(Date::parse("2020-02-29").to_string() == "2020-02-29");
    CHECK_THROWS_AS(Date::parse("2019-02-29"), parameter_error);
    CHECK_THROWS_AS(Date::parse("2020-13-01"), parameter_error);
    CHECK_THROWS_AS(Date::parse("2020-00-10"), parameter_error);
    CHECK_THROWS_AS(Date::parse("garbage"), parameter_error);
    CHECK_THROWS_AS(Date::parse("2020-1-1"), parameter_error);  // zero padding required
}

TEST_CASE("date arithmetic and ordering") {
    Date a = Date::parse("2019-12-31");
    Date b = a + 1;
    CHECK(b.to_string() == "2020-01-01");
    CHECK(b - a == 1);
    CHECK(a < b);
    CHECK(b.year() == 2020);
    CHECK(a.year() == 2019);
    // leap-year span
    CHECK(Date::parse("2021-01-01") - Date::parse("2020-01-01") == 366);
    CHECK(Date::parse("2020-01-01") - Date::parse("2019-01-01") == 365);
    // exhaustive round trip over four decades
    Date d = Date::parse("1990-01-01");
    Date end = Date::parse("2030-01-01");
    for (; d < end; d = d + 1) {
        int y, m, day;
        d.to_ymd(y, m, day);
        CHECK(Date::from_ymd(y, m, day).days() == d.days());
    }
}

TEST_CASE("rng streams are deterministic per (seed, name)") {
    RngStream a(42, "dropout");
    RngStream b(42, "dropout");
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    RngStream c(42, "init");
    RngStream d(43, "dropout");
    RngStream a2(42, "dropout");
    CHECK(c.next_u64() != a2.next_u64());
    RngStream a3(42, "dropout");
    CHECK(d.next_u64() != a3.next_u64());
}

TEST_CASE("rng split streams are independent of parent draw position") {
    RngStream parent(7, "root");
    RngStream child_before = parent.split("child");
    parent.next_u64();
    parent.next_u64();
    RngStream child_after = parent.split("child");
    for (int i = 0; i < 20; ++i) CHECK(child_before.next_u64() == child_after.next_u64());

    RngStream i0 = parent.split(std::uint64_t(0));
    RngStream i1 = parent.split(std::uint64_t(1));
    CHECK(i0.next_u64() != i1.next_u64());
}

TEST_CASE("rng uniform and normal have sane moments") {
    RngStream r(123, "moments");
    const int n = 200000;
    double sum = 0, sum2 = 0;
    for (int i = 0; i < n; ++i) {
        double v = r.next_double();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        sum += v;
        sum2 += v * v;
    }
    double mean = sum / n;
    double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean - 0.5) < 0.005);
    CHECK(std::abs(var - 1.0 / 12.0) < 0.005);

    sum = sum2 = 0;
    for (int i = 0; i < n; ++i) {
        double v = r.normal();
        sum += v;
        sum2 += v * v;
    }
    mean = sum / n;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(sum2 / n - 1.0) < 0.02);
}

TEST_CASE("next_below is in range and roughly uniform") {
    RngStream r(5, "below");
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 100000; ++i) {
        auto v = r.next_below(10);
        REQUIRE(v < 10);
        counts[v]++;
    }
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
    CHECK_THROWS_AS(r.next_below(0), parameter_error);
}
