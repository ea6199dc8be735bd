#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "pyrocast/binio.hpp"
#include "pyrocast/rng.hpp"
#include "pyrocast/synth.hpp"

using namespace pyrocast;

namespace {

SynthParams small_params(std::uint64_t seed) {
    SynthParams p;
    p.grid.n_rows = 48;
    p.grid.n_cols = 48;
    p.grid.origin_x = 0;
    p.grid.origin_y = 48000;
    p.start_date = Date::parse("2019-03-01");
    p.n_days = 90;
    p.seed = seed;
    p.fire.rate = 40.0;  // dense ignitions so a small cube yields enough events
    return p;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

// independent pixel-payload extraction: 18 current-day features plus the
// 10-day means of the 13 dynamic inputs, window t-10..t-1 of the target day
std::vector<double> pixel_features(const Datacube& cube, std::int64_t r, std::int64_t c,
                                   std::int64_t t) {
    const Schema& s = cube.schema();
    std::vector<double> out;
    auto dyn = s.dynamic_inputs();
    auto stat = s.static_inputs();
    for (std::int64_t v : dyn) out.push_back(cube.dyn_at(v, t - 1, r, c));
    for (std::int64_t v : stat) out.push_back(cube.stat_at(v, r, c));
    for (std::int64_t v : dyn) {
        double acc = 0;
        for (std::int64_t k = 1; k <= 10; ++k) acc += cube.dyn_at(v, t - k, r, c);
        out.push_back(acc / 10.0);
    }
    return out;
}

}  // namespace

TEST_CASE("synthetic cubes are deterministic and honor the rate switch") {
    SynthParams p = small_params(7);
    SynthResult a = generate_synthetic_cube(p);
    SynthResult b = generate_synthetic_cube(p);

    CHECK(a.events.size() == b.events.size());
    CHECK(a.detections.size() == b.detections.size());
    std::string pa = temp_path("synth_a.pfc"), pb = temp_path("synth_b.pfc");
    save_cube(pa, a.cube);
    save_cube(pb, b.cube);
    CHECK(binio::file_hash(pa) == binio::file_hash(pb));
    std::remove(pa.c_str());
    std::remove(pb.c_str());

    SynthParams q = small_params(8);
    SynthResult c = generate_synthetic_cube(q);
    // a different seed moves the fields; compare one payload plane
    CHECK(std::memcmp(c.cube.raw(0).data(), a.cube.raw(0).data(),
                      sizeof(float) * 100) != 0);

    q.fire.rate = 0.0;
    SynthResult none = generate_synthetic_cube(q);
    CHECK(none.events.empty());
    CHECK(none.detections.empty());
    const auto& target = none.cube.raw(none.cube.schema().target_index());
    for (float v : target) CHECK(v == 0.0f);
}

TEST_CASE("synthetic parameter validation") {
    SynthParams p = small_params(1);
    p.n_days = 29;
    CHECK_THROWS_AS(generate_synthetic_cube(p), parameter_error);
    p = small_params(1);
    p.grid.n_rows = 8;
    CHECK_THROWS_AS(generate_synthetic_cube(p), parameter_error);
    p = small_params(1);
    p.fire.rate = -1.0;
    CHECK_THROWS_AS(generate_synthetic_cube(p), parameter_error);
}

TEST_CASE("synthetic events live inside the usable day range with labels to match") {
    SynthParams p = small_params(21);
    SynthResult r = generate_synthetic_cube(p);
    REQUIRE(r.events.size() > 5);
    CHECK(r.cube.satellite_shifted());

    std::int64_t pixel_total = 0;
    for (const auto& e : r.events) {
        std::int64_t t = r.cube.day_index(e.start_date);
        CHECK(t >= 11);
        CHECK(e.pixels.size() >= 9);
        CHECK(e.pixels.size() <= 25);
        CHECK(e.area_ha == doctest::Approx(e.pixels.size() * 100.0));
        pixel_total += static_cast<std::int64_t>(e.pixels.size());
    }
    CHECK(r.rasterize_report.labeled_pixels + r.rasterize_report.overlap_collisions ==
          pixel_total);

    double label_sum = 0;
    for (float v : r.cube.raw(r.cube.schema().target_index())) label_sum += v;
    CHECK(static_cast<std::int64_t>(label_sum) == r.rasterize_report.labeled_pixels);

    // every event has at least one detection on its start date inside its pixels
    for (const auto& e : r.events) {
        bool found = false;
        for (const auto& d : r.detections)
            if (d.date == e.start_date &&
                std::find(e.pixels.begin(), e.pixels.end(),
                          std::make_pair(d.row, d.col)) != e.pixels.end())
                found = true;
        CHECK(found);
    }

    // satellite day 0 is NaN, weather day 0 is not
    const Schema& s = r.cube.schema();
    CHECK(std::isnan(r.cube.dyn_at(s.require("ndvi"), 0, 10, 10)));
    CHECK_FALSE(std::isnan(r.cube.dyn_at(s.require("t2m_max"), 0, 10, 10)));
}

TEST_CASE("planted ignition coefficients are recoverable from pixel samples") {
    SynthParams p = small_params(33);
    p.n_days = 120;
    p.fire.rate = 60.0;
    SynthResult r = generate_synthetic_cube(p);
    const Datacube& cube = r.cube;
    REQUIRE(r.events.size() >= 20);

    // positives: event pixels at their start day; negatives: random cell-days
    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (const auto& e : r.events) {
        std::int64_t t = cube.day_index(e.start_date);
        for (auto [pr, pc] : e.pixels) {
            xs.push_back(pixel_features(cube, pr, pc, t));
            ys.push_back(1.0);
        }
    }
    const std::int64_t target = cube.schema().target_index();
    RngStream rng(5, "negatives");
    const std::size_t n_pos = xs.size();
    while (ys.size() < 3 * n_pos) {
        std::int64_t t = 11 + static_cast<std::int64_t>(rng.next_below(p.n_days - 11));
        std::int64_t rr = static_cast<std::int64_t>(rng.next_below(48));
        std::int64_t cc = static_cast<std::int64_t>(rng.next_below(48));
        if (cube.dyn_at(target, t, rr, cc) != 0.0f) continue;
        xs.push_back(pixel_features(cube, rr, cc, t));
        ys.push_back(0.0);
    }

    // standardize, then fit a logistic regression by plain gradient descent
    const std::size_t n = xs.size(), d = xs[0].size();
    std::vector<double> mean(d, 0.0), sd(d, 0.0);
    for (const auto& x : xs)
        for (std::size_t j = 0; j < d; ++j) mean[j] += x[j];
    for (auto& m : mean) m /= static_cast<double>(n);
    for (const auto& x : xs)
        for (std::size_t j = 0; j < d; ++j) sd[j] += (x[j] - mean[j]) * (x[j] - mean[j]);
    for (auto& v : sd) v = std::sqrt(std::max(v / static_cast<double>(n), 1e-12));
    for (auto& x : xs)
        for (std::size_t j = 0; j < d; ++j) x[j] = (x[j] - mean[j]) / sd[j];

    std::vector<double> w(d, 0.0);
    double b = 0.0;
    for (int iter = 0; iter < 400; ++iter) {
        std::vector<double> gw(d, 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double z = b;
            for (std::size_t j = 0; j < d; ++j) z += w[j] * xs[i][j];
            double err = 1.0 / (1.0 + std::exp(-z)) - ys[i];
            for (std::size_t j = 0; j < d; ++j) gw[j] += err * xs[i][j];
            gb += err;
        }
        for (std::size_t j = 0; j < d; ++j) w[j] -= 0.5 / n * gw[j];
        b -= 0.5 / n * gb;
    }

    // combined current + 10-day-mean weight per planted dynamic feature
    const Schema& s = cube.schema();
    auto dyn = s.dynamic_inputs();
    auto stat = s.static_inputs();
    auto dyn_pos = [&](const std::string& name) {
        auto it = std::find(dyn.begin(), dyn.end(), s.require(name));
        return static_cast<std::size_t>(it - dyn.begin());
    };
    auto stat_pos = [&](const std::string& name) {
        auto it = std::find(stat.begin(), stat.end(), s.require(name));
        return dyn.size() + static_cast<std::size_t>(it - stat.begin());
    };
    auto combined = [&](const std::string& name) {
        std::size_t k = dyn_pos(name);
        return w[k] + w[dyn.size() + stat.size() + k];
    };
    INFO("t2m ", combined("t2m_max"), " wind ", combined("wind_u_max"), " ndvi ",
         combined("ndvi"), " precip ", combined("precip_max"), " elev ",
         w[stat_pos("elevation")]);
    CHECK(combined("t2m_max") > 0.0);
    CHECK(combined("wind_u_max") > 0.0);
    CHECK(combined("ndvi") < 0.0);
    CHECK(combined("precip_max") < 0.0);
    CHECK(w[stat_pos("elevation")] < 0.0);
}
