#pragma once

#include "pyrocast/datacube.hpp"

namespace pyrocast {

// Coefficients of the planted ignition model. Each term is standardized over
// the cube before weighting, so the magnitudes below are in comparable units.
// direct_* act on the previous day's value as the models see it (satellite
// variables already shifted); trend_t2m acts on the recent-vs-earlier
// temperature contrast inside the 10-day window but outside the current day,
// so only sequence models can read it directly; nbhd_ndvi acts on the 5x5
// neighborhood-minus-center vegetation contrast, visible only to patch models.
struct FireProcess {
    double rate = 1.0;  // overall intensity multiplier; 0 disables ignition
    double intercept = -13.9;
    double direct_t2m = 1.6;
    double direct_wind = 0.7;
    double direct_ndvi = -0.8;
    double direct_precip = -0.6;
    double direct_elev = -0.5;
    double trend_t2m = 1.0;
    double nbhd_ndvi = 0.55;
    std::int64_t event_min_pixels = 9;
    std::int64_t event_max_pixels = 25;
};

struct SynthParams {
    GridSpec grid;
    Date start_date;
    std::int64_t n_days = 0;
    std::uint64_t seed = 0;
    FireProcess fire;
    // field texture
    double ar1_rho = 0.75;        // day-to-day persistence of the coarse noise
    std::int64_t coarse_step = 16;  // knot spacing of the broad field, cells
    std::int64_t fine_step = 4;     // knot spacing of the fine texture, cells
};

struct SynthResult {
    Datacube cube;
    std::vector<FireEvent> events;
    std::vector<ActiveFireDetection> detections;
    RasterizeReport rasterize_report;
};

// Builds a reference-schema cube of smooth seasonal fields, plants fire events
// through a logistic ignition model on known feature combinations, rasterizes
// the targets and emits matching active-fire detections. Satellite variables
// come out shifted forward one day. Deterministic given params.
SynthResult generate_synthetic_cube(const SynthParams& params);

}  // namespace pyrocast
