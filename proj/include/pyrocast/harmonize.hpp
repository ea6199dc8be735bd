#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "pyrocast/schema.hpp"

namespace pyrocast {

// A single-variable 2-D field on its own grid, the unit of harmonization input.
struct Raster {
    GridSpec grid;
    std::vector<float> cells;  // [n_rows * n_cols] row-major, row 0 north

    float at(std::int64_t row, std::int64_t col) const {
        return cells[row * grid.n_cols + col];
    }
    void validate() const;
};

// Regrid src onto dst. bilinear: sample at the destination cell center from
// the four surrounding source centers (any NaN corner poisons the result);
// mean/mode: aggregate all source centers falling inside the destination cell,
// ignoring NaN (all-NaN -> NaN; mode ties -> smallest value); nearest: the
// source cell containing the destination center, NaN passes through. Points
// outside the source coverage give NaN.
Raster resample_to_grid(const Raster& src, const GridSpec& dst, ResampleRule rule);

// Per-cell min/max across the five fixed daily snapshot hours; any NaN
// snapshot poisons that cell.
struct DailyAggregate {
    Raster min;
    Raster max;
};
DailyAggregate aggregate_daily_weather(const std::vector<Raster>& snapshots);

// Nearest land-cover vintage not later than the year: 2006 for years <= 2011,
// 2012 for 2012..2017, 2018 from 2018 on.
int landcover_vintage_for_year(int year);

// Latest-available-composite forward fill: for each cell, day t takes the most
// recent non-NaN value at or before t. Leading gaps stay NaN.
void forward_fill_daily(std::vector<float>& series, std::int64_t n_days, std::int64_t plane);

// Single-field container files, the on-disk form of harmonization inputs.
// `meta` fields (variable name, date, source) ride along in the header.
void save_raster(const std::string& path, const Raster& r,
                 const nlohmann::json& meta = nlohmann::json::object());
Raster load_raster(const std::string& path, nlohmann::json* meta = nullptr);

}  // namespace pyrocast
