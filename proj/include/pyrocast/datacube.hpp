#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pyrocast/date.hpp"
#include "pyrocast/schema.hpp"

namespace pyrocast {

struct FireEvent {
    std::int64_t event_id = 0;
    std::vector<std::pair<std::int32_t, std::int32_t>> pixels;  // (row, col)
    Date start_date;
    double area_ha = 0.0;

    nlohmann::json to_json() const;
    static FireEvent from_json(const nlohmann::json& j);
};

struct ActiveFireDetection {
    std::int32_t row = 0;
    std::int32_t col = 0;
    Date date;
    double confidence = 1.0;

    nlohmann::json to_json() const;
    static ActiveFireDetection from_json(const nlohmann::json& j);
};

// Dense harmonized cube: dynamic variables [T, rows, cols], static [rows, cols],
// NaN marks missing data. Values are 32-bit floats in memory and on disk.
class Datacube {
  public:
    Datacube(GridSpec grid, Schema schema, Date start_date, std::int64_t n_days);

    const GridSpec& grid() const { return grid_; }
    const Schema& schema() const { return schema_; }
    Date start_date() const { return start_; }
    std::int64_t n_days() const { return n_days_; }
    Date end_date() const { return start_ + (n_days_ - 1); }
    bool contains_date(Date d) const { return d >= start_ && d <= end_date(); }
    std::int64_t day_index(Date d) const;  // bounds_error when outside

    bool satellite_shifted() const { return satellite_shifted_; }
    void set_satellite_shifted(bool v) { satellite_shifted_ = v; }

    std::uint64_t seed() const { return seed_; }
    void set_seed(std::uint64_t s) { seed_ = s; }
    const nlohmann::json& provenance() const { return provenance_; }
    void set_provenance(nlohmann::json p) { provenance_ = std::move(p); }

    std::int64_t plane_size() const { return grid_.n_rows * grid_.n_cols; }

    float* dynamic_plane(std::int64_t var, std::int64_t t);
    const float* dynamic_plane(std::int64_t var, std::int64_t t) const;
    float* static_plane(std::int64_t var);
    const float* static_plane(std::int64_t var) const;

    float dyn_at(std::int64_t var, std::int64_t t, std::int64_t row, std::int64_t col) const {
        return dynamic_plane(var, t)[row * grid_.n_cols + col];
    }
    float stat_at(std::int64_t var, std::int64_t row, std::int64_t col) const {
        return static_plane(var)[row * grid_.n_cols + col];
    }

    std::vector<float>& raw(std::int64_t var) { return data_[var]; }
    const std::vector<float>& raw(std::int64_t var) const { return data_[var]; }

    nlohmann::json header_json() const;

  private:
    GridSpec grid_;
    Schema schema_;
    Date start_;
    std::int64_t n_days_ = 0;
    bool satellite_shifted_ = false;
    std::uint64_t seed_ = 0;
    nlohmann::json provenance_;
    std::vector<std::vector<float>> data_;  // per schema variable
};

// Shift every shift_forward-flagged variable by one day: day t takes day t-1's
// raw values, day 0 becomes NaN. Weather variables are untouched.
void shift_satellite_forward(Datacube& cube);

struct RejectedEvent {
    std::int64_t event_id = 0;
    std::string reason;
};

struct PerimeterCandidate {
    std::int64_t event_id = 0;
    std::vector<std::pair<std::int32_t, std::int32_t>> pixels;
    Date window_start;
    Date window_end;
    double area_ha = 0.0;
};

struct StartDateResult {
    std::vector<FireEvent> events;
    std::vector<RejectedEvent> rejections;
};

// start_date = earliest detection falling inside the perimeter's pixel set and
// date window; perimeters with no intersecting detection are rejected.
StartDateResult assign_fire_start_dates(const std::vector<PerimeterCandidate>& perimeters,
                                        const std::vector<ActiveFireDetection>& detections);

struct RasterizeReport {
    std::int64_t labeled_pixels = 0;
    std::int64_t overlap_collisions = 0;  // same pixel, same day, multiple events
};

// Writes the target layer: 1 on the full final perimeter at the start date
// only, 0 elsewhere (never on later burning days).
RasterizeReport rasterize_targets(Datacube& cube, const std::vector<FireEvent>& events);

void save_cube(const std::string& path, const Datacube& cube);
Datacube load_cube(const std::string& path);

void save_events(const std::string& path, const std::vector<FireEvent>& events);
std::vector<FireEvent> load_events(const std::string& path);
void save_detections(const std::string& path, const std::vector<ActiveFireDetection>& dets);
std::vector<ActiveFireDetection> load_detections(const std::string& path);

}  // namespace pyrocast
