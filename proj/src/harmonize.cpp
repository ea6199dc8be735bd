#include "pyrocast/harmonize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "pyrocast/binio.hpp"

namespace pyrocast {

namespace {
constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();
}

void Raster::validate() const {
    grid.validate();
    if (static_cast<std::int64_t>(cells.size()) != grid.n_rows * grid.n_cols)
        throw dimension_error("raster cell count does not match its grid");
}

namespace {

float sample_bilinear(const Raster& src, double x, double y) {
    const GridSpec& g = src.grid;
    // fractional index of the sample point in center coordinates
    double fc = (x - g.origin_x) / g.cell_size - 0.5;
    double fr = (g.origin_y - y) / g.cell_size - 0.5;
    // outside the outer raster rectangle -> no coverage
    if (fc < -0.5 || fc > g.n_cols - 0.5 || fr < -0.5 || fr > g.n_rows - 0.5) return kNaN;
    // clamp into the span of cell centers so edge cells extend half a cell
    fc = std::clamp(fc, 0.0, static_cast<double>(g.n_cols - 1));
    fr = std::clamp(fr, 0.0, static_cast<double>(g.n_rows - 1));
    std::int64_t c0 = std::min<std::int64_t>(static_cast<std::int64_t>(fc), g.n_cols - 2);
    std::int64_t r0 = std::min<std::int64_t>(static_cast<std::int64_t>(fr), g.n_rows - 2);
    if (g.n_cols == 1) c0 = 0;
    if (g.n_rows == 1) r0 = 0;
    std::int64_t c1 = std::min(c0 + 1, g.n_cols - 1);
    std::int64_t r1 = std::min(r0 + 1, g.n_rows - 1);
    double wc = fc - static_cast<double>(c0);
    double wr = fr - static_cast<double>(r0);
    float v00 = src.at(r0, c0), v01 = src.at(r0, c1);
    float v10 = src.at(r1, c0), v11 = src.at(r1, c1);
    if (std::isnan(v00) || std::isnan(v01) || std::isnan(v10) || std::isnan(v11)) return kNaN;
    double top = (1.0 - wc) * v00 + wc * v01;
    double bot = (1.0 - wc) * v10 + wc * v11;
    return static_cast<float>((1.0 - wr) * top + wr * bot);
}

// source cells whose centers fall inside the dst cell rectangle
struct CellRange {
    std::int64_t r0, r1, c0, c1;  // half-open
    bool empty() const { return r0 >= r1 || c0 >= c1; }
};

CellRange covered_cells(const GridSpec& src, const GridSpec& dst, std::int64_t row,
                        std::int64_t col) {
    double x_lo = dst.origin_x + col * dst.cell_size;
    double x_hi = x_lo + dst.cell_size;
    double y_hi = dst.origin_y - row * dst.cell_size;
    double y_lo = y_hi - dst.cell_size;
    // center of src col c is origin_x + (c+0.5)*cell; inside iff x_lo <= center < x_hi
    std::int64_t c0 = static_cast<std::int64_t>(
        std::ceil((x_lo - src.origin_x) / src.cell_size - 0.5));
    std::int64_t c1 = static_cast<std::int64_t>(
        std::floor((x_hi - src.origin_x) / src.cell_size - 0.5 - 1e-12)) + 1;
    std::int64_t r0 = static_cast<std::int64_t>(
        std::ceil((src.origin_y - y_hi) / src.cell_size - 0.5));
    std::int64_t r1 = static_cast<std::int64_t>(
        std::floor((src.origin_y - y_lo) / src.cell_size - 0.5 - 1e-12)) + 1;
    c0 = std::max<std::int64_t>(c0, 0);
    r0 = std::max<std::int64_t>(r0, 0);
    c1 = std::min(c1, src.n_cols);
    r1 = std::min(r1, src.n_rows);
    return {r0, r1, c0, c1};
}

}  // namespace

Raster resample_to_grid(const Raster& src, const GridSpec& dst, ResampleRule rule) {
    src.validate();
    dst.validate();
    if (src.grid.projection != dst.projection)
        throw grid_error("projection mismatch: source '" + src.grid.projection +
                         "' vs destination '" + dst.projection + "'");
    Raster out;
    out.grid = dst;
    out.cells.assign(static_cast<std::size_t>(dst.n_rows * dst.n_cols), kNaN);
    for (std::int64_t row = 0; row < dst.n_rows; ++row) {
        for (std::int64_t col = 0; col < dst.n_cols; ++col) {
            float& cell = out.cells[row * dst.n_cols + col];
            double x = dst.center_x(col);
            double y = dst.center_y(row);
            switch (rule) {
                case ResampleRule::bilinear:
                    cell = sample_bilinear(src, x, y);
                    break;
                case ResampleRule::nearest: {
                    std::int64_t c = static_cast<std::int64_t>(
                        std::floor((x - src.grid.origin_x) / src.grid.cell_size));
                    std::int64_t r = static_cast<std::int64_t>(
                        std::floor((src.grid.origin_y - y) / src.grid.cell_size));
                    cell = (r >= 0 && r < src.grid.n_rows && c >= 0 && c < src.grid.n_cols)
                               ? src.at(r, c)
                               : kNaN;
                    break;
                }
                case ResampleRule::mean: {
                    CellRange cr = covered_cells(src.grid, dst, row, col);
                    double acc = 0.0;
                    std::int64_t n = 0;
                    for (std::int64_t r = cr.r0; r < cr.r1; ++r)
                        for (std::int64_t c = cr.c0; c < cr.c1; ++c) {
                            float v = src.at(r, c);
                            if (std::isnan(v)) continue;
                            acc += v;
                            ++n;
                        }
                    cell = n > 0 ? static_cast<float>(acc / static_cast<double>(n)) : kNaN;
                    break;
                }
                case ResampleRule::mode: {
                    CellRange cr = covered_cells(src.grid, dst, row, col);
                    std::map<float, std::int64_t> counts;
                    for (std::int64_t r = cr.r0; r < cr.r1; ++r)
                        for (std::int64_t c = cr.c0; c < cr.c1; ++c) {
                            float v = src.at(r, c);
                            if (!std::isnan(v)) counts[v]++;
                        }
                    if (counts.empty()) {
                        cell = kNaN;
                    } else {
                        // ties resolve to the smallest value: map iterates ascending
                        float best_v = counts.begin()->first;
                        std::int64_t best_n = counts.begin()->second;
                        for (const auto& [v, n] : counts)
                            if (n > best_n) {
                                best_n = n;
                                best_v = v;
                            }
                        cell = best_v;
                    }
                    break;
                }
            }
        }
    }
    return out;
}

DailyAggregate aggregate_daily_weather(const std::vector<Raster>& snapshots) {
    if (snapshots.size() != 5)
        throw schema_error("daily aggregation needs exactly 5 snapshots, got " +
                           std::to_string(snapshots.size()));
    for (const auto& s : snapshots) {
        s.validate();
        if (!(s.grid == snapshots[0].grid))
            throw grid_error("daily snapshots must share one grid");
    }
    DailyAggregate out;
    out.min.grid = out.max.grid = snapshots[0].grid;
    std::size_t n = snapshots[0].cells.size();
    out.min.cells.assign(n, kNaN);
    out.max.cells.assign(n, kNaN);
    for (std::size_t i = 0; i < n; ++i) {
        float lo = snapshots[0].cells[i], hi = lo;
        bool bad = std::isnan(lo);
        for (std::size_t s = 1; s < 5 && !bad; ++s) {
            float v = snapshots[s].cells[i];
            if (std::isnan(v)) {
                bad = true;
                break;
            }
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!bad) {
            out.min.cells[i] = lo;
            out.max.cells[i] = hi;
        }
    }
    return out;
}

int landcover_vintage_for_year(int year) {
    if (year <= 2011) return 2006;
    if (year <= 2017) return 2012;
    return 2018;
}

void forward_fill_daily(std::vector<float>& series, std::int64_t n_days, std::int64_t plane) {
    if (static_cast<std::int64_t>(series.size()) != n_days * plane)
        throw dimension_error("forward_fill_daily: series size mismatch");
    for (std::int64_t t = 1; t < n_days; ++t) {
        float* today = series.data() + t * plane;
        const float* prev = series.data() + (t - 1) * plane;
        for (std::int64_t i = 0; i < plane; ++i)
            if (std::isnan(today[i])) today[i] = prev[i];
    }
}

void save_raster(const std::string& path, const Raster& r, const nlohmann::json& meta) {
    r.validate();
    nlohmann::json header = {{"format", "PFC1"},
                             {"kind", "raster"},
                             {"grid", r.grid.to_json()},
                             {"array_order", "[row,col] row-major float32"}};
    for (const auto& [key, value] : meta.items()) header[key] = value;
    auto os = binio::open_out(path);
    binio::write_header(os, "PFC1", header);
    binio::write_array(os, r.cells.data(), r.cells.size());
    if (!os) throw runtime_failure("failed writing raster to '" + path + "'");
}

Raster load_raster(const std::string& path, nlohmann::json* meta) {
    auto is = binio::open_in(path);
    nlohmann::json header = binio::read_header(is, "PFC1");
    if (header.value("kind", "") != "raster")
        throw format_error("'" + path + "' is not a raster file");
    Raster r;
    try {
        r.grid = GridSpec::from_json(header.at("grid"));
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("malformed raster header: ") + e.what());
    }
    r.grid.validate();
    r.cells.resize(static_cast<std::size_t>(r.grid.n_rows * r.grid.n_cols));
    binio::read_array(is, r.cells.data(), r.cells.size());
    char extra;
    if (is.read(&extra, 1)) throw format_error("raster payload longer than the header declares");
    if (meta) *meta = header;
    return r;
}

}  // namespace pyrocast
