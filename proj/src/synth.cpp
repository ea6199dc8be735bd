#include "pyrocast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "pyrocast/kernels.hpp"
#include "pyrocast/rng.hpp"

namespace pyrocast {

namespace {

// AR(1) sequence of coarse noise grids, bilinearly upsampled onto the cube
// grid. Knots extend one step past each edge so every cell interpolates.
class NoiseField {
  public:
    NoiseField(std::int64_t rows, std::int64_t cols, std::int64_t step, double rho,
               RngStream stream)
        : rows_(rows), cols_(cols), step_(step), rho_(rho), stream_(stream) {
        krows_ = rows / step + 2;
        kcols_ = cols / step + 2;
        knots_.resize(static_cast<std::size_t>(krows_ * kcols_));
        for (auto& k : knots_) k = stream_.normal();
    }

    void advance() {
        double mix = std::sqrt(1.0 - rho_ * rho_);
        for (auto& k : knots_) k = rho_ * k + mix * stream_.normal();
    }

    double at(std::int64_t r, std::int64_t c) const {
        double fr = static_cast<double>(r) / step_;
        double fc = static_cast<double>(c) / step_;
        std::int64_t r0 = static_cast<std::int64_t>(fr);
        std::int64_t c0 = static_cast<std::int64_t>(fc);
        double wr = fr - r0, wc = fc - c0;
        const double* k = knots_.data();
        double top = (1 - wc) * k[r0 * kcols_ + c0] + wc * k[r0 * kcols_ + c0 + 1];
        double bot = (1 - wc) * k[(r0 + 1) * kcols_ + c0] + wc * k[(r0 + 1) * kcols_ + c0 + 1];
        return (1 - wr) * top + wr * bot;
    }

  private:
    std::int64_t rows_, cols_, step_, krows_ = 0, kcols_ = 0;
    double rho_;
    RngStream stream_;
    std::vector<double> knots_;
};

struct FieldShape {
    double offset;
    double season_amp;  // peaks mid-summer
    double broad_amp;
    double fine_amp;
    bool clamp_nonneg;
};

double season_of(Date d) {
    // smooth annual cycle peaking around late July
    std::int64_t doy = d - Date::from_ymd(d.year(), 1, 1) + 1;
    return std::sin((static_cast<double>(doy) - 110.0) / 365.25 * 2.0 *
                    3.14159265358979323846);
}

FieldShape shape_for(const std::string& name) {
    if (name == "t2m_min") return {8.0, 9.0, 3.0, 0.9, false};
    if (name == "t2m_max") return {18.0, 10.0, 3.5, 1.0, false};
    if (name == "wind_u_min") return {-2.0, 0.5, 2.0, 0.6, false};
    if (name == "wind_u_max") return {3.0, 0.8, 2.5, 0.8, false};
    if (name == "wind_v_min") return {-2.5, 0.4, 2.0, 0.6, false};
    if (name == "wind_v_max") return {2.5, 0.6, 2.5, 0.8, false};
    if (name == "precip_max") return {0.6, -1.2, 1.6, 0.5, true};
    if (name == "fpar") return {0.45, 0.12, 0.1, 0.04, true};
    if (name == "lai") return {2.2, 0.8, 0.7, 0.25, true};
    if (name == "lst_day") return {24.0, 12.0, 4.0, 1.3, false};
    if (name == "lst_night") return {12.0, 8.0, 3.0, 1.0, false};
    if (name == "ndvi") return {0.45, -0.1, 0.12, 0.05, true};
    if (name == "evi") return {0.4, -0.08, 0.1, 0.04, true};
    if (name == "elevation") return {600.0, 0.0, 350.0, 90.0, true};
    if (name == "aspect") return {180.0, 0.0, 80.0, 30.0, true};
    if (name == "slope") return {8.0, 0.0, 5.0, 2.0, true};
    if (name == "roads_density") return {0.8, 0.0, 0.5, 0.2, true};
    if (name == "population_density") return {40.0, 0.0, 35.0, 12.0, true};
    throw parameter_error("no synthetic field shape for variable '" + name + "'");
}

// truncated 5x5 neighborhood mean via integral image (edges use the in-grid part)
void nbhd5_mean(const float* plane, std::int64_t rows, std::int64_t cols, float* out) {
    std::vector<double> integ(static_cast<std::size_t>((rows + 1) * (cols + 1)), 0.0);
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c)
            integ[(r + 1) * (cols + 1) + c + 1] = plane[r * cols + c] +
                                                  integ[r * (cols + 1) + c + 1] +
                                                  integ[(r + 1) * (cols + 1) + c] -
                                                  integ[r * (cols + 1) + c];
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) {
            std::int64_t r0 = std::max<std::int64_t>(0, r - 2), r1 = std::min(rows, r + 3);
            std::int64_t c0 = std::max<std::int64_t>(0, c - 2), c1 = std::min(cols, c + 3);
            double s = integ[r1 * (cols + 1) + c1] - integ[r0 * (cols + 1) + c1] -
                       integ[r1 * (cols + 1) + c0] + integ[r0 * (cols + 1) + c0];
            out[r * cols + c] = static_cast<float>(s / ((r1 - r0) * (c1 - c0)));
        }
}

struct TermStats {
    double mean = 0.0, inv_std = 1.0;
};

TermStats finish(double sum, double sumsq, double n) {
    TermStats s;
    s.mean = sum / n;
    double var = std::max(sumsq / n - s.mean * s.mean, 1e-12);
    s.inv_std = 1.0 / std::sqrt(var);
    return s;
}

}  // namespace

SynthResult generate_synthetic_cube(const SynthParams& params) {
    const GridSpec& grid = params.grid;
    grid.validate();
    if (grid.n_rows < 16 || grid.n_cols < 16)
        throw parameter_error("synthetic grid needs at least 16x16 cells");
    if (params.n_days < 30) throw parameter_error("synthetic cube needs at least 30 days");
    if (params.fire.rate < 0) throw parameter_error("fire rate must be nonnegative");
    if (params.fire.event_min_pixels < 1 ||
        params.fire.event_max_pixels < params.fire.event_min_pixels)
        throw parameter_error("bad event size range");

    Schema schema = Schema::reference();
    SynthResult out{Datacube(grid, schema, params.start_date, params.n_days), {}, {}, {}};
    Datacube& cube = out.cube;
    cube.set_seed(params.seed);
    cube.set_provenance({{"generator", "synthetic"},
                         {"fire_rate", params.fire.rate},
                         {"ar1_rho", params.ar1_rho}});

    RngStream root(params.seed, "synth");
    const std::int64_t rows = grid.n_rows, cols = grid.n_cols, plane = cube.plane_size();

    // field synthesis, one independent pair of noise scales per variable
    for (std::size_t vi = 0; vi < schema.vars.size(); ++vi) {
        const VariableSpec& var = schema.vars[vi];
        if (var.role == VarRole::target) continue;
        RngStream vs = root.split("field").split(static_cast<std::uint64_t>(vi));
        if (var.role == VarRole::stratifier) {
            // land cover: quantized smooth field, four spatially coherent classes
            NoiseField broad(rows, cols, 24, 1.0, vs.split("broad"));
            float* p = cube.static_plane(static_cast<std::int64_t>(vi));
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t c = 0; c < cols; ++c) {
                    double v = broad.at(r, c);
                    float cls = v < -0.6 ? 1.0f : v < 0.1 ? 2.0f : v < 0.8 ? 3.0f : 4.0f;
                    p[r * cols + c] = cls;
                }
            continue;
        }
        FieldShape fs = shape_for(var.name);
        NoiseField broad(rows, cols, params.coarse_step, params.ar1_rho, vs.split("broad"));
        NoiseField fine(rows, cols, params.fine_step, 0.9, vs.split("fine"));
        if (var.kind == VarKind::static_) {
            float* p = cube.static_plane(static_cast<std::int64_t>(vi));
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t c = 0; c < cols; ++c) {
                    double v = fs.offset + fs.broad_amp * broad.at(r, c) +
                               fs.fine_amp * fine.at(r, c);
                    if (fs.clamp_nonneg) v = std::max(v, 0.0);
                    p[r * cols + c] = static_cast<float>(v);
                }
        } else {
            for (std::int64_t t = 0; t < params.n_days; ++t) {
                if (t > 0) {
                    broad.advance();
                    fine.advance();
                }
                double season = fs.season_amp * season_of(params.start_date + t);
                float* p = cube.dynamic_plane(static_cast<std::int64_t>(vi), t);
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t c = 0; c < cols; ++c) {
                        double v = fs.offset + season + fs.broad_amp * broad.at(r, c) +
                                   fs.fine_amp * fine.at(r, c);
                        if (fs.clamp_nonneg) v = std::max(v, 0.0);
                        p[r * cols + c] = static_cast<float>(v);
                    }
            }
        }
    }

    // move satellite variables into the causal position the models see
    shift_satellite_forward(cube);

    const std::int64_t v_t2m = schema.require("t2m_max");
    const std::int64_t v_wind = schema.require("wind_u_max");
    const std::int64_t v_ndvi = schema.require("ndvi");
    const std::int64_t v_precip = schema.require("precip_max");
    const std::int64_t v_elev = schema.require("elevation");
    const float* elev = cube.static_plane(v_elev);

    // neighborhood NDVI means for every day an ignition can look at
    const std::int64_t t_first = 11;  // earliest day with a full causal window
    std::vector<float> ndvi_nbhd(static_cast<std::size_t>(params.n_days * plane), 0.0f);
    for (std::int64_t t = t_first - 1; t < params.n_days - 1; ++t)
        nbhd5_mean(cube.dynamic_plane(v_ndvi, t), rows, cols, ndvi_nbhd.data() + t * plane);

    enum Term { T_t2m, T_wind, T_ndvi, T_precip, T_elev, T_trend, T_nbhd, T_count };
    auto eval_terms = [&](std::int64_t t, std::int64_t r, std::int64_t c, double* term) {
        std::int64_t i = r * cols + c;
        term[T_t2m] = cube.dynamic_plane(v_t2m, t - 1)[i];
        term[T_wind] = cube.dynamic_plane(v_wind, t - 1)[i];
        term[T_ndvi] = cube.dynamic_plane(v_ndvi, t - 1)[i];
        term[T_precip] = cube.dynamic_plane(v_precip, t - 1)[i];
        term[T_elev] = elev[i];
        double recent = 0.0, earlier = 0.0;
        for (std::int64_t k = 2; k <= 4; ++k) recent += cube.dynamic_plane(v_t2m, t - k)[i];
        for (std::int64_t k = 5; k <= 9; ++k) earlier += cube.dynamic_plane(v_t2m, t - k)[i];
        term[T_trend] = recent / 3.0 - earlier / 5.0;
        term[T_nbhd] = ndvi_nbhd[(t - 1) * plane + i] - term[T_ndvi];
    };

    // standardize each term over all candidate cell-days
    double sum[T_count] = {}, sumsq[T_count] = {};
    double n_cand = 0.0;
    for (std::int64_t t = t_first; t < params.n_days; ++t)
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t c = 0; c < cols; ++c) {
                double term[T_count];
                eval_terms(t, r, c, term);
                for (int k = 0; k < T_count; ++k) {
                    sum[k] += term[k];
                    sumsq[k] += term[k] * term[k];
                }
                n_cand += 1.0;
            }
    TermStats stats[T_count];
    for (int k = 0; k < T_count; ++k) stats[k] = finish(sum[k], sumsq[k], n_cand);

    const FireProcess& fire = params.fire;
    const double beta[T_count] = {fire.direct_t2m, fire.direct_wind,  fire.direct_ndvi,
                                  fire.direct_precip, fire.direct_elev, fire.trend_t2m,
                                  fire.nbhd_ndvi};

    // ignition pass: one uniform draw per cell-day, fixed order
    RngStream ignite = root.split("ignite");
    RngStream event_rng = root.split("events");
    RngStream det_rng = root.split("detections");
    std::int64_t event_counter = 0;
    std::vector<std::uint8_t> visited(static_cast<std::size_t>(plane));
    for (std::int64_t t = t_first; t < params.n_days; ++t) {
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t c = 0; c < cols; ++c) {
                double u = ignite.next_double();
                if (fire.rate <= 0.0) continue;
                double term[T_count];
                eval_terms(t, r, c, term);
                double z = fire.intercept;
                for (int k = 0; k < T_count; ++k)
                    z += beta[k] * (term[k] - stats[k].mean) * stats[k].inv_std;
                double p = fire.rate * kernels::sigmoid(z);
                if (u >= p) continue;

                // grow a random connected blob around the ignition cell
                RngStream es = event_rng.split(static_cast<std::uint64_t>(event_counter));
                std::int64_t want = fire.event_min_pixels +
                                    static_cast<std::int64_t>(es.next_below(
                                        static_cast<std::uint64_t>(fire.event_max_pixels -
                                                                   fire.event_min_pixels + 1)));
                std::fill(visited.begin(), visited.end(), 0);
                std::vector<std::pair<std::int32_t, std::int32_t>> pixels;
                std::vector<std::pair<std::int32_t, std::int32_t>> frontier;
                auto push = [&](std::int64_t pr, std::int64_t pc) {
                    if (pr < 0 || pr >= rows || pc < 0 || pc >= cols) return;
                    if (visited[pr * cols + pc]) return;
                    visited[pr * cols + pc] = 1;
                    frontier.emplace_back(static_cast<std::int32_t>(pr),
                                          static_cast<std::int32_t>(pc));
                };
                push(r, c);
                while (!frontier.empty() && static_cast<std::int64_t>(pixels.size()) < want) {
                    std::size_t pick = static_cast<std::size_t>(
                        es.next_below(static_cast<std::uint64_t>(frontier.size())));
                    auto [pr, pc] = frontier[pick];
                    frontier[pick] = frontier.back();
                    frontier.pop_back();
                    pixels.emplace_back(pr, pc);
                    push(pr - 1, pc);
                    push(pr + 1, pc);
                    push(pr, pc - 1);
                    push(pr, pc + 1);
                }

                FireEvent ev;
                ev.event_id = ++event_counter;
                ev.pixels = std::move(pixels);
                ev.start_date = params.start_date + t;
                ev.area_ha = static_cast<double>(ev.pixels.size()) * 100.0;
                // detections inside the perimeter, earliest on the start date
                std::int64_t n_det = 1 + static_cast<std::int64_t>(det_rng.next_below(3));
                for (std::int64_t d = 0; d < n_det; ++d) {
                    auto [pr, pc] = ev.pixels[static_cast<std::size_t>(
                        det_rng.next_below(static_cast<std::uint64_t>(ev.pixels.size())))];
                    ActiveFireDetection det;
                    det.row = pr;
                    det.col = pc;
                    det.date = ev.start_date + (d == 0 ? 0 : static_cast<std::int64_t>(
                                                                 det_rng.next_below(2)));
                    if (!cube.contains_date(det.date)) det.date = ev.start_date;
                    det.confidence = 0.5 + 0.5 * det_rng.next_double();
                    out.detections.push_back(det);
                }
                out.events.push_back(std::move(ev));
            }
    }

    out.rasterize_report = rasterize_targets(cube, out.events);
    return out;
}

}  // namespace pyrocast
