#include "pyrocast/datacube.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pyrocast/binio.hpp"

namespace pyrocast {

namespace {
constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();
}

nlohmann::json FireEvent::to_json() const {
    nlohmann::json px = nlohmann::json::array();
    for (auto [r, c] : pixels) px.push_back({r, c});
    return {{"event_id", event_id},
            {"pixels", px},
            {"start_date", start_date.to_string()},
            {"area_ha", area_ha}};
}

FireEvent FireEvent::from_json(const nlohmann::json& j) {
    FireEvent e;
    try {
        e.event_id = j.at("event_id").get<std::int64_t>();
        for (const auto& p : j.at("pixels"))
            e.pixels.emplace_back(p.at(0).get<std::int32_t>(), p.at(1).get<std::int32_t>());
        e.start_date = Date::parse(j.at("start_date").get<std::string>());
        e.area_ha = j.at("area_ha").get<double>();
    } catch (const nlohmann::json::exception& ex) {
        throw format_error(std::string("malformed fire event: ") + ex.what());
    }
    return e;
}

nlohmann::json ActiveFireDetection::to_json() const {
    return {{"row", row}, {"col", col}, {"date", date.to_string()}, {"confidence", confidence}};
}

ActiveFireDetection ActiveFireDetection::from_json(const nlohmann::json& j) {
    ActiveFireDetection d;
    try {
        d.row = j.at("row").get<std::int32_t>();
        d.col = j.at("col").get<std::int32_t>();
        d.date = Date::parse(j.at("date").get<std::string>());
        d.confidence = j.at("confidence").get<double>();
    } catch (const nlohmann::json::exception& ex) {
        throw format_error(std::string("malformed detection: ") + ex.what());
    }
    return d;
}

Datacube::Datacube(GridSpec grid, Schema schema, Date start_date, std::int64_t n_days)
    : grid_(std::move(grid)), schema_(std::move(schema)), start_(start_date), n_days_(n_days) {
    grid_.validate();
    schema_.validate();
    if (n_days_ <= 0) throw parameter_error("datacube needs at least one day");
    data_.resize(schema_.vars.size());
    const std::int64_t plane = plane_size();
    for (std::size_t v = 0; v < schema_.vars.size(); ++v) {
        std::int64_t n = schema_.vars[v].kind == VarKind::dynamic ? plane * n_days_ : plane;
        data_[v].assign(static_cast<std::size_t>(n), kNaN);
    }
}

std::int64_t Datacube::day_index(Date d) const {
    if (!contains_date(d))
        throw bounds_error("date " + d.to_string() + " outside cube range " + start_.to_string() +
                           ".." + end_date().to_string());
    return d - start_;
}

float* Datacube::dynamic_plane(std::int64_t var, std::int64_t t) {
    if (schema_.vars.at(var).kind != VarKind::dynamic)
        throw schema_error("variable '" + schema_.vars[var].name + "' is not dynamic");
    if (t < 0 || t >= n_days_) throw bounds_error("day index out of range");
    return data_[var].data() + t * plane_size();
}

const float* Datacube::dynamic_plane(std::int64_t var, std::int64_t t) const {
    return const_cast<Datacube*>(this)->dynamic_plane(var, t);
}

float* Datacube::static_plane(std::int64_t var) {
    if (schema_.vars.at(var).kind != VarKind::static_)
        throw schema_error("variable '" + schema_.vars[var].name + "' is not static");
    return data_[var].data();
}

const float* Datacube::static_plane(std::int64_t var) const {
    return const_cast<Datacube*>(this)->static_plane(var);
}

nlohmann::json Datacube::header_json() const {
    return {{"format", "PFC1"},
            {"grid", grid_.to_json()},
            {"schema", schema_.to_json()},
            {"schema_hash", to_hex(schema_.hash())},
            {"start_date", start_.to_string()},
            {"end_date", end_date().to_string()},
            {"n_days", n_days_},
            {"array_order", "dynamic [time,row,col] row-major; static [row,col]"},
            {"satellite_shifted", satellite_shifted_},
            {"seed", seed_},
            {"provenance", provenance_}};
}

void shift_satellite_forward(Datacube& cube) {
    if (cube.satellite_shifted())
        throw state_error("satellite variables are already shifted in this cube");
    const std::int64_t plane = cube.plane_size();
    for (std::size_t v = 0; v < cube.schema().vars.size(); ++v) {
        if (!cube.schema().vars[v].shift_forward) continue;
        auto& data = cube.raw(static_cast<std::int64_t>(v));
        for (std::int64_t t = cube.n_days() - 1; t >= 1; --t)
            std::copy(data.begin() + (t - 1) * plane, data.begin() + t * plane,
                      data.begin() + t * plane);
        std::fill(data.begin(), data.begin() + plane, kNaN);
    }
    cube.set_satellite_shifted(true);
}

StartDateResult assign_fire_start_dates(const std::vector<PerimeterCandidate>& perimeters,
                                        const std::vector<ActiveFireDetection>& detections) {
    StartDateResult out;
    for (const auto& p : perimeters) {
        if (p.pixels.empty()) {
            out.rejections.push_back({p.event_id, "empty perimeter"});
            continue;
        }
        std::vector<std::pair<std::int32_t, std::int32_t>> sorted_pixels = p.pixels;
        std::sort(sorted_pixels.begin(), sorted_pixels.end());
        bool found = false;
        Date earliest;
        for (const auto& d : detections) {
            if (d.date < p.window_start || d.date > p.window_end) continue;
            if (!std::binary_search(sorted_pixels.begin(), sorted_pixels.end(),
                                    std::make_pair(d.row, d.col)))
                continue;
            if (!found || d.date < earliest) {
                earliest = d.date;
                found = true;
            }
        }
        if (!found) {
            out.rejections.push_back({p.event_id, "no active-fire detection inside perimeter"});
            continue;
        }
        FireEvent e;
        e.event_id = p.event_id;
        e.pixels = p.pixels;
        e.start_date = earliest;
        e.area_ha = p.area_ha;
        out.events.push_back(std::move(e));
    }
    return out;
}

RasterizeReport rasterize_targets(Datacube& cube, const std::vector<FireEvent>& events) {
    const std::int64_t target = cube.schema().target_index();
    const std::int64_t plane = cube.plane_size();
    auto& data = cube.raw(target);
    std::fill(data.begin(), data.end(), 0.0f);
    RasterizeReport rep;
    for (const auto& e : events) {
        std::int64_t t = cube.day_index(e.start_date);
        float* layer = data.data() + t * plane;
        for (auto [r, c] : e.pixels) {
            if (r < 0 || r >= cube.grid().n_rows || c < 0 || c >= cube.grid().n_cols)
                throw bounds_error("event " + std::to_string(e.event_id) +
                                   " has pixels outside the grid");
            float& cell = layer[static_cast<std::int64_t>(r) * cube.grid().n_cols + c];
            if (cell == 1.0f) {
                rep.overlap_collisions++;
            } else {
                cell = 1.0f;
                rep.labeled_pixels++;
            }
        }
    }
    return rep;
}

void save_cube(const std::string& path, const Datacube& cube) {
    auto os = binio::open_out(path);
    binio::write_header(os, "PFC1", cube.header_json());
    for (std::size_t v = 0; v < cube.schema().vars.size(); ++v) {
        const auto& block = cube.raw(static_cast<std::int64_t>(v));
        binio::write_array(os, block.data(), block.size());
    }
    if (!os) throw runtime_failure("failed writing cube to '" + path + "'");
}

Datacube load_cube(const std::string& path) {
    auto is = binio::open_in(path);
    nlohmann::json header = binio::read_header(is, "PFC1");
    GridSpec grid;
    Schema schema;
    Date start;
    std::int64_t n_days = 0;
    try {
        grid = GridSpec::from_json(header.at("grid"));
        schema = Schema::from_json(header.at("schema"));
        start = Date::parse(header.at("start_date").get<std::string>());
        n_days = header.at("n_days").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("malformed cube header: ") + e.what());
    }
    Datacube cube(grid, schema, start, n_days);
    cube.set_satellite_shifted(header.value("satellite_shifted", false));
    cube.set_seed(header.value("seed", std::uint64_t(0)));
    if (header.contains("provenance")) cube.set_provenance(header.at("provenance"));
    for (std::size_t v = 0; v < schema.vars.size(); ++v) {
        auto& block = cube.raw(static_cast<std::int64_t>(v));
        std::size_t before = static_cast<std::size_t>(is.tellg());
        try {
            binio::read_array(is, block.data(), block.size());
        } catch (const format_error&) {
            throw format_error("cube payload truncated in variable '" + schema.vars[v].name +
                               "' at byte offset " + std::to_string(before));
        }
    }
    char extra;
    if (is.read(&extra, 1))
        throw format_error("cube payload longer than the header declares (trailing bytes at " +
                           std::to_string(static_cast<std::int64_t>(is.tellg()) - 1) + ")");
    return cube;
}

void save_events(const std::string& path, const std::vector<FireEvent>& events) {
    auto os = binio::open_out(path);
    for (const auto& e : events) os << e.to_json().dump() << "\n";
    if (!os) throw runtime_failure("failed writing events to '" + path + "'");
}

std::vector<FireEvent> load_events(const std::string& path) {
    auto is = binio::open_in(path);
    std::vector<FireEvent> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(FireEvent::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& e) {
            throw format_error("bad event line " + std::to_string(out.size() + 1) + ": " +
                               e.what());
        }
    }
    return out;
}

void save_detections(const std::string& path, const std::vector<ActiveFireDetection>& dets) {
    auto os = binio::open_out(path);
    for (const auto& d : dets) os << d.to_json().dump() << "\n";
    if (!os) throw runtime_failure("failed writing detections to '" + path + "'");
}

std::vector<ActiveFireDetection> load_detections(const std::string& path) {
    auto is = binio::open_in(path);
    std::vector<ActiveFireDetection> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(ActiveFireDetection::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& e) {
            throw format_error("bad detection line " + std::to_string(out.size() + 1) + ": " +
                               e.what());
        }
    }
    return out;
}

}  // namespace pyrocast
