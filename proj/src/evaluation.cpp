#include "pyrocast/evaluation.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "pyrocast/binio.hpp"
#include "pyrocast/png.hpp"

namespace pyrocast {

namespace {
constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();
}

EvalResult evaluate(const SampleSource& samples, const Scorer& scorer, double threshold,
                    std::ostream* score_lines) {
    if (samples.size() == 0) throw parameter_error("evaluation set is empty");
    if (samples.dims() != scorer.dims)
        throw schema_error("sample payload shape does not match the model input");

    const std::int64_t n = samples.size();
    EvalResult res;
    res.scores.resize(static_cast<std::size_t>(n));
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(n));
    parallel_for(n, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<float> buf(static_cast<std::size_t>(samples.payload_size()));
        for (std::int64_t i = lo; i < hi; ++i) {
            samples.fetch(i, buf.data());
            res.scores[static_cast<std::size_t>(i)] = scorer.score(buf.data());
            labels[static_cast<std::size_t>(i)] = samples.key(i).label;
        }
    });

    if (score_lines) {
        for (std::int64_t i = 0; i < n; ++i) {
            const SampleKey& k = samples.key(i);
            nlohmann::json line = {{"row", k.row},
                                   {"col", k.col},
                                   {"date", k.target_date.to_string()},
                                   {"score", res.scores[static_cast<std::size_t>(i)]},
                                   {"label", static_cast<int>(k.label)}};
            *score_lines << line.dump() << '\n';
        }
    }
    res.report = full_metrics(res.scores, labels, threshold);
    return res;
}

void DangerMap::validate() const {
    grid.validate();
    if (static_cast<std::int64_t>(scores.size()) != grid.n_rows * grid.n_cols)
        throw grid_error("danger map has " + std::to_string(scores.size()) +
                         " scores for a " + std::to_string(grid.n_rows) + "x" +
                         std::to_string(grid.n_cols) + " grid");
    for (float v : scores)
        if (!std::isnan(v) && (v < 0.0f || v > 1.0f))
            throw state_error("danger score " + std::to_string(v) + " outside [0,1]");
}

DangerMap render_map(const Datacube& cube, Modality m, Date date, const Standardization* stats,
                     const Scorer& scorer) {
    const std::int64_t off = date - cube.start_date();
    if (off < kWindowDays || off >= cube.n_days())
        throw bounds_error("no full 10-day input window for " + date.to_string() +
                           " in a cube spanning " + cube.start_date().to_string() + " to " +
                           cube.end_date().to_string());

    const Schema& s = cube.schema();
    const auto raw_dims = modality_dims(m, static_cast<std::int64_t>(s.input_features().size()),
                                        static_cast<std::int64_t>(s.dynamic_inputs().size()));
    std::vector<std::int64_t> fed_dims = raw_dims;
    if (stats) {
        if (stats->modality != m)
            throw parameter_error("standardization fitted for modality '" +
                                  to_string(stats->modality) + "' used to render '" +
                                  to_string(m) + "'");
        std::size_t channel_axis = (m == Modality::pixel || m == Modality::spatial) ? 0 : 1;
        fed_dims[channel_axis] -= static_cast<std::int64_t>(stats->dropped.size());
    }
    if (fed_dims != scorer.dims)
        throw schema_error("rendered payload shape does not match the model input");

    const std::int64_t rows = cube.grid().n_rows, cols = cube.grid().n_cols;
    DangerMap map{cube.grid(), date, std::vector<float>(static_cast<std::size_t>(rows * cols), kNaN), {}};
    parallel_for(rows, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<float> raw;
        for (std::int64_t r = lo; r < hi; ++r)
            for (std::int64_t c = 0; c < cols; ++c) {
                if (!extract_payload(cube, m, r, c, date, raw)) continue;
                const float* fed = raw.data();
                std::vector<float> level;
                if (stats) {
                    level = standardize_one(*stats, m, raw_dims, raw.data());
                    fed = level.data();
                }
                map.scores[static_cast<std::size_t>(r * cols + c)] =
                    static_cast<float>(scorer.score(fed));
            }
    });
    return map;
}

void save_map(const std::string& path, const DangerMap& map) {
    map.validate();
    nlohmann::json header = {{"format", "PFC1"},
                             {"kind", "danger_map"},
                             {"grid", map.grid.to_json()},
                             {"date", map.date.to_string()},
                             {"variable", "fire_danger"},
                             {"array_order", "[row,col] row-major float32"},
                             {"provenance", map.provenance}};
    auto os = binio::open_out(path);
    binio::write_header(os, "PFC1", header);
    binio::write_array(os, map.scores.data(), map.scores.size());
    if (!os) throw runtime_failure("failed writing danger map to '" + path + "'");
}

DangerMap load_map(const std::string& path) {
    auto is = binio::open_in(path);
    nlohmann::json header = binio::read_header(is, "PFC1");
    if (header.value("kind", "") != "danger_map")
        throw format_error("'" + path + "' is not a danger-map file");
    DangerMap map;
    try {
        map.grid = GridSpec::from_json(header.at("grid"));
        map.date = Date::parse(header.at("date").get<std::string>());
        if (header.contains("provenance")) map.provenance = header.at("provenance");
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("malformed danger-map header: ") + e.what());
    }
    map.grid.validate();
    map.scores.resize(static_cast<std::size_t>(map.grid.n_rows * map.grid.n_cols));
    binio::read_array(is, map.scores.data(), map.scores.size());
    char extra;
    if (is.read(&extra, 1))
        throw format_error("danger-map payload longer than the header declares");
    return map;
}

const std::array<std::array<std::uint8_t, 3>, 256>& danger_colormap() {
    static const auto table = [] {
        // piecewise-linear ramp through the familiar danger-class hues
        constexpr double stop[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
        constexpr int hue[5][3] = {
            {23, 60, 165}, {72, 170, 221}, {247, 227, 90}, {232, 114, 34}, {128, 15, 15}};
        std::array<std::array<std::uint8_t, 3>, 256> t{};
        for (int i = 0; i < 256; ++i) {
            double x = i / 255.0;
            int s = 0;
            while (s < 3 && x > stop[s + 1]) ++s;
            double f = (x - stop[s]) / (stop[s + 1] - stop[s]);
            for (int ch = 0; ch < 3; ++ch)
                t[static_cast<std::size_t>(i)][static_cast<std::size_t>(ch)] =
                    static_cast<std::uint8_t>(
                        std::lround(hue[s][ch] + f * (hue[s + 1][ch] - hue[s][ch])));
        }
        return t;
    }();
    return table;
}

void write_map_png(const std::string& path, const DangerMap& map) {
    map.validate();
    const auto& cm = danger_colormap();
    const std::int64_t rows = map.grid.n_rows, cols = map.grid.n_cols;
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(rows * cols * 3));
    for (std::int64_t i = 0; i < rows * cols; ++i) {
        float v = map.scores[static_cast<std::size_t>(i)];
        std::uint8_t* px = rgb.data() + i * 3;
        if (std::isnan(v)) {
            px[0] = px[1] = px[2] = 128;
        } else {
            auto idx = static_cast<std::size_t>(std::lround(v * 255.0f));
            px[0] = cm[idx][0];
            px[1] = cm[idx][1];
            px[2] = cm[idx][2];
        }
    }
    write_png_rgb(path, rgb.data(), cols, rows);
}

}  // namespace pyrocast
