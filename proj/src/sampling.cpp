#include "pyrocast/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <unordered_set>

#include "pyrocast/binio.hpp"

namespace pyrocast {

std::string to_string(Modality m) {
    switch (m) {
        case Modality::pixel: return "pixel";
        case Modality::temporal: return "temporal";
        case Modality::spatial: return "spatial";
        case Modality::spatiotemporal: return "spatiotemporal";
    }
    return "?";
}

Modality modality_from(const std::string& s) {
    if (s == "pixel") return Modality::pixel;
    if (s == "temporal") return Modality::temporal;
    if (s == "spatial") return Modality::spatial;
    if (s == "spatiotemporal") return Modality::spatiotemporal;
    throw config_error("unknown modality '" + s + "'");
}

std::vector<std::int64_t> modality_dims(Modality m, std::int64_t n_features,
                                        std::int64_t n_dynamic, std::int64_t days,
                                        std::int64_t patch) {
    switch (m) {
        case Modality::pixel: return {n_features + n_dynamic};
        case Modality::temporal: return {days, n_features};
        case Modality::spatial: return {n_features, patch, patch};
        case Modality::spatiotemporal: return {days, n_features, patch, patch};
    }
    throw parameter_error("bad modality");
}

namespace {

std::int64_t clampi(std::int64_t v, std::int64_t lo, std::int64_t hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

struct WindowContext {
    const Datacube& cube;
    std::vector<std::int64_t> dyn;
    std::vector<std::int64_t> stat;
    std::int64_t t;  // day index of target_date; window covers t-10..t-1

    WindowContext(const Datacube& c, std::int64_t row, std::int64_t col, Date target)
        : cube(c), dyn(c.schema().dynamic_inputs()), stat(c.schema().static_inputs()) {
        if (row < 0 || row >= c.grid().n_rows || col < 0 || col >= c.grid().n_cols)
            throw bounds_error("sample cell outside the grid");
        t = c.day_index(target);
        if (t < kWindowDays)
            throw bounds_error("target date " + target.to_string() +
                               " has no full input window");
    }
};

}  // namespace

bool extract_pixel(const Datacube& cube, std::int64_t row, std::int64_t col, Date target,
                   std::vector<float>& out) {
    WindowContext w(cube, row, col, target);
    out.resize(w.dyn.size() + w.stat.size() + w.dyn.size());
    std::size_t k = 0;
    bool ok = true;
    for (std::int64_t v : w.dyn) {
        float x = cube.dyn_at(v, w.t - 1, row, col);
        ok &= !std::isnan(x);
        out[k++] = x;
    }
    for (std::int64_t v : w.stat) {
        float x = cube.stat_at(v, row, col);
        ok &= !std::isnan(x);
        out[k++] = x;
    }
    for (std::int64_t v : w.dyn) {
        double acc = 0;
        for (std::int64_t d = 1; d <= kWindowDays; ++d) {
            float x = cube.dyn_at(v, w.t - d, row, col);
            ok &= !std::isnan(x);
            acc += x;
        }
        out[k++] = static_cast<float>(acc / kWindowDays);
    }
    return ok;
}

bool extract_temporal(const Datacube& cube, std::int64_t row, std::int64_t col, Date target,
                      std::vector<float>& out) {
    WindowContext w(cube, row, col, target);
    const std::int64_t nf = static_cast<std::int64_t>(w.dyn.size() + w.stat.size());
    out.resize(kWindowDays * nf);
    bool ok = true;
    for (std::int64_t d = 0; d < kWindowDays; ++d) {
        std::int64_t day = w.t - kWindowDays + d;
        float* rowp = out.data() + d * nf;
        std::size_t k = 0;
        for (std::int64_t v : w.dyn) {
            float x = cube.dyn_at(v, day, row, col);
            ok &= !std::isnan(x);
            rowp[k++] = x;
        }
        for (std::int64_t v : w.stat) {
            float x = cube.stat_at(v, row, col);
            ok &= !std::isnan(x);
            rowp[k++] = x;
        }
    }
    return ok;
}

namespace {

// one feature plane of a clamp-padded patch
bool copy_patch(const float* plane, std::int64_t rows, std::int64_t cols, std::int64_t row,
                std::int64_t col, float* out) {
    bool ok = true;
    const std::int64_t half = kPatch / 2;
    for (std::int64_t dr = -half; dr <= half; ++dr) {
        std::int64_t r = clampi(row + dr, 0, rows - 1);
        for (std::int64_t dc = -half; dc <= half; ++dc) {
            std::int64_t c = clampi(col + dc, 0, cols - 1);
            float x = plane[r * cols + c];
            ok &= !std::isnan(x);
            *out++ = x;
        }
    }
    return ok;
}

}  // namespace

bool extract_spatial(const Datacube& cube, std::int64_t row, std::int64_t col, Date target,
                     std::vector<float>& out) {
    WindowContext w(cube, row, col, target);
    const std::int64_t nf = static_cast<std::int64_t>(w.dyn.size() + w.stat.size());
    const std::int64_t cell = kPatch * kPatch;
    out.resize(nf * cell);
    const GridSpec& g = cube.grid();
    bool ok = true;
    std::size_t k = 0;
    for (std::int64_t v : w.dyn)
        ok &= copy_patch(cube.dynamic_plane(v, w.t - 1), g.n_rows, g.n_cols, row, col,
                         out.data() + cell * k++);
    for (std::int64_t v : w.stat)
        ok &= copy_patch(cube.static_plane(v), g.n_rows, g.n_cols, row, col,
                         out.data() + cell * k++);
    return ok;
}

bool extract_spatiotemporal(const Datacube& cube, std::int64_t row, std::int64_t col,
                            Date target, std::vector<float>& out) {
    WindowContext w(cube, row, col, target);
    const std::int64_t nf = static_cast<std::int64_t>(w.dyn.size() + w.stat.size());
    const std::int64_t cell = kPatch * kPatch;
    out.resize(kWindowDays * nf * cell);
    const GridSpec& g = cube.grid();
    bool ok = true;
    for (std::int64_t d = 0; d < kWindowDays; ++d) {
        std::int64_t day = w.t - kWindowDays + d;
        float* base = out.data() + d * nf * cell;
        std::size_t k = 0;
        for (std::int64_t v : w.dyn)
            ok &= copy_patch(cube.dynamic_plane(v, day), g.n_rows, g.n_cols, row, col,
                             base + cell * k++);
        for (std::int64_t v : w.stat)
            ok &= copy_patch(cube.static_plane(v), g.n_rows, g.n_cols, row, col,
                             base + cell * k++);
    }
    return ok;
}

bool extract_payload(const Datacube& cube, Modality m, std::int64_t row, std::int64_t col,
                     Date target, std::vector<float>& out) {
    switch (m) {
        case Modality::pixel: return extract_pixel(cube, row, col, target, out);
        case Modality::temporal: return extract_temporal(cube, row, col, target, out);
        case Modality::spatial: return extract_spatial(cube, row, col, target, out);
        case Modality::spatiotemporal:
            return extract_spatiotemporal(cube, row, col, target, out);
    }
    throw parameter_error("bad modality");
}

namespace {

std::uint8_t landcover_at(const Datacube& cube, std::int64_t row, std::int64_t col) {
    float v = cube.stat_at(cube.schema().stratifier_index(), row, col);
    if (std::isnan(v) || v < 0 || v > 255)
        throw schema_error("land-cover layer holds a value unusable as a class code");
    return static_cast<std::uint8_t>(v);
}

}  // namespace

std::vector<SampleKey> collect_positives(const Datacube& cube,
                                         std::vector<SampleKey>* rejected) {
    const std::int64_t target = cube.schema().target_index();
    const GridSpec& g = cube.grid();
    std::vector<SampleKey> out;
    std::vector<float> probe;
    for (std::int64_t t = kWindowDays; t < cube.n_days(); ++t) {
        const float* plane = cube.dynamic_plane(target, t);
        for (std::int64_t r = 0; r < g.n_rows; ++r)
            for (std::int64_t c = 0; c < g.n_cols; ++c)
                if (plane[r * g.n_cols + c] == 1.0f) {
                    SampleKey k;
                    k.row = static_cast<std::int32_t>(r);
                    k.col = static_cast<std::int32_t>(c);
                    k.target_date = cube.start_date() + t;
                    k.label = 1;
                    k.landcover = landcover_at(cube, r, c);
                    // the widest window gates the plan so every modality can
                    // materialize the same keys
                    if (extract_spatiotemporal(cube, r, c, k.target_date, probe))
                        out.push_back(k);
                    else if (rejected)
                        rejected->push_back(k);
                }
    }
    return out;
}

std::vector<SampleKey> sample_negatives(const Datacube& cube,
                                        const std::vector<SampleKey>& positives,
                                        const SamplingConfig& config, RngStream rng,
                                        NegativeSamplingReport* report) {
    if (config.ratio < 0) throw parameter_error("negative ratio must be nonnegative");
    const std::int64_t target = cube.schema().target_index();
    const GridSpec& g = cube.grid();
    const std::int64_t plane = cube.plane_size();

    // candidate days: either days with zero fire pixels region-wide, or all
    std::vector<std::int64_t> days;
    for (std::int64_t t = kWindowDays; t < cube.n_days(); ++t) {
        if (config.pixel_level_negatives) {
            days.push_back(t);
            continue;
        }
        const float* p = cube.dynamic_plane(target, t);
        bool any = false;
        for (std::int64_t i = 0; i < plane && !any; ++i) any = p[i] == 1.0f;
        if (!any) days.push_back(t);
    }

    // class histogram of the positives, ascending class order
    std::map<std::uint8_t, std::int64_t> histogram;
    for (const auto& k : positives) histogram[k.landcover]++;

    // cells per land-cover class
    std::map<std::uint8_t, std::vector<std::int64_t>> class_cells;
    for (std::int64_t r = 0; r < g.n_rows; ++r)
        for (std::int64_t c = 0; c < g.n_cols; ++c) {
            std::uint8_t lc = landcover_at(cube, r, c);
            if (histogram.count(lc)) class_cells[lc].push_back(r * g.n_cols + c);
        }

    NegativeSamplingReport rep;
    rep.no_fire_days = static_cast<std::int64_t>(days.size());
    std::vector<SampleKey> out;
    std::vector<float> probe;
    for (const auto& [lc, p_c] : histogram) {
        NegativeSamplingReport::ClassLine line;
        line.landcover = lc;
        line.positives = p_c;
        line.requested = std::llround(config.ratio * static_cast<double>(p_c));
        const auto& cells = class_cells[lc];
        const std::int64_t pool =
            static_cast<std::int64_t>(days.size()) * static_cast<std::int64_t>(cells.size());
        RngStream cs = rng.split("class").split(lc);
        std::unordered_set<std::int64_t> used;
        while (line.drawn < line.requested &&
               static_cast<std::int64_t>(used.size()) < pool) {
            std::int64_t pick = static_cast<std::int64_t>(
                cs.next_below(static_cast<std::uint64_t>(pool)));
            if (!used.insert(pick).second) continue;
            std::int64_t t = days[static_cast<std::size_t>(pick / cells.size())];
            std::int64_t cell = cells[static_cast<std::size_t>(pick % cells.size())];
            std::int64_t r = cell / g.n_cols, c = cell % g.n_cols;
            if (cube.dyn_at(target, t, r, c) != 0.0f) continue;  // burning elsewhere-day path
            if (!extract_spatiotemporal(cube, r, c, cube.start_date() + t, probe)) {
                rep.nan_rejected++;
                continue;
            }
            SampleKey k;
            k.row = static_cast<std::int32_t>(r);
            k.col = static_cast<std::int32_t>(c);
            k.target_date = cube.start_date() + t;
            k.label = 0;
            k.landcover = lc;
            out.push_back(k);
            line.drawn++;
        }
        rep.classes.push_back(line);
    }
    if (report) *report = rep;
    return out;
}

void SplitConfig::validate() const {
    auto overlap = [](const std::vector<int>& a, const std::vector<int>& b) {
        for (int x : a)
            for (int y : b)
                if (x == y) return true;
        return false;
    };
    if (overlap(train_years, validation_years) || overlap(train_years, test_years) ||
        overlap(validation_years, test_years))
        throw config_error("train/validation/test years overlap");
}

nlohmann::json SplitConfig::to_json() const {
    return {{"train_years", train_years},
            {"validation_years", validation_years},
            {"test_years", test_years}};
}

SplitConfig SplitConfig::from_json(const nlohmann::json& j) {
    SplitConfig c;
    try {
        c.train_years = j.at("train_years").get<std::vector<int>>();
        c.validation_years = j.at("validation_years").get<std::vector<int>>();
        c.test_years = j.at("test_years").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("malformed split config: ") + e.what());
    }
    c.validate();
    return c;
}

SplitKeys split_by_time(const std::vector<SampleKey>& keys, const SplitConfig& config) {
    config.validate();
    auto contains = [](const std::vector<int>& ys, int y) {
        return std::find(ys.begin(), ys.end(), y) != ys.end();
    };
    SplitKeys out;
    for (const auto& k : keys) {
        int y = k.target_date.year();
        if (contains(config.train_years, y))
            out.train.push_back(k);
        else if (contains(config.validation_years, y))
            out.validation.push_back(k);
        else if (contains(config.test_years, y))
            out.test.push_back(k);
        else
            out.dropped++;
    }
    return out;
}

std::int64_t SampleSet::payload_size() const {
    std::int64_t n = 1;
    for (std::int64_t d : dims) n *= d;
    return n;
}

void SampleSet::validate() const {
    if (keys.size() != payloads.size())
        throw dimension_error("sample set keys and payloads out of step");
    const std::int64_t n = payload_size();
    for (const auto& p : payloads)
        if (static_cast<std::int64_t>(p.size()) != n)
            throw dimension_error("sample payload does not match the declared dims");
}

SampleSet build_sample_set(const Datacube& cube, Modality m,
                           const std::vector<SampleKey>& keys) {
    const Schema& s = cube.schema();
    SampleSet set;
    set.modality = m;
    set.dims = modality_dims(m, static_cast<std::int64_t>(s.input_features().size()),
                             static_cast<std::int64_t>(s.dynamic_inputs().size()));
    set.schema_hash = s.hash();
    set.cube_start = cube.start_date();
    set.seed = cube.seed();
    set.keys = keys;
    set.payloads.resize(keys.size());
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const SampleKey& k = keys[i];
        if (!extract_payload(cube, m, k.row, k.col, k.target_date, set.payloads[i]))
            throw state_error("NaN payload for a pre-screened sample at (" +
                              std::to_string(k.row) + "," + std::to_string(k.col) + ") " +
                              k.target_date.to_string());
    }
    return set;
}

namespace {

// (channel count, repeat count) of the standardization layout: payloads are
// blocks of `channels` values repeated... pixel: 31 channels of 1 value;
// temporal: rows of nf; spatial/spatiotemporal: channel planes of patch cells
struct ChannelLayout {
    std::int64_t channels;
    std::int64_t inner;  // contiguous values per channel block
    std::int64_t outer;  // how many times the [channels, inner] block repeats
};

ChannelLayout layout_from(Modality m, const std::vector<std::int64_t>& d) {
    switch (m) {
        case Modality::pixel: return {d.at(0), 1, 1};
        case Modality::temporal: return {d.at(1), 1, d.at(0)};
        case Modality::spatial: return {d.at(0), d.at(1) * d.at(2), 1};
        case Modality::spatiotemporal: return {d.at(1), d.at(2) * d.at(3), d.at(0)};
    }
    throw parameter_error("bad modality");
}

ChannelLayout layout_of(const SampleSet& set) { return layout_from(set.modality, set.dims); }

}  // namespace

Standardization fit_standardization(const SampleSet& train) {
    train.validate();
    ChannelLayout lay = layout_of(train);
    std::vector<double> sum(static_cast<std::size_t>(lay.channels), 0.0);
    std::vector<double> sumsq(static_cast<std::size_t>(lay.channels), 0.0);
    double n = 0;
    for (const auto& p : train.payloads) {
        const float* x = p.data();
        for (std::int64_t o = 0; o < lay.outer; ++o)
            for (std::int64_t ch = 0; ch < lay.channels; ++ch)
                for (std::int64_t i = 0; i < lay.inner; ++i) {
                    double v = *x++;
                    sum[ch] += v;
                    sumsq[ch] += v * v;
                }
        n += static_cast<double>(lay.outer * lay.inner);
    }
    if (n == 0) throw parameter_error("cannot fit standardization on an empty training set");
    Standardization st;
    st.modality = train.modality;
    st.mean.resize(sum.size());
    st.stddev.resize(sum.size());
    for (std::size_t ch = 0; ch < sum.size(); ++ch) {
        st.mean[ch] = sum[ch] / n;
        double var = sumsq[ch] / n - st.mean[ch] * st.mean[ch];
        st.stddev[ch] = std::sqrt(std::max(var, 0.0));
        if (st.stddev[ch] <= 0.0) st.dropped.push_back(static_cast<std::int64_t>(ch));
    }
    return st;
}

namespace {

void standardize_payload(const Standardization& st, const ChannelLayout& lay,
                         const float* in, float* out) {
    std::vector<char> keep(static_cast<std::size_t>(lay.channels), 1);
    for (std::int64_t ch : st.dropped) keep[static_cast<std::size_t>(ch)] = 0;
    for (std::int64_t o = 0; o < lay.outer; ++o)
        for (std::int64_t ch = 0; ch < lay.channels; ++ch) {
            const float* src = in + (o * lay.channels + ch) * lay.inner;
            if (!keep[static_cast<std::size_t>(ch)]) continue;
            double mu = st.mean[static_cast<std::size_t>(ch)];
            double sd = st.stddev[static_cast<std::size_t>(ch)];
            for (std::int64_t i = 0; i < lay.inner; ++i)
                *out++ = static_cast<float>((src[i] - mu) / sd);
        }
}

std::vector<std::int64_t> dropped_dims(const std::vector<std::int64_t>& dims, Modality m,
                                       std::int64_t n_dropped) {
    std::vector<std::int64_t> d = dims;
    std::size_t axis = m == Modality::pixel ? 0 : (m == Modality::temporal ? 1 : 0);
    if (m == Modality::spatiotemporal) axis = 1;
    d[axis] -= n_dropped;
    if (d[axis] <= 0) throw parameter_error("standardization dropped every channel");
    return d;
}

}  // namespace

void apply_standardization(const Standardization& stats, SampleSet& set) {
    if (set.stats) throw state_error("sample set is already standardized");
    if (stats.modality != set.modality)
        throw parameter_error("standardization fitted for modality '" +
                              to_string(stats.modality) + "' applied to '" +
                              to_string(set.modality) + "'");
    ChannelLayout lay = layout_of(set);
    if (static_cast<std::int64_t>(stats.mean.size()) != lay.channels)
        throw dimension_error("standardization channel count does not match the payloads");
    auto new_dims = dropped_dims(set.dims, set.modality,
                                 static_cast<std::int64_t>(stats.dropped.size()));
    std::int64_t new_size = 1;
    for (auto d : new_dims) new_size *= d;
    for (auto& p : set.payloads) {
        std::vector<float> out(static_cast<std::size_t>(new_size));
        standardize_payload(stats, lay, p.data(), out.data());
        p = std::move(out);
    }
    set.dims = new_dims;
    set.stats = stats;
}

std::vector<float> standardize_one(const Standardization& stats, Modality m,
                                   const std::vector<std::int64_t>& raw_dims, const float* raw) {
    if (stats.modality != m)
        throw parameter_error("standardization fitted for modality '" + to_string(stats.modality) +
                              "' applied to '" + to_string(m) + "'");
    ChannelLayout lay = layout_from(m, raw_dims);
    if (static_cast<std::int64_t>(stats.mean.size()) != lay.channels)
        throw dimension_error("standardization channel count does not match the payload");
    auto out_dims = dropped_dims(raw_dims, m, static_cast<std::int64_t>(stats.dropped.size()));
    std::int64_t n = 1;
    for (auto d : out_dims) n *= d;
    std::vector<float> out(static_cast<std::size_t>(n));
    standardize_payload(stats, lay, raw, out.data());
    return out;
}

Standardization slice_standardization(const Standardization& pixel_stats, Modality m,
                                      std::int64_t n_features) {
    if (pixel_stats.modality != Modality::pixel)
        throw parameter_error("shared statistics must come from the pixel modality");
    if (static_cast<std::int64_t>(pixel_stats.mean.size()) < n_features)
        throw dimension_error("pixel statistics hold fewer channels than n_features");
    if (m == Modality::pixel) return pixel_stats;
    Standardization st;
    st.modality = m;
    st.mean.assign(pixel_stats.mean.begin(), pixel_stats.mean.begin() + n_features);
    st.stddev.assign(pixel_stats.stddev.begin(), pixel_stats.stddev.begin() + n_features);
    for (std::int64_t ch : pixel_stats.dropped)
        if (ch < n_features) st.dropped.push_back(ch);
    return st;
}

nlohmann::json Standardization::to_json() const {
    return {{"modality", to_string(modality)},
            {"mean", mean},
            {"stddev", stddev},
            {"dropped", dropped}};
}

Standardization Standardization::from_json(const nlohmann::json& j) {
    Standardization st;
    try {
        st.modality = modality_from(j.at("modality").get<std::string>());
        st.mean = j.at("mean").get<std::vector<double>>();
        st.stddev = j.at("stddev").get<std::vector<double>>();
        st.dropped = j.at("dropped").get<std::vector<std::int64_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("malformed standardization: ") + e.what());
    }
    return st;
}

namespace {

constexpr char kSampleMagic[] = "PFS1";

nlohmann::json sample_header(const SampleSet& set) {
    return {{"format", "PFS1"},
            {"modality", to_string(set.modality)},
            {"dims", set.dims},
            {"schema_hash", to_hex(set.schema_hash)},
            {"cube_start", set.cube_start.to_string()},
            {"seed", set.seed},
            {"split", set.split_name},
            {"standardization", set.stats ? set.stats->to_json() : nlohmann::json()},
            {"n_records", set.keys.size()},
            {"provenance", set.provenance}};
}

}  // namespace

void save_samples(const std::string& path, const SampleSet& set) {
    set.validate();
    auto os = binio::open_out(path);
    binio::write_header(os, kSampleMagic, sample_header(set));
    for (std::size_t i = 0; i < set.keys.size(); ++i) {
        const SampleKey& k = set.keys[i];
        std::int64_t delta = k.target_date - set.cube_start;
        if (delta < 0 || delta > std::int64_t(0xffffffffu))
            throw format_error("sample date does not fit the record encoding");
        binio::write_raw(os, static_cast<std::uint32_t>(k.row));
        binio::write_raw(os, static_cast<std::uint32_t>(k.col));
        binio::write_raw(os, static_cast<std::uint32_t>(delta));
        binio::write_raw(os, k.label);
        binio::write_raw(os, k.landcover);
        binio::write_array(os, set.payloads[i].data(), set.payloads[i].size());
    }
    if (!os) throw runtime_failure("failed writing samples to '" + path + "'");
}

namespace {

struct SampleFileInfo {
    SampleSet meta;           // keys filled, payloads empty
    std::int64_t n_records;
    std::int64_t payload_floats;
    std::streampos data_start;
};

SampleFileInfo read_sample_header(std::istream& is) {
    nlohmann::json header = binio::read_header(is, kSampleMagic);
    SampleFileInfo info;
    try {
        info.meta.modality = modality_from(header.at("modality").get<std::string>());
        info.meta.dims = header.at("dims").get<std::vector<std::int64_t>>();
        info.meta.schema_hash =
            std::stoull(header.at("schema_hash").get<std::string>(), nullptr, 16);
        info.meta.cube_start = Date::parse(header.at("cube_start").get<std::string>());
        info.meta.seed = header.at("seed").get<std::uint64_t>();
        info.meta.split_name = header.value("split", std::string());
        if (header.contains("standardization") && !header.at("standardization").is_null())
            info.meta.stats = Standardization::from_json(header.at("standardization"));
        info.n_records = header.at("n_records").get<std::int64_t>();
        if (header.contains("provenance")) info.meta.provenance = header.at("provenance");
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("malformed sample header: ") + e.what());
    }
    info.payload_floats = info.meta.payload_size();
    info.data_start = is.tellg();
    // metadata pass: keys live in memory even for file-backed access
    info.meta.keys.resize(static_cast<std::size_t>(info.n_records));
    const std::int64_t record_bytes = 14 + info.payload_floats * 4;
    for (std::int64_t i = 0; i < info.n_records; ++i) {
        is.seekg(info.data_start + std::streamoff(i * record_bytes));
        std::uint32_t row, col, delta;
        std::uint8_t label, lc;
        try {
            row = binio::read_raw<std::uint32_t>(is);
            col = binio::read_raw<std::uint32_t>(is);
            delta = binio::read_raw<std::uint32_t>(is);
            label = binio::read_raw<std::uint8_t>(is);
            lc = binio::read_raw<std::uint8_t>(is);
        } catch (const format_error&) {
            throw format_error("sample file truncated in record " + std::to_string(i));
        }
        SampleKey& k = info.meta.keys[static_cast<std::size_t>(i)];
        k.row = static_cast<std::int32_t>(row);
        k.col = static_cast<std::int32_t>(col);
        k.target_date = info.meta.cube_start + delta;
        k.label = label;
        k.landcover = lc;
    }
    return info;
}

}  // namespace

SampleSet load_samples(const std::string& path) {
    auto is = binio::open_in(path);
    SampleFileInfo info = read_sample_header(is);
    SampleSet set = std::move(info.meta);
    set.payloads.resize(set.keys.size());
    const std::int64_t record_bytes = 14 + info.payload_floats * 4;
    for (std::int64_t i = 0; i < info.n_records; ++i) {
        is.seekg(info.data_start + std::streamoff(i * record_bytes + 14));
        auto& p = set.payloads[static_cast<std::size_t>(i)];
        p.resize(static_cast<std::size_t>(info.payload_floats));
        try {
            binio::read_array(is, p.data(), p.size());
        } catch (const format_error&) {
            throw format_error("sample file truncated in record " + std::to_string(i));
        }
    }
    is.seekg(info.data_start +
             std::streamoff(info.n_records * record_bytes));
    char extra;
    if (is.read(&extra, 1)) throw format_error("sample file has trailing bytes");
    return set;
}

std::int64_t SampleSource::payload_size() const {
    std::int64_t n = 1;
    for (std::int64_t d : dims()) n *= d;
    return n;
}

MemorySampleSource::MemorySampleSource(SampleSet set, const Standardization* stats)
    : set_(std::move(set)) {
    set_.validate();
    if (stats) apply_standardization(*stats, set_);  // rejects double-standardization
}

std::int64_t MemorySampleSource::size() const {
    return static_cast<std::int64_t>(set_.keys.size());
}
const std::vector<std::int64_t>& MemorySampleSource::dims() const { return set_.dims; }
const SampleKey& MemorySampleSource::key(std::int64_t i) const {
    return set_.keys.at(static_cast<std::size_t>(i));
}
void MemorySampleSource::fetch(std::int64_t i, float* out) const {
    const auto& p = set_.payloads.at(static_cast<std::size_t>(i));
    std::memcpy(out, p.data(), p.size() * sizeof(float));
}

struct FileSampleSource::Impl {
    mutable std::mutex io;  // fetch shares one stream and scratch buffer
    mutable std::ifstream is;
    SampleFileInfo info;
    std::optional<Standardization> stats;
    std::vector<std::int64_t> out_dims;
    std::vector<float> raw;  // scratch for the unstandardized record
};

FileSampleSource::FileSampleSource(const std::string& path, const Standardization* stats)
    : impl_(new Impl) {
    impl_->is = binio::open_in(path);
    impl_->info = read_sample_header(impl_->is);
    impl_->out_dims = impl_->info.meta.dims;
    if (stats) {
        if (impl_->info.meta.stats)
            throw state_error("sample file '" + path + "' is already standardized");
        impl_->stats = *stats;
        if (stats->modality != impl_->info.meta.modality)
            throw parameter_error("standardization modality does not match the sample file");
        impl_->out_dims = dropped_dims(impl_->info.meta.dims, impl_->info.meta.modality,
                                       static_cast<std::int64_t>(stats->dropped.size()));
        impl_->raw.resize(static_cast<std::size_t>(impl_->info.payload_floats));
    }
}

FileSampleSource::~FileSampleSource() = default;

std::int64_t FileSampleSource::size() const { return impl_->info.n_records; }
const std::vector<std::int64_t>& FileSampleSource::dims() const { return impl_->out_dims; }
const SampleKey& FileSampleSource::key(std::int64_t i) const {
    return impl_->info.meta.keys.at(static_cast<std::size_t>(i));
}

const SampleSet& FileSampleSource::meta() const { return impl_->info.meta; }

void FileSampleSource::fetch(std::int64_t i, float* out) const {
    if (i < 0 || i >= impl_->info.n_records) throw bounds_error("sample index out of range");
    std::lock_guard<std::mutex> lock(impl_->io);
    const std::int64_t record_bytes = 14 + impl_->info.payload_floats * 4;
    impl_->is.clear();
    impl_->is.seekg(impl_->info.data_start + std::streamoff(i * record_bytes + 14));
    if (impl_->stats) {
        binio::read_array(impl_->is, impl_->raw.data(), impl_->raw.size());
        ChannelLayout lay = layout_of(impl_->info.meta);
        standardize_payload(*impl_->stats, lay, impl_->raw.data(), out);
    } else {
        binio::read_array(impl_->is, out, static_cast<std::size_t>(impl_->info.payload_floats));
    }
}

}  // namespace pyrocast
