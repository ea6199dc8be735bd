// pyrocast command-line pipeline: synthetic cubes, harmonized builds, sample
// extraction, model training, evaluation, and daily danger maps as pure
// file-to-file transforms. Exit codes: 0 success, 1 runtime failure,
// 2 usage or configuration error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "pyrocast/binio.hpp"
#include "pyrocast/datacube.hpp"
#include "pyrocast/evaluation.hpp"
#include "pyrocast/forest.hpp"
#include "pyrocast/harmonize.hpp"
#include "pyrocast/neural.hpp"
#include "pyrocast/sampling.hpp"
#include "pyrocast/scorers.hpp"
#include "pyrocast/synth.hpp"

namespace fs = std::filesystem;
using namespace pyrocast;
using nlohmann::json;

namespace {

struct Global {
    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 0;
    json config;  // loaded lazily per command
};

json load_config(const std::string& path) {
    if (path.empty()) throw config_error("--config is required for this command");
    std::ifstream is(path);
    if (!is) throw config_error("config file '" + path + "' does not exist");
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw config_error("config '" + path + "': " + e.what());
    }
}

template <typename T>
T field(const json& j, const std::string& name) {
    if (!j.contains(name)) throw config_error("config field '" + name + "' is missing");
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw config_error("config field '" + name + "' has the wrong type");
    }
}

template <typename T>
T field_or(const json& j, const std::string& name, T fallback) {
    if (!j.contains(name)) return fallback;
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw config_error("config field '" + name + "' has the wrong type");
    }
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw config_error("no " + what + " path given");
    if (!fs::exists(path)) throw config_error(what + " '" + path + "' does not exist");
}

void require_out(const Global& g) {
    if (g.out.empty()) throw config_error("--out is required for this command");
}

std::uint64_t choose_seed(const Global& g) {
    if (g.seed_given) return g.seed;
    return field_or<std::uint64_t>(g.config, "seed", 0);
}

// configs may pin the schema they expect; the artifact decides otherwise
void check_schema_pin(const json& config, std::uint64_t actual, const std::string& what) {
    if (!config.contains("schema_hash")) return;
    std::string pin = field<std::string>(config, "schema_hash");
    if (pin != to_hex(actual))
        throw schema_error("config pins schema_hash " + pin + " but " + what + " carries " +
                           to_hex(actual));
}

json provenance_for(const std::string& command, const Global& g, std::uint64_t seed,
                    json inputs = json::object()) {
    return {{"command", command}, {"config", g.config}, {"seed", seed}, {"inputs", inputs}};
}

GridSpec grid_from_config(const json& config) {
    if (!config.contains("grid") || config.at("grid") == "reference") return GridSpec::reference();
    const json& gj = config.at("grid");
    GridSpec g;
    g.n_rows = field<std::int64_t>(gj, "n_rows");
    g.n_cols = field<std::int64_t>(gj, "n_cols");
    g.origin_x = field_or<double>(gj, "origin_x", 0.0);
    g.origin_y = field_or<double>(gj, "origin_y", static_cast<double>(g.n_rows) * 1000.0);
    g.cell_size = field_or<double>(gj, "cell_size", 1000.0);
    g.projection = field_or<std::string>(gj, "projection", "local-meters");
    g.validate();
    return g;
}

Date date_field(const json& j, const std::string& name, const char* fallback = nullptr) {
    std::string text = fallback ? field_or<std::string>(j, name, fallback)
                                : field<std::string>(j, name);
    try {
        return Date::parse(text);
    } catch (const std::exception& e) {
        throw config_error("config field '" + name + "': " + e.what());
    }
}

// ---------------------------------------------------------------- synth

int cmd_synth(Global& g) {
    require_out(g);
    SynthParams params;
    params.n_days = field<std::int64_t>(g.config, "n_days");
    if (params.n_days < 30)
        throw config_error("config field 'n_days' must be at least 30 to leave room for input "
                           "windows, got " + std::to_string(params.n_days));
    params.grid = grid_from_config(g.config);
    params.start_date = date_field(g.config, "start_date", "2019-01-01");
    params.seed = choose_seed(g);
    params.fire.rate = field_or<double>(g.config, "rate", params.fire.rate);
    if (g.config.contains("fire")) {
        const json& f = g.config.at("fire");
        params.fire.intercept = field_or<double>(f, "intercept", params.fire.intercept);
        params.fire.rate = field_or<double>(f, "rate", params.fire.rate);
        params.fire.event_min_pixels =
            field_or<std::int64_t>(f, "event_min_pixels", params.fire.event_min_pixels);
        params.fire.event_max_pixels =
            field_or<std::int64_t>(f, "event_max_pixels", params.fire.event_max_pixels);
    }

    SynthResult result = generate_synthetic_cube(params);
    result.cube.set_provenance(provenance_for("synth", g, params.seed));
    save_cube(g.out, result.cube);
    save_events(g.out + ".events.jsonl", result.events);
    save_detections(g.out + ".detections.jsonl", result.detections);
    std::cout << "cube " << g.out << ": " << params.grid.n_rows << "x" << params.grid.n_cols
              << "x" << params.n_days << ", " << result.events.size() << " fire events, "
              << result.rasterize_report.labeled_pixels << " burned pixels, schema "
              << to_hex(result.cube.schema().hash()) << "\n";
    return 0;
}

// ---------------------------------------------------------------- build

// One dynamic variable from its configured day entries.
void build_dynamic(Datacube& cube, std::int64_t v, const json& entry, const std::string& name) {
    const VariableSpec& var = cube.schema().vars[static_cast<std::size_t>(v)];
    const json& days = entry.contains("days") ? entry.at("days") : json::array();
    if (!days.is_array())
        throw config_error("variable '" + name + "': 'days' must be an array");
    std::string aggregate = field_or<std::string>(entry, "aggregate", "none");
    if (aggregate != "none" && aggregate != "min" && aggregate != "max")
        throw config_error("variable '" + name + "': unknown aggregate '" + aggregate + "'");

    for (const json& day : days) {
        Date date = date_field(day, "date");
        if (!cube.contains_date(date))
            throw config_error("variable '" + name + "': date " + date.to_string() +
                               " is outside the cube range");
        std::int64_t t = cube.day_index(date);
        Raster merged;
        if (aggregate == "none") {
            std::string path = field<std::string>(day, "path");
            require_file(path, "raster for '" + name + "'");
            merged = resample_to_grid(load_raster(path), cube.grid(), var.resample);
        } else {
            auto paths = field<std::vector<std::string>>(day, "snapshots");
            std::vector<Raster> shots;
            for (const auto& p : paths) {
                require_file(p, "snapshot for '" + name + "'");
                shots.push_back(resample_to_grid(load_raster(p), cube.grid(), var.resample));
            }
            DailyAggregate agg = aggregate_daily_weather(shots);
            merged = aggregate == "min" ? std::move(agg.min) : std::move(agg.max);
        }
        std::copy(merged.cells.begin(), merged.cells.end(), cube.dynamic_plane(v, t));
    }
    if (field_or<bool>(entry, "forward_fill", false))
        forward_fill_daily(cube.raw(v), cube.n_days(), cube.plane_size());
}

void build_static(Datacube& cube, std::int64_t v, const json& entry, const std::string& name) {
    const VariableSpec& var = cube.schema().vars[static_cast<std::size_t>(v)];
    std::string path;
    if (entry.contains("vintages")) {
        // land-cover style multi-vintage input: one layer per cube, chosen by
        // start year; a cube crossing a vintage boundary is refused
        int start_vintage = landcover_vintage_for_year(cube.start_date().year());
        int end_vintage = landcover_vintage_for_year(cube.end_date().year());
        if (start_vintage != end_vintage)
            throw config_error("variable '" + name + "': cube spans vintages " +
                               std::to_string(start_vintage) + " and " +
                               std::to_string(end_vintage) +
                               "; split the build at the vintage boundary");
        const json& vintages = entry.at("vintages");
        std::string key = std::to_string(start_vintage);
        if (!vintages.contains(key))
            throw config_error("variable '" + name + "': no raster for vintage " + key);
        path = field<std::string>(vintages, key);
    } else {
        path = field<std::string>(entry, "path");
    }
    require_file(path, "raster for '" + name + "'");
    Raster r = resample_to_grid(load_raster(path), cube.grid(), var.resample);
    std::copy(r.cells.begin(), r.cells.end(), cube.static_plane(v));
}

int cmd_build(Global& g) {
    require_out(g);
    std::uint64_t seed = choose_seed(g);
    std::string schema_name = field_or<std::string>(g.config, "schema", "reference");
    if (schema_name != "reference")
        throw config_error("config field 'schema': only 'reference' is supported, got '" +
                           schema_name + "'");
    Schema schema = Schema::reference();
    check_schema_pin(g.config, schema.hash(), "the reference schema");

    Datacube cube(grid_from_config(g.config), schema, date_field(g.config, "start_date"),
                  field<std::int64_t>(g.config, "n_days"));
    cube.set_seed(seed);

    const json& variables = field_or<json>(g.config, "variables", json::object());
    for (std::size_t v = 0; v < schema.vars.size(); ++v) {
        const VariableSpec& var = schema.vars[v];
        if (var.role == VarRole::target) continue;
        if (!variables.contains(var.name))
            throw config_error("no input configured for variable '" + var.name + "' (" +
                               to_string(var.role) + ")");
        const json& entry = variables.at(var.name);
        if (var.kind == VarKind::dynamic)
            build_dynamic(cube, static_cast<std::int64_t>(v), entry, var.name);
        else
            build_static(cube, static_cast<std::int64_t>(v), entry, var.name);
    }

    shift_satellite_forward(cube);

    std::int64_t target = schema.target_index();
    if (!g.config.contains("events"))
        throw config_error("no events source for variable '" +
                           schema.vars[static_cast<std::size_t>(target)].name + "' (target)");
    std::string events_path = field<std::string>(g.config, "events");
    require_file(events_path, "events file");
    std::vector<FireEvent> events = load_events(events_path);
    RasterizeReport report = rasterize_targets(cube, events);

    json prov = provenance_for("build", g, seed, {{"events", events_path}});
    prov["rasterize"] = {{"labeled_pixels", report.labeled_pixels},
                         {"overlap_collisions", report.overlap_collisions}};
    cube.set_provenance(prov);
    save_cube(g.out, cube);
    std::cout << "cube " << g.out << ": " << events.size() << " events rasterized to "
              << report.labeled_pixels << " pixels, schema " << to_hex(schema.hash()) << "\n";
    return 0;
}

// ---------------------------------------------------------------- extract

json split_block(const std::string& label, const std::vector<SampleKey>& keys) {
    std::int64_t fire = 0;
    for (const auto& k : keys) fire += k.label;
    std::int64_t total = static_cast<std::int64_t>(keys.size());
    std::ostringstream line;
    line << total << " " << label << " (" << (total - fire) << " non-fire, " << fire << " fire)";
    return {{"total", total}, {"fire", fire}, {"non_fire", total - fire}, {"line", line.str()}};
}

int cmd_extract(Global& g, const std::string& cube_path) {
    require_out(g);
    require_file(cube_path, "cube");
    std::uint64_t seed = choose_seed(g);
    Datacube cube = load_cube(cube_path);
    check_schema_pin(g.config, cube.schema().hash(), "cube '" + cube_path + "'");

    std::vector<Modality> modalities;
    json want = field_or<json>(g.config, "modalities", json("all"));
    if (want == "all")
        modalities = {Modality::pixel, Modality::temporal, Modality::spatial,
                      Modality::spatiotemporal};
    else if (want.is_array())
        for (const auto& m : want) modalities.push_back(modality_from(m.get<std::string>()));
    else
        throw config_error("config field 'modalities' must be \"all\" or an array");
    if (modalities.empty()) throw config_error("config field 'modalities' is empty");

    SplitConfig split = SplitConfig::from_json(field<json>(g.config, "split"));
    split.validate();
    SamplingConfig sampling;
    sampling.ratio = field_or<double>(g.config, "negatives_per_positive", 2.0);
    if (sampling.ratio < 0)
        throw config_error("config field 'negatives_per_positive' must be non-negative");
    sampling.pixel_level_negatives = field_or<bool>(g.config, "pixel_level_negatives", false);

    std::vector<SampleKey> rejected;
    std::vector<SampleKey> keys = collect_positives(cube, &rejected);
    NegativeSamplingReport negatives_report;
    std::vector<SampleKey> negatives =
        sample_negatives(cube, keys, sampling, RngStream(seed, "negatives"), &negatives_report);
    keys.insert(keys.end(), negatives.begin(), negatives.end());
    SplitKeys splits = split_by_time(keys, split);

    fs::create_directories(g.out);
    json summary = {{"format", "split-summary"},
                    {"seed", seed},
                    {"schema_hash", to_hex(cube.schema().hash())},
                    {"config", g.config},
                    {"cube", cube_path},
                    {"positives_rejected", static_cast<std::int64_t>(rejected.size())},
                    {"dropped_by_year", splits.dropped}};
    json classes = json::array();
    for (const auto& c : negatives_report.classes)
        classes.push_back({{"landcover", c.landcover},
                           {"positives", c.positives},
                           {"requested", c.requested},
                           {"drawn", c.drawn}});
    summary["negative_sampling"] = {{"classes", classes},
                                    {"no_fire_days", negatives_report.no_fire_days},
                                    {"nan_rejected", negatives_report.nan_rejected},
                                    {"shortfall", negatives_report.shortfall()}};
    summary["splits"] = {{"train", split_block("training", splits.train)},
                         {"validation", split_block("validation", splits.validation)},
                         {"test", split_block("test", splits.test)}};

    std::optional<Standardization> pixel_stats;
    json files = json::object();
    for (Modality m : modalities) {
        const std::array<std::pair<const char*, const std::vector<SampleKey>*>, 3> parts{
            {{"train", &splits.train}, {"validation", &splits.validation}, {"test", &splits.test}}};
        for (const auto& [split_name, part_keys] : parts) {
            SampleSet set = build_sample_set(cube, m, *part_keys);
            set.split_name = split_name;
            set.seed = seed;
            set.provenance = provenance_for("extract", g, seed, {{"cube", cube_path}});
            if (m == Modality::pixel && std::string(split_name) == "train" && !set.keys.empty())
                pixel_stats = fit_standardization(set);
            std::string path =
                (fs::path(g.out) / (to_string(m) + "_" + split_name + ".pfs")).string();
            save_samples(path, set);
            files[to_string(m)][split_name] = path;
        }
    }
    summary["files"] = files;
    if (pixel_stats) {
        std::string stats_path = (fs::path(g.out) / "stats.json").string();
        std::ofstream os(stats_path);
        json sj = {{"format", "standardization"},
                   {"fitted_on", "pixel training split"},
                   {"seed", seed},
                   {"schema_hash", to_hex(cube.schema().hash())},
                   {"pixel", pixel_stats->to_json()}};
        os << sj.dump(2) << "\n";
        if (!os) throw runtime_failure("failed writing '" + stats_path + "'");
        summary["stats"] = stats_path;
    }

    std::string summary_path = (fs::path(g.out) / "summary.json").string();
    std::ofstream os(summary_path);
    os << summary.dump(2) << "\n";
    if (!os) throw runtime_failure("failed writing '" + summary_path + "'");
    for (const char* part : {"train", "validation", "test"})
        std::cout << summary["splits"][part]["line"].get<std::string>() << "\n";
    return 0;
}

// ---------------------------------------------------------------- train

Modality required_modality(const std::string& architecture) {
    if (architecture == "rf") return Modality::pixel;
    if (architecture == "lstm") return Modality::temporal;
    if (architecture == "cnn") return Modality::spatial;
    if (architecture == "convlstm") return Modality::spatiotemporal;
    throw config_error("config field 'architecture': unknown architecture '" + architecture + "'");
}

// The stats sidecar stores pixel statistics; windowed payloads use the shared
// slice over the plain feature channels.
Standardization stats_for(const json& stats_doc, Modality m, std::int64_t n_features) {
    Standardization pixel = Standardization::from_json(stats_doc.at("pixel"));
    return slice_standardization(pixel, m, n_features);
}

std::int64_t feature_channels(Modality m, const std::vector<std::int64_t>& raw_dims) {
    switch (m) {
        case Modality::pixel: return raw_dims.at(0);
        case Modality::temporal: return raw_dims.at(1);
        case Modality::spatial: return raw_dims.at(0);
        case Modality::spatiotemporal: return raw_dims.at(1);
    }
    throw parameter_error("bad modality");
}

int cmd_train(Global& g, const std::string& samples_path, const std::string& validation_path,
              const std::string& stats_path) {
    require_out(g);
    require_file(samples_path, "samples file");
    std::uint64_t seed = choose_seed(g);
    std::string architecture = field<std::string>(g.config, "architecture");
    Modality needed = required_modality(architecture);

    // peek the header for modality/schema checks before touching payloads
    FileSampleSource probe(samples_path);
    const SampleSet& meta = probe.meta();
    if (meta.modality != needed)
        throw config_error("architecture '" + architecture + "' requires " + to_string(needed) +
                           " samples, but '" + samples_path + "' holds " +
                           to_string(meta.modality));
    check_schema_pin(g.config, meta.schema_hash, "samples '" + samples_path + "'");

    std::optional<Standardization> stats;
    if (!stats_path.empty()) {
        require_file(stats_path, "stats file");
        std::ifstream is(stats_path);
        json doc;
        try {
            doc = json::parse(is);
        } catch (const json::parse_error& e) {
            throw config_error("stats '" + stats_path + "': " + e.what());
        }
        stats = stats_for(doc, needed, feature_channels(needed, meta.dims));
    }

    FileSampleSource train_src(samples_path, stats ? &*stats : nullptr);
    std::optional<FileSampleSource> val_src;
    if (!validation_path.empty()) {
        require_file(validation_path, "validation file");
        val_src.emplace(validation_path, stats ? &*stats : nullptr);
        if (val_src->meta().modality != meta.modality)
            throw schema_error("validation modality does not match the training samples");
        if (val_src->meta().schema_hash != meta.schema_hash)
            throw schema_error("validation samples come from schema " +
                               to_hex(val_src->meta().schema_hash) + " but training from " +
                               to_hex(meta.schema_hash));
        if (val_src->size() == 0) val_src.reset();
    }

    json inputs = {{"samples", samples_path}};
    if (!validation_path.empty()) inputs["validation"] = validation_path;
    if (!stats_path.empty()) inputs["stats"] = stats_path;

    if (architecture == "rf") {
        ForestParams params;
        const json fj = field_or<json>(g.config, "forest", json::object());
        params.n_trees = field_or<int>(fj, "n_trees", params.n_trees);
        params.bootstrap = field_or<bool>(fj, "bootstrap", params.bootstrap);
        params.features_per_split =
            field_or<int>(fj, "features_per_split", params.features_per_split);
        params.min_samples_split = field_or<int>(fj, "min_samples_split", params.min_samples_split);
        params.min_samples_leaf = field_or<int>(fj, "min_samples_leaf", params.min_samples_leaf);

        const std::int64_t n = train_src.size(), d = train_src.payload_size();
        if (n == 0) throw parameter_error("training set is empty");
        TensorF x({n, d});
        std::vector<std::uint8_t> y(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) {
            train_src.fetch(i, x.data() + i * d);
            y[static_cast<std::size_t>(i)] = train_src.key(i).label;
        }
        ForestModel model = fit_forest(x, y, params, seed);
        json extra = {{"modality", to_string(needed)},
                      {"schema_hash", to_hex(meta.schema_hash)},
                      {"provenance", provenance_for("train", g, seed, inputs)}};
        if (stats) extra["standardization"] = stats->to_json();
        save_forest(g.out, model, extra);
        std::ofstream log(g.out + ".log");
        log << "rf: " << params.n_trees << " trees on " << n << " samples of " << d
            << " features\n";
        std::cout << "rf: " << params.n_trees << " trees on " << n << " samples -> " << g.out
                  << "\n";
        return 0;
    }

    TrainConfig cfg = TrainConfig::reference_for(architecture);
    cfg.epochs = field_or<int>(g.config, "epochs", cfg.epochs);
    cfg.batch_size = field_or<int>(g.config, "batch_size", cfg.batch_size);
    cfg.learning_rate = field_or<double>(g.config, "learning_rate", cfg.learning_rate);
    cfg.weight_decay = field_or<double>(g.config, "weight_decay", cfg.weight_decay);
    cfg.seed = seed;
    std::int64_t width = field_or<std::int64_t>(g.config, "width", 0);

    auto model = make_model(architecture, train_src.dims(), RngStream(seed, "init"), width);
    std::ostringstream progress;
    TrainResult result =
        train(*model, train_src, val_src ? &*val_src : nullptr, cfg, &progress);

    std::ofstream log(g.out + ".log");
    log << progress.str();
    if (!log) throw runtime_failure("failed writing '" + g.out + ".log'");
    std::cout << progress.str();

    set_params(*model, result.best_params);
    CheckpointInfo info;
    info.architecture = architecture;
    info.modality = needed;
    info.config = cfg;
    info.schema_hash = meta.schema_hash;
    info.epoch = result.best_epoch;
    info.val_loss = result.best_val_loss;
    if (result.best_epoch >= 1 &&
        result.best_epoch <= static_cast<int>(result.log.size()))
        info.val_auroc = result.log[static_cast<std::size_t>(result.best_epoch - 1)].val_auroc;
    info.stats = stats;
    info.provenance = provenance_for("train", g, seed, inputs);
    save_checkpoint(g.out, *model, info);
    std::cout << architecture << " checkpoint (epoch " << info.epoch << ") -> " << g.out << "\n";
    return 0;
}

// ---------------------------------------------------------------- eval / predict-map

std::string sniff_magic(const std::string& path) {
    auto is = binio::open_in(path);
    char magic[4];
    is.read(magic, 4);
    if (!is) throw format_error("'" + path + "' is too short to identify");
    return std::string(magic, 4);
}

// Everything eval and predict-map need from either model artifact kind.
struct LoadedModel {
    Scorer scorer;
    Modality modality = Modality::pixel;
    std::uint64_t schema_hash = 0;
    std::optional<Standardization> stats;
    std::string architecture;
    // keep the owning objects alive for the scorer's lifetime
    std::unique_ptr<Model<float>> network;
    std::unique_ptr<ForestModel> forest;
};

LoadedModel load_model(const std::string& path) {
    LoadedModel out;
    std::string magic = sniff_magic(path);
    if (magic == "PMC1") {
        LoadedCheckpoint ck = load_checkpoint(path);
        out.modality = ck.info.modality;
        out.schema_hash = ck.info.schema_hash;
        out.stats = ck.info.stats;
        out.architecture = ck.info.architecture;
        out.network = std::move(ck.model);
        out.scorer = make_scorer(*out.network);
    } else if (magic == "PRF1") {
        json header;
        out.forest = std::make_unique<ForestModel>(load_forest(path, &header));
        out.modality = modality_from(header.value("modality", "pixel"));
        if (header.contains("schema_hash"))
            out.schema_hash = std::stoull(header.at("schema_hash").get<std::string>(), nullptr, 16);
        if (header.contains("standardization"))
            out.stats = Standardization::from_json(header.at("standardization"));
        out.architecture = "rf";
        out.scorer = make_scorer(*out.forest);
    } else {
        throw format_error("'" + path + "' is not a model artifact (magic '" + magic + "')");
    }
    return out;
}

int cmd_eval(Global& g, const std::string& checkpoint_path, const std::string& samples_path,
             double threshold) {
    require_out(g);
    require_file(checkpoint_path, "checkpoint");
    require_file(samples_path, "samples file");
    LoadedModel model = load_model(checkpoint_path);

    FileSampleSource samples(samples_path, model.stats ? &*model.stats : nullptr);
    if (samples.meta().modality != model.modality)
        throw schema_error("checkpoint expects " + to_string(model.modality) +
                           " samples, but '" + samples_path + "' holds " +
                           to_string(samples.meta().modality));
    if (model.schema_hash && samples.meta().schema_hash != model.schema_hash)
        throw schema_error("samples schema " + to_hex(samples.meta().schema_hash) +
                           " does not match the checkpoint's " + to_hex(model.schema_hash));

    std::string scores_path = g.out + ".scores.jsonl";
    std::ofstream scores(scores_path);
    if (!scores) throw runtime_failure("cannot open '" + scores_path + "' for writing");
    EvalResult result = evaluate(samples, model.scorer, threshold, &scores);

    json doc = {{"format", "metrics"},
                {"architecture", model.architecture},
                {"metrics", result.report.to_json()},
                {"n_samples", samples.size()},
                {"schema_hash", to_hex(samples.meta().schema_hash)},
                {"scores", scores_path},
                {"provenance",
                 provenance_for("eval", g, choose_seed(g),
                                {{"checkpoint", checkpoint_path}, {"samples", samples_path}})}};
    std::ofstream os(g.out);
    os << doc.dump(2) << "\n";
    if (!os) throw runtime_failure("failed writing '" + g.out + "'");

    const MetricsReport& r = result.report;
    auto show = [](const std::optional<double>& v) {
        return v ? std::to_string(*v) : std::string("undefined");
    };
    std::cout << model.architecture << " on " << samples.size() << " samples: precision "
              << show(r.precision) << ", recall " << show(r.recall) << ", f1 " << show(r.f1)
              << ", auroc " << show(r.auroc) << "\n";
    return 0;
}

int cmd_predict_map(Global& g, const std::string& checkpoint_path, const std::string& cube_path,
                    const std::string& date_text) {
    require_out(g);
    require_file(checkpoint_path, "checkpoint");
    require_file(cube_path, "cube");
    if (date_text.empty()) throw config_error("--date is required (YYYY-MM-DD)");
    Date date;
    try {
        date = Date::parse(date_text);
    } catch (const std::exception& e) {
        throw config_error(std::string("--date: ") + e.what());
    }

    LoadedModel model = load_model(checkpoint_path);
    Datacube cube = load_cube(cube_path);
    if (model.schema_hash && cube.schema().hash() != model.schema_hash)
        throw schema_error("cube schema " + to_hex(cube.schema().hash()) +
                           " does not match the checkpoint's " + to_hex(model.schema_hash));

    DangerMap map = render_map(cube, model.modality, date,
                               model.stats ? &*model.stats : nullptr, model.scorer);
    map.provenance = provenance_for("predict-map", g, choose_seed(g),
                                    {{"checkpoint", checkpoint_path},
                                     {"cube", cube_path},
                                     {"date", date.to_string()},
                                     {"architecture", model.architecture}});
    save_map(g.out, map);
    write_map_png(g.out + ".png", map);

    std::int64_t predicted = 0;
    for (float v : map.scores) predicted += std::isnan(v) ? 0 : 1;
    std::cout << "map " << g.out << ": " << map.grid.n_rows << "x" << map.grid.n_cols << " cells, "
              << predicted << " predicted, " << (map.grid.n_rows * map.grid.n_cols - predicted)
              << " without a window; image " << g.out << ".png\n";
    return 0;
}

// ---------------------------------------------------------------- describe

int cmd_describe(const std::string& path) {
    require_file(path, "artifact");
    std::string magic = sniff_magic(path);
    if (magic == "PFC1" || magic == "PFS1" || magic == "PMC1" || magic == "PRF1") {
        auto is = binio::open_in(path);
        json header = binio::read_header(is, magic.c_str());
        std::cout << header.dump(2) << "\n";
        return 0;
    }
    // JSON artifacts (configs, metrics, summaries) print as themselves
    std::ifstream is(path);
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::parse_error&) {
        throw format_error("'" + path + "' is not a recognized artifact");
    }
    std::cout << doc.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pyrocast: daily wildfire danger forecasting pipeline"};
    app.require_subcommand(1);

    Global g;
    auto* seed_opt = app.add_option("--seed", g.seed, "Seed driving every random draw");
    app.add_option("--config", g.config_path, "JSON configuration file");
    app.add_option("--threads", g.threads, "Worker-thread cap (0 = hardware)");
    app.add_option("--out", g.out, "Output path (a directory for extract)");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic cube with planted fires");
    auto* build = app.add_subcommand("build", "Harmonize raster inputs into a cube");
    auto* extract = app.add_subcommand("extract", "Draw samples from a cube into PFS files");
    auto* train = app.add_subcommand("train", "Fit a model on extracted samples");
    auto* eval = app.add_subcommand("eval", "Score a test split and report metrics");
    auto* predict = app.add_subcommand("predict-map", "Render one day as a danger map");
    auto* describe = app.add_subcommand("describe", "Print any artifact's header");

    std::string cube_path, samples_path, validation_path, stats_path, checkpoint_path;
    std::string date_text, describe_path;
    double threshold = 0.5;
    extract->add_option("--cube", cube_path, "Input cube (PFC)");
    train->add_option("--samples", samples_path, "Training samples (PFS)");
    train->add_option("--validation", validation_path, "Validation samples (PFS)");
    train->add_option("--stats", stats_path, "Standardization sidecar from extract");
    eval->add_option("--checkpoint", checkpoint_path, "Model artifact (PMC/PRF)");
    eval->add_option("--samples", samples_path, "Evaluation samples (PFS)");
    eval->add_option("--threshold", threshold, "Positive-class decision threshold");
    predict->add_option("--checkpoint", checkpoint_path, "Model artifact (PMC/PRF)");
    predict->add_option("--cube", cube_path, "Input cube (PFC)");
    predict->add_option("--date", date_text, "Target date (YYYY-MM-DD)");
    describe->add_option("path", describe_path, "Artifact to describe")->required();
    for (auto* sub : {synth, build, extract, train, eval, predict, describe}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    g.seed_given = seed_opt->count() > 0;
    if (g.threads < 0) {
        std::cerr << "error: --threads must be non-negative\n";
        return 2;
    }
    thread_cap() = g.threads;

    try {
        if (!describe->parsed()) g.config = g.config_path.empty() ? json::object()
                                                                  : load_config(g.config_path);
        if (synth->parsed()) return cmd_synth(g);
        if (build->parsed()) return cmd_build(g);
        if (extract->parsed()) return cmd_extract(g, cube_path);
        if (train->parsed()) return cmd_train(g, samples_path, validation_path, stats_path);
        if (eval->parsed()) return cmd_eval(g, checkpoint_path, samples_path, threshold);
        if (predict->parsed()) return cmd_predict_map(g, checkpoint_path, cube_path, date_text);
        if (describe->parsed()) return cmd_describe(describe_path);
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const runtime_failure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
