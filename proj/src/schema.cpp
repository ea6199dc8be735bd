#include "pyrocast/schema.hpp"

#include <algorithm>

namespace pyrocast {

std::string to_string(VarKind k) { return k == VarKind::dynamic ? "dynamic" : "static"; }

std::string to_string(VarRole r) {
    switch (r) {
        case VarRole::input: return "input";
        case VarRole::stratifier: return "stratifier";
        case VarRole::target: return "target";
    }
    return "?";
}

std::string to_string(ResampleRule r) {
    switch (r) {
        case ResampleRule::bilinear: return "bilinear";
        case ResampleRule::mean: return "mean";
        case ResampleRule::mode: return "mode";
        case ResampleRule::nearest: return "nearest";
    }
    return "?";
}

namespace {

VarKind kind_from(const std::string& s) {
    if (s == "dynamic") return VarKind::dynamic;
    if (s == "static") return VarKind::static_;
    throw schema_error("unknown variable kind '" + s + "'");
}

VarRole role_from(const std::string& s) {
    if (s == "input") return VarRole::input;
    if (s == "stratifier") return VarRole::stratifier;
    if (s == "target") return VarRole::target;
    throw schema_error("unknown variable role '" + s + "'");
}

ResampleRule resample_from(const std::string& s) {
    if (s == "bilinear") return ResampleRule::bilinear;
    if (s == "mean") return ResampleRule::mean;
    if (s == "mode") return ResampleRule::mode;
    if (s == "nearest") return ResampleRule::nearest;
    throw schema_error("unknown resample rule '" + s + "'");
}

}  // namespace

nlohmann::json GridSpec::to_json() const {
    return {{"n_rows", n_rows},       {"n_cols", n_cols},       {"origin_x", origin_x},
            {"origin_y", origin_y},   {"cell_size", cell_size}, {"projection", projection}};
}

GridSpec GridSpec::from_json(const nlohmann::json& j) {
    GridSpec g;
    try {
        g.n_rows = j.at("n_rows").get<std::int64_t>();
        g.n_cols = j.at("n_cols").get<std::int64_t>();
        g.origin_x = j.at("origin_x").get<double>();
        g.origin_y = j.at("origin_y").get<double>();
        g.cell_size = j.at("cell_size").get<double>();
        g.projection = j.at("projection").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("malformed grid spec: ") + e.what());
    }
    g.validate();
    return g;
}

GridSpec GridSpec::reference() {
    GridSpec g;
    g.n_rows = 562;
    g.n_cols = 700;
    g.origin_x = 0.0;
    g.origin_y = 562000.0;
    g.cell_size = 1000.0;
    return g;
}

nlohmann::json VariableSpec::to_json() const {
    return {{"name", name},
            {"kind", to_string(kind)},
            {"role", to_string(role)},
            {"units", units},
            {"resample", to_string(resample)},
            {"shift_forward", shift_forward}};
}

VariableSpec VariableSpec::from_json(const nlohmann::json& j) {
    VariableSpec v;
    try {
        v.name = j.at("name").get<std::string>();
        v.kind = kind_from(j.at("kind").get<std::string>());
        v.role = role_from(j.at("role").get<std::string>());
        v.units = j.at("units").get<std::string>();
        v.resample = resample_from(j.at("resample").get<std::string>());
        v.shift_forward = j.at("shift_forward").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("malformed variable spec: ") + e.what());
    }
    return v;
}

void Schema::validate() const {
    if (vars.empty()) throw schema_error("schema has no variables");
    std::int64_t targets = 0, stratifiers = 0;
    for (const auto& v : vars) {
        if (v.name.empty()) throw schema_error("variable with empty name");
        if (v.role == VarRole::target) {
            ++targets;
            if (v.kind != VarKind::dynamic)
                throw schema_error("target variable '" + v.name + "' must be dynamic");
        }
        if (v.role == VarRole::stratifier) ++stratifiers;
        if (v.shift_forward && v.kind != VarKind::dynamic)
            throw schema_error("static variable '" + v.name + "' cannot be shifted");
    }
    for (std::size_t i = 0; i < vars.size(); ++i)
        for (std::size_t j = i + 1; j < vars.size(); ++j)
            if (vars[i].name == vars[j].name)
                throw schema_error("duplicate variable name '" + vars[i].name + "'");
    if (targets != 1)
        throw schema_error("schema must have exactly one target variable, found " +
                           std::to_string(targets));
    if (stratifiers != 1)
        throw schema_error("schema must have exactly one stratifier variable, found " +
                           std::to_string(stratifiers));
}

std::int64_t Schema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].name == name) return static_cast<std::int64_t>(i);
    return -1;
}

std::int64_t Schema::require(const std::string& name) const {
    std::int64_t i = index_of(name);
    if (i < 0) throw schema_error("schema has no variable named '" + name + "'");
    return i;
}

std::int64_t Schema::target_index() const {
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].role == VarRole::target) return static_cast<std::int64_t>(i);
    throw schema_error("schema has no target variable");
}

std::int64_t Schema::stratifier_index() const {
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].role == VarRole::stratifier) return static_cast<std::int64_t>(i);
    throw schema_error("schema has no stratifier variable");
}

std::vector<std::int64_t> Schema::dynamic_inputs() const {
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].kind == VarKind::dynamic && vars[i].role == VarRole::input)
            out.push_back(static_cast<std::int64_t>(i));
    return out;
}

std::vector<std::int64_t> Schema::static_inputs() const {
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].kind == VarKind::static_ && vars[i].role == VarRole::input)
            out.push_back(static_cast<std::int64_t>(i));
    return out;
}

std::vector<std::int64_t> Schema::input_features() const {
    auto out = dynamic_inputs();
    auto stat = static_inputs();
    out.insert(out.end(), stat.begin(), stat.end());
    return out;
}

std::int64_t Schema::count(VarKind kind) const {
    return std::count_if(vars.begin(), vars.end(),
                         [&](const VariableSpec& v) { return v.kind == kind; });
}

std::uint64_t Schema::hash() const {
    std::string canon = to_json().dump();
    return fnv1a64(canon.data(), canon.size());
}

nlohmann::json Schema::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : vars) arr.push_back(v.to_json());
    return arr;
}

Schema Schema::from_json(const nlohmann::json& j) {
    Schema s;
    if (!j.is_array()) throw format_error("schema JSON must be an array");
    for (const auto& item : j) s.vars.push_back(VariableSpec::from_json(item));
    s.validate();
    return s;
}

Schema Schema::reference() {
    Schema s;
    auto dyn = [&](const char* name, const char* units, ResampleRule rule, bool shift) {
        s.vars.push_back(VariableSpec{name, VarKind::dynamic, VarRole::input, units, rule, shift});
    };
    auto stat = [&](const char* name, const char* units, ResampleRule rule) {
        s.vars.push_back(
            VariableSpec{name, VarKind::static_, VarRole::input, units, rule, false});
    };
    // weather: daily aggregates of 9 km forecasts, never shifted
    dyn("t2m_min", "K", ResampleRule::bilinear, false);
    dyn("t2m_max", "K", ResampleRule::bilinear, false);
    dyn("wind_u_min", "m/s", ResampleRule::bilinear, false);
    dyn("wind_u_max", "m/s", ResampleRule::bilinear, false);
    dyn("wind_v_min", "m/s", ResampleRule::bilinear, false);
    dyn("wind_v_max", "m/s", ResampleRule::bilinear, false);
    dyn("precip_max", "m", ResampleRule::bilinear, false);
    // satellite vegetation/surface state, shifted forward one day
    dyn("fpar", "1", ResampleRule::nearest, true);
    dyn("lai", "1", ResampleRule::nearest, true);
    dyn("lst_day", "K", ResampleRule::nearest, true);
    dyn("lst_night", "K", ResampleRule::nearest, true);
    dyn("ndvi", "1", ResampleRule::nearest, true);
    dyn("evi", "1", ResampleRule::nearest, true);
    // static terrain and human factors
    stat("elevation", "m", ResampleRule::mean);
    stat("aspect", "deg", ResampleRule::mean);
    stat("slope", "deg", ResampleRule::mean);
    stat("roads_density", "km/km2", ResampleRule::mean);
    stat("population_density", "1/km2", ResampleRule::mean);
    // land cover: negative-sampling stratifier, excluded from model inputs
    s.vars.push_back(VariableSpec{"clc", VarKind::static_, VarRole::stratifier, "class",
                                  ResampleRule::mode, false});
    // burned target layer
    s.vars.push_back(VariableSpec{"burned", VarKind::dynamic, VarRole::target, "flag",
                                  ResampleRule::nearest, false});
    s.validate();
    return s;
}

}  // namespace pyrocast
