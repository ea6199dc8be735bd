#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pyrocast/common.hpp"

namespace pyrocast {

struct GridSpec {
    std::int64_t n_rows = 0;
    std::int64_t n_cols = 0;
    // projected coordinates of the top-left grid corner, in meters; row 0 is
    // the northernmost row, so y decreases as row grows
    double origin_x = 0.0;
    double origin_y = 0.0;
    double cell_size = 1000.0;
    std::string projection = "local-meters";

    void validate() const {
        if (n_rows <= 0 || n_cols <= 0) throw grid_error("grid dimensions must be positive");
        if (cell_size <= 0) throw grid_error("grid cell size must be positive");
    }
    // cell-center coordinates
    double center_x(std::int64_t col) const { return origin_x + (col + 0.5) * cell_size; }
    double center_y(std::int64_t row) const { return origin_y - (row + 0.5) * cell_size; }

    bool operator==(const GridSpec&) const = default;

    nlohmann::json to_json() const;
    static GridSpec from_json(const nlohmann::json& j);
    // 562 rows x 700 cols of 1 km cells
    static GridSpec reference();
};

enum class VarKind { dynamic, static_ };
enum class VarRole { input, stratifier, target };
enum class ResampleRule { bilinear, mean, mode, nearest };

struct VariableSpec {
    std::string name;
    VarKind kind = VarKind::dynamic;
    VarRole role = VarRole::input;
    std::string units;
    ResampleRule resample = ResampleRule::nearest;
    bool shift_forward = false;  // satellite-derived variables

    bool operator==(const VariableSpec&) const = default;

    nlohmann::json to_json() const;
    static VariableSpec from_json(const nlohmann::json& j);
};

struct Schema {
    std::vector<VariableSpec> vars;

    void validate() const;
    std::int64_t index_of(const std::string& name) const;  // -1 when absent
    std::int64_t require(const std::string& name) const;   // schema_error when absent
    std::int64_t target_index() const;
    std::int64_t stratifier_index() const;
    std::vector<std::int64_t> dynamic_inputs() const;  // schema order
    std::vector<std::int64_t> static_inputs() const;
    // model input features: dynamic inputs then static inputs, schema order
    std::vector<std::int64_t> input_features() const;
    std::int64_t count(VarKind kind) const;

    // hash of the canonical serialized schema; files with mismatched hashes
    // are refused downstream
    std::uint64_t hash() const;

    bool operator==(const Schema&) const = default;

    nlohmann::json to_json() const;
    static Schema from_json(const nlohmann::json& j);
    // 13 dynamic inputs + 5 static inputs + land cover (stratifier) + burned
    // (target): the 19-feature reference layout plus the label layer
    static Schema reference();
};

std::string to_string(VarKind k);
std::string to_string(VarRole r);
std::string to_string(ResampleRule r);

}  // namespace pyrocast
