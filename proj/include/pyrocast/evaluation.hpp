#pragma once

#include <array>
#include <functional>
#include <iosfwd>

#include "pyrocast/datacube.hpp"
#include "pyrocast/metrics.hpp"
#include "pyrocast/sampling.hpp"

namespace pyrocast {

// Model adapter: one standardized payload in, one fire probability out.
// Evaluation and map rendering push every cell through the same single-sample
// call a user would make, so spot checks against predict_proba are bitwise.
// Must be safe to call from several threads at once.
struct Scorer {
    std::vector<std::int64_t> dims;  // expected payload shape
    std::function<double(const float*)> score;
};

struct EvalResult {
    MetricsReport report;
    std::vector<double> scores;  // one per record, in sample order
};

// Scores every record and derives threshold metrics plus AUROC. When
// `score_lines` is given, writes one JSON object per record
// (row, col, date, score, label) for offline re-analysis.
EvalResult evaluate(const SampleSource& samples, const Scorer& scorer, double threshold = 0.5,
                    std::ostream* score_lines = nullptr);

// One day of wall-to-wall predictions. NaN marks cells whose input window
// could not be assembled.
struct DangerMap {
    GridSpec grid;
    Date date;
    std::vector<float> scores;  // [rows * cols] row-major, in [0,1] or NaN
    nlohmann::json provenance;

    float at(std::int64_t row, std::int64_t col) const {
        return scores[static_cast<std::size_t>(row * grid.n_cols + col)];
    }
    void validate() const;
};

// Scores every grid cell of one day: extract the modality payload (edges
// replicate), standardize with the training stats (null = raw), score.
// Requires a full 10-day window inside the cube. Rows are rendered in
// parallel; each cell is owned by one worker, so any partition yields the
// identical array.
DangerMap render_map(const Datacube& cube, Modality m, Date date, const Standardization* stats,
                     const Scorer& scorer);

// Single-plane container file round-trip; NaN cells survive bit-exactly.
void save_map(const std::string& path, const DangerMap& map);
DangerMap load_map(const std::string& path);

// 256 fixed RGB triplets from blue (score 0) to dark red (score 1), the same
// ramp for every map so images are comparable across days. The copy in
// docs/colormap.txt is generated from this table.
const std::array<std::array<std::uint8_t, 3>, 256>& danger_colormap();

// Renders through danger_colormap with NaN cells gray.
void write_map_png(const std::string& path, const DangerMap& map);

}  // namespace pyrocast
