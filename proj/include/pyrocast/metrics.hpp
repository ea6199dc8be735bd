#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace pyrocast {

struct MetricsReport {
    double threshold = 0.5;
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::int64_t n_pos = 0, n_neg = 0;
    // Undefined metrics (e.g. precision with tp+fp = 0) stay unset and are
    // serialized as JSON null, never coerced to 0.
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> auroc;

    nlohmann::json to_json() const;
};

// Mann-Whitney AUROC with midrank tie handling, O(n log n). Concordant and
// tied pair counts are integers, so the result is exact up to one final
// division.
double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

// Confusion counts and derived metrics; positive prediction iff score >= threshold.
MetricsReport threshold_metrics(const std::vector<double>& scores,
                                const std::vector<std::uint8_t>& labels, double threshold);

// threshold_metrics plus AUROC (left undefined on single-class input).
MetricsReport full_metrics(const std::vector<double>& scores,
                           const std::vector<std::uint8_t>& labels, double threshold);

}  // namespace pyrocast
