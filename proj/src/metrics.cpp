#include "pyrocast/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "pyrocast/common.hpp"

namespace pyrocast {

namespace {

void check_inputs(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size())
        throw dimension_error("scores/labels length mismatch: " + std::to_string(scores.size()) +
                              " vs " + std::to_string(labels.size()));
    if (scores.empty()) throw parameter_error("empty score list");
    for (double s : scores)
        if (!std::isfinite(s)) throw numeric_error("non-finite score");
    for (auto l : labels)
        if (l > 1) throw parameter_error("labels must be 0 or 1");
}

}  // namespace

double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    check_inputs(scores, labels);
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    std::int64_t n_pos = 0, n_neg = 0;
    for (auto l : labels) (l ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw undefined_metric_error("auroc undefined: only one class present");

    // walk tie groups in ascending score order
    std::int64_t concordant2 = 0;  // 2*concordant + tied, accumulated exactly
    std::int64_t neg_below = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        std::int64_t group_pos = 0, group_neg = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] ? group_pos : group_neg)++;
            ++j;
        }
        concordant2 += 2 * group_pos * neg_below + group_pos * group_neg;
        neg_below += group_neg;
        i = j;
    }
    return static_cast<double>(concordant2) /
           (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MetricsReport threshold_metrics(const std::vector<double>& scores,
                                const std::vector<std::uint8_t>& labels, double threshold) {
    check_inputs(scores, labels);
    MetricsReport r;
    r.threshold = threshold;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        bool pred = scores[i] >= threshold;
        bool pos = labels[i] == 1;
        if (pos) {
            r.n_pos++;
            (pred ? r.tp : r.fn)++;
        } else {
            r.n_neg++;
            (pred ? r.fp : r.tn)++;
        }
    }
    if (r.tp + r.fp > 0)
        r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
    if (r.tp + r.fn > 0) r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    if (r.precision && r.recall && (*r.precision + *r.recall) > 0)
        r.f1 = 2.0 * *r.precision * *r.recall / (*r.precision + *r.recall);
    return r;
}

MetricsReport full_metrics(const std::vector<double>& scores,
                           const std::vector<std::uint8_t>& labels, double threshold) {
    MetricsReport r = threshold_metrics(scores, labels, threshold);
    if (r.n_pos > 0 && r.n_neg > 0) r.auroc = auroc(scores, labels);
    return r;
}

nlohmann::json MetricsReport::to_json() const {
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    std::vector<std::string> undefined;
    if (!precision) undefined.push_back("precision");
    if (!recall) undefined.push_back("recall");
    if (!f1) undefined.push_back("f1");
    if (!auroc) undefined.push_back("auroc");
    return nlohmann::json{
        {"threshold", threshold}, {"tp", tp},
        {"fp", fp},               {"tn", tn},
        {"fn", fn},               {"n_pos", n_pos},
        {"n_neg", n_neg},         {"precision", opt(precision)},
        {"recall", opt(recall)},  {"f1", opt(f1)},
        {"auroc", opt(auroc)},    {"undefined_metrics", undefined},
    };
}

}  // namespace pyrocast
