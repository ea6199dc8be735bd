#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "pyrocast/forest.hpp"
#include "pyrocast/tensor.hpp"

// Brute-force reference tree. Independent of the production implementation:
// every feature is searched, candidate thresholds are re-derived from sorted
// distinct values, and child counts come from actually applying the
// x <= threshold test to every sample rather than from a prefix scan. Shares
// only the pinned contract: Gini gain, midpoint thresholds (falling back to
// the left value if the midpoint rounds up to the right value), ties to the
// lowest feature index then lowest threshold, splits need positive gain.
namespace tree_oracle {

inline double gini_of(std::int64_t c0, std::int64_t c1, std::int64_t n) {
    double p0 = static_cast<double>(c0) / static_cast<double>(n);
    double p1 = static_cast<double>(c1) / static_cast<double>(n);
    return 1.0 - p0 * p0 - p1 * p1;
}

inline void grow(const pyrocast::TensorF& x, const std::vector<std::uint8_t>& y,
                 std::vector<std::int32_t> samples, int min_samples_split, int min_samples_leaf,
                 std::vector<pyrocast::TreeNode>& out) {
    const std::int64_t d = x.dim(1);
    const std::int64_t n = static_cast<std::int64_t>(samples.size());
    std::int64_t c0 = 0, c1 = 0;
    for (auto s : samples) (y[s] == 0 ? c0 : c1)++;
    auto make_leaf = [&] {
        out.push_back(pyrocast::TreeNode{1, static_cast<std::uint32_t>(c0),
                                         static_cast<std::uint32_t>(c1), 0.0});
    };
    if (c0 == 0 || c1 == 0 || n < min_samples_split) {
        make_leaf();
        return;
    }

    double best_gain = 0.0, best_thr = 0.0;
    std::int64_t best_feature = -1;
    const double g_parent = gini_of(c0, c1, n);
    for (std::int64_t f = 0; f < d; ++f) {
        std::vector<float> vals;
        vals.reserve(samples.size());
        for (auto s : samples) vals.push_back(x[s * d + f]);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
            double thr = (static_cast<double>(vals[i]) + static_cast<double>(vals[i + 1])) / 2.0;
            if (thr >= static_cast<double>(vals[i + 1])) thr = static_cast<double>(vals[i]);
            std::int64_t l0 = 0, l1 = 0, r0 = 0, r1 = 0;
            for (auto s : samples) {
                bool left = static_cast<double>(x[s * d + f]) <= thr;
                if (y[s] == 0)
                    (left ? l0 : r0)++;
                else
                    (left ? l1 : r1)++;
            }
            std::int64_t nl = l0 + l1, nr = r0 + r1;
            if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
            double gain = g_parent -
                          (static_cast<double>(nl) / static_cast<double>(n)) *
                              gini_of(l0, l1, nl) -
                          (static_cast<double>(nr) / static_cast<double>(n)) *
                              gini_of(r0, r1, nr);
            if (gain > best_gain) {
                best_gain = gain;
                best_feature = f;
                best_thr = thr;
            }
        }
    }
    if (best_feature < 0) {
        make_leaf();
        return;
    }

    std::vector<std::int32_t> left, right;
    for (auto s : samples)
        (static_cast<double>(x[s * d + best_feature]) <= best_thr ? left : right).push_back(s);
    std::size_t self = out.size();
    out.push_back(pyrocast::TreeNode{0, static_cast<std::uint32_t>(best_feature), 0, best_thr});
    grow(x, y, std::move(left), min_samples_split, min_samples_leaf, out);
    out[self].b = static_cast<std::uint32_t>(out.size());
    grow(x, y, std::move(right), min_samples_split, min_samples_leaf, out);
}

inline std::vector<pyrocast::TreeNode> fit(const pyrocast::TensorF& x,
                                           const std::vector<std::uint8_t>& y,
                                           int min_samples_split = 2, int min_samples_leaf = 1) {
    std::vector<std::int32_t> all(x.dim(0));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::int32_t>(i);
    std::vector<pyrocast::TreeNode> out;
    grow(x, y, std::move(all), min_samples_split, min_samples_leaf, out);
    return out;
}

inline bool same_structure(const std::vector<pyrocast::TreeNode>& a,
                           const std::vector<pyrocast::TreeNode>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].kind != b[i].kind || a[i].a != b[i].a || a[i].b != b[i].b) return false;
        if (a[i].kind == 0 && a[i].c != b[i].c) return false;  // thresholds bitwise
    }
    return true;
}

}  // namespace tree_oracle
