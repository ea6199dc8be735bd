#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pyrocast/rng.hpp"
#include "pyrocast/tensor.hpp"

namespace pyrocast {

// Flat pre-order tree node. For an internal node the left child is the next
// record and `b` is the index of the right child; for a leaf, (a, b) are the
// class counts observed at fit time.
struct TreeNode {
    std::uint8_t kind = 0;  // 0 internal, 1 leaf
    std::uint32_t a = 0;    // internal: feature index; leaf: class-0 count
    std::uint32_t b = 0;    // internal: right-child index; leaf: class-1 count
    double c = 0.0;         // internal: threshold (go left when x <= c)
};

struct ForestParams {
    int n_trees = 100;
    bool bootstrap = true;
    int features_per_split = 0;  // 0 -> ceil(sqrt(d))
    int min_samples_split = 2;
    int min_samples_leaf = 1;
};

struct ForestModel {
    ForestParams params;
    std::uint64_t seed = 0;
    std::int64_t n_features = 0;
    std::vector<std::vector<TreeNode>> trees;
    std::vector<std::uint64_t> tree_keys;  // stream key each tree was grown from
};

// Gini impurity of a two-class node: 1 - p0^2 - p1^2.
double gini_impurity(std::int64_t n0, std::int64_t n1);

// Greedy CART-style growth: Gini gain, midpoint thresholds between consecutive
// distinct values, ties broken to the lowest feature index then the lowest
// threshold. A midpoint that rounds up to the right-hand value falls back to
// the left-hand value, and samples route left when x <= threshold, so the
// stored threshold always reproduces the fit-time partition. Splitting stops
// on purity, on fewer than min_samples_split samples, or when no candidate has
// positive gain.
std::vector<TreeNode> fit_tree(const TensorF& x, const std::vector<std::uint8_t>& y,
                               const std::vector<std::int32_t>& sample_indices, RngStream rng,
                               const ForestParams& params);

ForestModel fit_forest(const TensorF& x, const std::vector<std::uint8_t>& y,
                       const ForestParams& params, std::uint64_t seed);

double tree_positive_fraction(const std::vector<TreeNode>& tree, const float* payload);

// Mean over trees of the leaf positive-class fraction.
double predict_proba(const ForestModel& model, const float* payload, std::int64_t len);

// `extra` fields merge into the file header (training provenance, input
// standardization, schema hash); they ride along untouched for load_forest.
void save_forest(const std::string& path, const ForestModel& model,
                 const nlohmann::json& extra = nlohmann::json::object());
ForestModel load_forest(const std::string& path, nlohmann::json* header_out = nullptr);

}  // namespace pyrocast
