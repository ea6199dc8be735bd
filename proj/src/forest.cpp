#include "pyrocast/forest.hpp"

#include <algorithm>
#include <cmath>

#include "pyrocast/binio.hpp"

namespace pyrocast {

namespace {

struct SplitChoice {
    double gain = 0.0;
    std::int64_t feature = -1;
    double threshold = 0.0;
    std::int64_t n_left = 0;
};

double gini(double c0, double c1, double n) {
    double p0 = c0 / n, p1 = c1 / n;
    return 1.0 - p0 * p0 - p1 * p1;
}

struct TreeBuilder {
    const TensorF& x;
    const std::vector<std::uint8_t>& y;
    const ForestParams& params;
    RngStream rng;
    std::int64_t d;
    std::int64_t m;  // features considered per split
    std::vector<TreeNode> nodes;
    std::vector<std::int32_t> idx;
    std::vector<std::int64_t> feat_scratch;
    std::vector<std::pair<float, std::uint8_t>> sorted;

    // Chosen features in ascending order so the first strictly better candidate
    // wins ties by (lowest feature, lowest threshold).
    void choose_features(std::vector<std::int64_t>& out) {
        out.clear();
        if (m >= d) {
            for (std::int64_t f = 0; f < d; ++f) out.push_back(f);
            return;
        }
        for (std::int64_t f = 0; f < d; ++f) feat_scratch[f] = f;
        for (std::int64_t i = 0; i < m; ++i) {
            std::int64_t j = i + static_cast<std::int64_t>(rng.next_below(d - i));
            std::swap(feat_scratch[i], feat_scratch[j]);
        }
        out.assign(feat_scratch.begin(), feat_scratch.begin() + m);
        std::sort(out.begin(), out.end());
    }

    SplitChoice best_split(std::int64_t lo, std::int64_t hi, std::int64_t c0, std::int64_t c1,
                           const std::vector<std::int64_t>& features) {
        const std::int64_t n = hi - lo;
        const double g_parent = gini(static_cast<double>(c0), static_cast<double>(c1),
                                     static_cast<double>(n));
        SplitChoice best;
        for (std::int64_t f : features) {
            sorted.clear();
            for (std::int64_t i = lo; i < hi; ++i) {
                std::int32_t s = idx[i];
                sorted.emplace_back(x[s * d + f], y[s]);
            }
            std::sort(sorted.begin(), sorted.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            std::int64_t l0 = 0, l1 = 0;
            for (std::int64_t i = 0; i + 1 < n; ++i) {
                if (sorted[i].second == 0)
                    ++l0;
                else
                    ++l1;
                if (!(sorted[i].first < sorted[i + 1].first)) continue;
                std::int64_t nl = i + 1, nr = n - nl;
                if (nl < params.min_samples_leaf || nr < params.min_samples_leaf) continue;
                double gl = gini(static_cast<double>(l0), static_cast<double>(l1),
                                 static_cast<double>(nl));
                double gr = gini(static_cast<double>(c0 - l0), static_cast<double>(c1 - l1),
                                 static_cast<double>(nr));
                double gain = g_parent -
                              (static_cast<double>(nl) / static_cast<double>(n)) * gl -
                              (static_cast<double>(nr) / static_cast<double>(n)) * gr;
                if (gain > best.gain) {
                    double thr = (static_cast<double>(sorted[i].first) +
                                  static_cast<double>(sorted[i + 1].first)) /
                                 2.0;
                    // guard against the midpoint rounding up to the right value
                    if (thr >= static_cast<double>(sorted[i + 1].first))
                        thr = static_cast<double>(sorted[i].first);
                    best.gain = gain;
                    best.feature = f;
                    best.threshold = thr;
                    best.n_left = nl;
                }
            }
        }
        return best;
    }

    void build(std::int64_t lo, std::int64_t hi) {
        std::int64_t c0 = 0, c1 = 0;
        for (std::int64_t i = lo; i < hi; ++i) (y[idx[i]] == 0 ? c0 : c1)++;
        const std::int64_t n = hi - lo;
        if (c0 == 0 || c1 == 0 || n < params.min_samples_split) {
            nodes.push_back(TreeNode{1, static_cast<std::uint32_t>(c0),
                                     static_cast<std::uint32_t>(c1), 0.0});
            return;
        }
        std::vector<std::int64_t> features;
        choose_features(features);
        SplitChoice split = best_split(lo, hi, c0, c1, features);
        if (split.feature < 0) {
            nodes.push_back(TreeNode{1, static_cast<std::uint32_t>(c0),
                                     static_cast<std::uint32_t>(c1), 0.0});
            return;
        }
        std::size_t self = nodes.size();
        nodes.push_back(TreeNode{0, static_cast<std::uint32_t>(split.feature), 0, split.threshold});
        auto mid = std::stable_partition(idx.begin() + lo, idx.begin() + hi,
                                         [&](std::int32_t s) {
                                             return static_cast<double>(x[s * d + split.feature]) <=
                                                    split.threshold;
                                         });
        std::int64_t nl = mid - (idx.begin() + lo);
        if (nl != split.n_left)
            throw state_error("tree partition does not match split counts");
        build(lo, lo + nl);
        nodes[self].b = static_cast<std::uint32_t>(nodes.size());
        build(lo + nl, hi);
    }
};

}  // namespace

double gini_impurity(std::int64_t n0, std::int64_t n1) {
    if (n0 + n1 == 0) throw parameter_error("gini_impurity of an empty node");
    return gini(static_cast<double>(n0), static_cast<double>(n1),
                static_cast<double>(n0 + n1));
}

std::vector<TreeNode> fit_tree(const TensorF& x, const std::vector<std::uint8_t>& y,
                               const std::vector<std::int32_t>& sample_indices, RngStream rng,
                               const ForestParams& params) {
    if (x.rank() != 2) throw dimension_error("fit_tree expects a [n,d] sample matrix");
    if (sample_indices.empty()) throw parameter_error("fit_tree: empty input");
    if (static_cast<std::int64_t>(y.size()) != x.dim(0))
        throw dimension_error("fit_tree: label count does not match sample count");
    TreeBuilder b{x, y, params, rng, x.dim(1), 0, {}, {}, {}, {}};
    b.m = params.features_per_split > 0
              ? std::min<std::int64_t>(params.features_per_split, b.d)
              : static_cast<std::int64_t>(
                    std::ceil(std::sqrt(static_cast<double>(b.d))));
    b.idx = sample_indices;
    b.feat_scratch.resize(b.d);
    b.build(0, static_cast<std::int64_t>(b.idx.size()));
    return std::move(b.nodes);
}

ForestModel fit_forest(const TensorF& x, const std::vector<std::uint8_t>& y,
                       const ForestParams& params, std::uint64_t seed) {
    if (x.rank() != 2) throw dimension_error("fit_forest expects a [n,d] sample matrix");
    std::int64_t n = x.dim(0);
    if (n < 2) throw parameter_error("fit_forest needs at least 2 samples");
    if (params.n_trees < 1) throw parameter_error("fit_forest: n_trees must be >= 1");
    ForestModel model;
    model.params = params;
    model.seed = seed;
    model.n_features = x.dim(1);
    model.trees.resize(params.n_trees);
    model.tree_keys.resize(params.n_trees);
    RngStream root(seed, "forest");
    for (int t = 0; t < params.n_trees; ++t)
        model.tree_keys[t] = root.split(static_cast<std::uint64_t>(t)).key();
    parallel_for(params.n_trees, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t t = lo; t < hi; ++t) {
            RngStream stream = root.split(static_cast<std::uint64_t>(t));
            std::vector<std::int32_t> indices;
            indices.reserve(n);
            if (params.bootstrap) {
                RngStream boot = stream.split("bootstrap");
                for (std::int64_t i = 0; i < n; ++i)
                    indices.push_back(static_cast<std::int32_t>(
                        boot.next_below(static_cast<std::uint64_t>(n))));
            } else {
                for (std::int64_t i = 0; i < n; ++i)
                    indices.push_back(static_cast<std::int32_t>(i));
            }
            model.trees[t] = fit_tree(x, y, indices, stream.split("splits"), params);
        }
    });
    return model;
}

double tree_positive_fraction(const std::vector<TreeNode>& tree, const float* payload) {
    std::size_t i = 0;
    while (tree[i].kind == 0) {
        const TreeNode& nd = tree[i];
        i = (static_cast<double>(payload[nd.a]) <= nd.c) ? i + 1 : nd.b;
    }
    double n0 = tree[i].a, n1 = tree[i].b;
    return n1 / (n0 + n1);
}

double predict_proba(const ForestModel& model, const float* payload, std::int64_t len) {
    if (len != model.n_features)
        throw dimension_error("predict_proba: payload length " + std::to_string(len) +
                              " does not match feature count " +
                              std::to_string(model.n_features));
    double acc = 0.0;
    for (const auto& tree : model.trees) acc += tree_positive_fraction(tree, payload);
    return acc / static_cast<double>(model.trees.size());
}

void save_forest(const std::string& path, const ForestModel& model, const nlohmann::json& extra) {
    auto os = binio::open_out(path);
    nlohmann::json header{
        {"format", "PRF1"},
        {"n_features", model.n_features},
        {"seed", model.seed},
        {"tree_keys", model.tree_keys},
        {"params",
         {{"n_trees", model.params.n_trees},
          {"bootstrap", model.params.bootstrap},
          {"features_per_split", model.params.features_per_split},
          {"min_samples_split", model.params.min_samples_split},
          {"min_samples_leaf", model.params.min_samples_leaf}}},
    };
    std::vector<std::uint32_t> counts;
    for (const auto& t : model.trees) counts.push_back(static_cast<std::uint32_t>(t.size()));
    header["tree_node_counts"] = counts;
    for (const auto& [key, value] : extra.items()) header[key] = value;
    binio::write_header(os, "PRF1", header);
    for (const auto& tree : model.trees)
        for (const TreeNode& nd : tree) {
            binio::write_raw(os, nd.kind);
            binio::write_raw(os, nd.a);
            binio::write_raw(os, nd.b);
            binio::write_raw(os, nd.c);
        }
    if (!os) throw runtime_failure("failed writing forest to '" + path + "'");
}

ForestModel load_forest(const std::string& path, nlohmann::json* header_out) {
    auto is = binio::open_in(path);
    nlohmann::json header = binio::read_header(is, "PRF1");
    if (header_out) *header_out = header;
    ForestModel model;
    try {
        model.n_features = header.at("n_features").get<std::int64_t>();
        model.seed = header.at("seed").get<std::uint64_t>();
        model.tree_keys = header.at("tree_keys").get<std::vector<std::uint64_t>>();
        const auto& p = header.at("params");
        model.params.n_trees = p.at("n_trees").get<int>();
        model.params.bootstrap = p.at("bootstrap").get<bool>();
        model.params.features_per_split = p.at("features_per_split").get<int>();
        model.params.min_samples_split = p.at("min_samples_split").get<int>();
        model.params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
        auto counts = header.at("tree_node_counts").get<std::vector<std::uint32_t>>();
        model.trees.resize(counts.size());
        for (std::size_t t = 0; t < counts.size(); ++t) {
            model.trees[t].resize(counts[t]);
            for (auto& nd : model.trees[t]) {
                nd.kind = binio::read_raw<std::uint8_t>(is);
                nd.a = binio::read_raw<std::uint32_t>(is);
                nd.b = binio::read_raw<std::uint32_t>(is);
                nd.c = binio::read_raw<double>(is);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("malformed forest header: ") + e.what());
    }
    return model;
}

}  // namespace pyrocast
