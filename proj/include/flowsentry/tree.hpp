#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowsentry/types.hpp"

namespace flowsentry {

// Binary CART node. feature < 0 marks a leaf; leaves carry a class histogram
// normalized to sum 1. Split rule: x[feature] <= threshold goes left.
struct TreeNode {
    int feature = -1;
    Scalar threshold = 0;
    int left = -1;
    int right = -1;
    Vector histogram;

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    int max_depth = 0;
    int min_samples_leaf = 1;
    int n_classes = kNumGroups;

    const Vector& predict_hist(ConstVectorRef x) const;
    int predict_class(ConstVectorRef x) const;

    nlohmann::json to_json() const;
    static DecisionTree from_json(const nlohmann::json& j);
};

struct TreeFitConfig {
    int max_depth = 32;
    int min_samples_leaf = 1;
    int n_classes = kNumGroups;
    std::vector<int> feature_subset;  // empty = all features
    // When > 0, this many features are drawn (without replacement) from the
    // allowed set at every split; requires rng.
    int features_per_split = 0;
    std::mt19937_64* rng = nullptr;
};

// Greedy weighted-Gini CART. Deterministic: gain ties resolve to the lower
// feature index, then the lower threshold. Zero-gain splits are taken (only
// depth, purity and min_samples_leaf stop growth).
DecisionTree fit_tree(const Matrix& rows, const std::vector<int>& labels,
                      const Vector& sample_weights, const TreeFitConfig& cfg);

}  // namespace flowsentry
