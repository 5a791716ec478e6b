#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowsentry/model.hpp"
#include "flowsentry/tree.hpp"

namespace flowsentry {

struct RandomForestConfig {
    int t_trees = 150;
    bool class_balanced = true;
    // Fraction of features considered per split; <= 0 means sqrt(d)/d.
    double feature_fraction = -1.0;
    int max_depth = 32;
    int min_samples_leaf = 1;
    int n_classes = kNumGroups;
    std::uint64_t seed = 0;
};

// Bagged CART forest. Standalone classification is the hard majority vote of
// the per-tree argmaxes; predict_proba (mean of leaf histograms) is what
// ensembles consume.
class RandomForest : public Model {
public:
    static RandomForest fit(const Matrix& rows, const std::vector<int>& labels,
                            const RandomForestConfig& cfg);

    std::string kind() const override { return "random_forest"; }
    int input_dim() const override { return input_dim_; }
    int num_classes() const override { return cfg_.n_classes; }
    Vector predict_proba(ConstVectorRef x) const override;
    int predict_class(ConstVectorRef x) const override;  // majority vote, ties -> lowest code

    nlohmann::json hyperparameters_json() const override;
    nlohmann::json parameters_json() const override;
    static RandomForest from_json(const nlohmann::json& hyper, const nlohmann::json& params);

    const std::vector<DecisionTree>& trees() const { return trees_; }
    const Vector& class_weights() const { return class_weights_; }
    const RandomForestConfig& config() const { return cfg_; }

private:
    RandomForestConfig cfg_;
    std::vector<DecisionTree> trees_;
    Vector class_weights_;
    int input_dim_ = 0;

    void check_dim(ConstVectorRef x) const;
};

// The exact bootstrap draw rf uses for tree `tree_index` (n draws with
// replacement). Exposed so a single-tree forest is reproducible externally.
std::vector<int> bootstrap_indices(std::uint64_t seed, int tree_index, int n);

// n / (n_classes * count_c) for present classes, 1.0 for absent ones.
Vector balanced_class_weights(const std::vector<int>& labels, int n_classes);

}  // namespace flowsentry
