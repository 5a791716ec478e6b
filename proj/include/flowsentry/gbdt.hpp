#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowsentry/model.hpp"
#include "flowsentry/types.hpp"

namespace flowsentry {

// Regression tree node for boosting; leaves carry an additive margin value.
struct RegNode {
    int feature = -1;
    Scalar threshold = 0;
    int left = -1;
    int right = -1;
    Scalar value = 0;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<RegNode> nodes;

    Scalar predict(ConstVectorRef x) const;
    int leaf_count() const;
};

struct GbdtConfig {
    int rounds = 100;
    double learning_rate = 0.05;
    int max_depth = 10;
    int max_leaves = 64;
    double lambda_l2 = 1.0;
    double gamma_leaf = 0.0;
    int min_samples_leaf = 1;
    int n_classes = kNumGroups;
    std::uint64_t seed = 0;
};

// Leaf-wise gradient-boosted trees with a softmax cross-entropy objective.
// Each round fits one second-order regression tree per class to the softmax
// gradient/Hessian statistics; leaf value = -G/(H + lambda). The leaf with
// the largest split gain is expanded first, until max_leaves or max_depth.
class BoostedTrees : public Model {
public:
    BoostedTrees() = default;

    static BoostedTrees fit(const Matrix& rows, const std::vector<int>& labels,
                            const GbdtConfig& cfg);

    std::string kind() const override { return "gbdt"; }
    int input_dim() const override { return input_dim_; }
    int num_classes() const override { return cfg_.n_classes; }
    Vector predict_proba(ConstVectorRef x) const override;

    // base_scores + learning_rate * sum of per-round tree outputs, per class.
    Vector predict_margins(ConstVectorRef x) const;

    nlohmann::json hyperparameters_json() const override;
    nlohmann::json parameters_json() const override;
    static BoostedTrees from_json(const nlohmann::json& hyper, const nlohmann::json& params);

    const std::vector<std::vector<RegressionTree>>& rounds() const { return rounds_; }
    const Vector& base_scores() const { return base_scores_; }
    const std::vector<double>& train_loss() const { return train_loss_; }
    const GbdtConfig& config() const { return cfg_; }

    // Construction hooks for tests and deserialization.
    void set_structure(GbdtConfig cfg, int input_dim, Vector base_scores,
                       std::vector<std::vector<RegressionTree>> rounds);

private:
    GbdtConfig cfg_;
    int input_dim_ = 0;
    Vector base_scores_;                              // per class
    std::vector<std::vector<RegressionTree>> rounds_; // rounds_[t][c]
    std::vector<double> train_loss_;                  // multiclass log-loss per round
};

Vector softmax(ConstVectorRef logits);

}  // namespace flowsentry
