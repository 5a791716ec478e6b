#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowsentry/dataset.hpp"
#include "flowsentry/model.hpp"

namespace flowsentry {

enum class VoteMode { Soft, Weighted };

struct VoteResult {
    int cls = 0;
    Vector probs;
};

// Unweighted mean of the member probability rows (M x C); argmax with ties
// to the lowest class code. Rows must be valid distributions (1e-6).
VoteResult soft_vote(const Matrix& member_probs);

// Convex mix of member probability rows; weights must be nonnegative and sum
// to 1 within 1e-9.
VoteResult weighted_vote(const Matrix& member_probs, ConstVectorRef weights);

struct WeightSearchResult {
    Vector weights;
    double best_metric = 0.0;
    // (grid point, validation macro-F1) in evaluation order, for audit.
    std::vector<std::pair<std::vector<double>, double>> log;
};

// Exhaustive simplex grid at the given step, maximizing validation macro-F1;
// ties go to the lexicographically smallest weight vector. member_probs[m] is
// the m-th member's n x C probability matrix on the validation rows.
WeightSearchResult search_weights_probs(const std::vector<Matrix>& member_probs,
                                        const std::vector<int>& labels, double step = 0.1);

WeightSearchResult search_weights(const std::vector<const Model*>& members,
                                  const Matrix& val_rows, const std::vector<int>& val_labels,
                                  double step = 0.1);

// Probability-voting ensemble over owned member models.
class EnsembleModel : public Model {
public:
    EnsembleModel() = default;
    EnsembleModel(std::vector<std::unique_ptr<Model>> members, Vector weights, VoteMode mode);

    std::string kind() const override { return "ensemble"; }
    int input_dim() const override;
    int num_classes() const override;
    Vector predict_proba(ConstVectorRef x) const override;

    nlohmann::json hyperparameters_json() const override;
    nlohmann::json parameters_json() const override;
    static EnsembleModel from_json(const nlohmann::json& hyper, const nlohmann::json& params);

    const std::vector<std::unique_ptr<Model>>& members() const { return members_; }
    const Vector& weights() const { return weights_; }
    VoteMode mode() const { return mode_; }

    // Search log of the weight selection, when one was run.
    const std::vector<std::pair<std::vector<double>, double>>& search_log() const {
        return search_log_;
    }
    void set_search_log(std::vector<std::pair<std::vector<double>, double>> log) {
        search_log_ = std::move(log);
    }

private:
    std::vector<std::unique_ptr<Model>> members_;
    Vector weights_;
    VoteMode mode_ = VoteMode::Soft;
    std::vector<std::pair<std::vector<double>, double>> search_log_;
};

struct V2BuildConfig {
    int rf_trees = 150;
    bool rf_class_balanced = true;
    int gbdt_rounds = 100;
    double gbdt_learning_rate = 0.05;
    int gbdt_max_depth = 10;
    int gbdt_max_leaves = 64;
    std::vector<int> mlp_hidden = {256, 128, 64};
    int mlp_epochs = 40;
    int mlp_batch_size = 128;
    double mlp_learning_rate = 1e-3;
    double search_step = 0.1;
    std::uint64_t seed = 0;
};

struct V2BuildResult {
    EnsembleModel model;
    WeightSearchResult search;
};

// Fits RF (150 trees, class-balanced), leaf-wise boosted trees (depth 10,
// 64 leaves, lr 0.05) and the 256-128-64 MLP, then selects voting weights on
// the validation split.
V2BuildResult build_v2(const Matrix& train_rows, const std::vector<int>& train_labels,
                       const Matrix& val_rows, const std::vector<int>& val_labels,
                       const V2BuildConfig& cfg = {});

}  // namespace flowsentry
