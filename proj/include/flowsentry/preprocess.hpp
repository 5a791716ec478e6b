#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowsentry/dataset.hpp"
#include "flowsentry/types.hpp"

namespace flowsentry {

// Fitted preprocessing state: feature selection by mutual information plus
// min-max scaling statistics. Fit once on the training split, then read-only.
struct PreprocessPlan {
    std::vector<std::string> input_schema;     // raw columns the plan expects
    bool engineered = false;                   // len_ratio / size_var appended
    std::vector<int> selected;                 // post-engineering column indices, ascending
    std::vector<std::string> selected_names;
    Vector mins;                               // per selected feature, training split
    Vector maxs;
    Vector mi_scores;                          // per post-engineering feature, nats
    std::uint64_t seed = 0;
    bool fitted = false;                       // scaling stats present

    nlohmann::json to_json() const;
    static PreprocessPlan from_json(const nlohmann::json& j);

    // engineer (if enabled) -> select -> scale, for raw rows matching input_schema.
    Matrix apply(const Matrix& raw_rows) const;
};

// Mutual information in nats between an equal-width-discretized feature and
// the class labels. Single bin when the feature is constant.
double mutual_information(ConstVectorRef feature, const std::vector<int>& labels, int bins);

// Ranks features by MI on the given (training) rows and keeps the top k;
// ties break toward the lower feature index. Returned plan has no scaling
// stats yet (fitted == false).
PreprocessPlan select_features(const LabeledDataset& train, int k, int bins = 10);

// Fills mins/maxs from the training rows restricted to plan.selected.
void fit_scaling(PreprocessPlan& plan, const Matrix& train_rows);

// Min-max scaling of already-selected columns with the plan's training
// statistics. Zero-range features map to 0; out-of-range values clip to [0,1].
Matrix normalize(const Matrix& rows, const PreprocessPlan& plan);

// Appends len_ratio = (fwd_bytes+1)/(bwd_bytes+1) and
// size_var = pkt_len_std/(pkt_len_mean+1e-9) as two new columns.
Matrix engineer_features(const Matrix& rows, const std::vector<std::string>& schema,
                         std::vector<std::string>* schema_out = nullptr);

struct PlanConfig {
    bool engineer = false;
    int top_k = 20;
    int mi_bins = 10;
    std::uint64_t seed = 0;
};

// Full fit on a training split: engineer -> MI selection -> scaling stats.
PreprocessPlan fit_plan(const LabeledDataset& train, const PlanConfig& cfg);

// SMOTE: every class is oversampled up to the majority count by interpolating
// between a minority row and one of its k nearest same-class neighbors.
// Originals are preserved as a prefix of the output. Deterministic per seed.
LabeledDataset smote_oversample(const LabeledDataset& ds, int k_neighbors = 5,
                                std::uint64_t seed = 0);

struct SplitSpec {
    double train_frac = 0.70;
    double val_frac = 0.15;
    double test_frac = 0.15;
    bool stratified = true;
    std::uint64_t seed = 0;
};

struct SplitResult {
    LabeledDataset train;
    LabeledDataset val;
    LabeledDataset test;
};

// Per-class proportional partition; remainders assigned by seeded shuffle.
SplitResult stratified_split(const LabeledDataset& ds, const SplitSpec& spec);

}  // namespace flowsentry
