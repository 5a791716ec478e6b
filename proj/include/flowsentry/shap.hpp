#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowsentry/model.hpp"
#include "flowsentry/types.hpp"

namespace flowsentry {

// Exact enumeration is gated at 2^d coalitions.
inline constexpr int kShapExactMaxFeatures = 12;

struct ShapExplanation {
    Vector phi;              // one attribution per feature
    double baseline = 0;     // f(empty set): mean model output over the background
    double fx = 0;           // model output at x for the explained class
    int class_explained = 0;
    std::string method;      // "exact" | "sampled"
    int n_permutations = 0;  // sampled mode only
    std::uint64_t seed = 0;
    Vector stderr_per_feature;  // sampled mode; zeros for exact

    nlohmann::json to_json(const std::vector<std::string>& feature_names) const;
};

// Interventional value function: mean model output for target_class over the
// background rows with the features in `subset` pinned to x.
double coalition_value(const Model& model, ConstVectorRef x, const Matrix& background,
                       const std::vector<int>& subset, int target_class);

// Direct Shapley enumeration over all 2^d coalitions (d <= 12).
ShapExplanation shap_exact(const Model& model, ConstVectorRef x, const Matrix& background,
                           int target_class);

// Permutation-sampling estimator: mean marginal contribution over random
// feature orderings, with per-feature standard errors. Each permutation
// telescopes, so efficiency holds exactly for the average too.
ShapExplanation shap_sampled(const Model& model, ConstVectorRef x, const Matrix& background,
                             int target_class, int n_permutations = 200, std::uint64_t seed = 0);

}  // namespace flowsentry
