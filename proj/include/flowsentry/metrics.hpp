#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowsentry/types.hpp"

namespace flowsentry {

using ConfusionMatrix = std::array<std::array<std::int64_t, kNumGroups>, kNumGroups>;

struct ClassScores {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    std::int64_t support = 0;
};

struct ClassificationReport {
    std::array<ClassScores, kNumGroups> per_class;
    double accuracy = 0;
    ClassScores macro_avg;     // unweighted mean over the 7 classes
    ClassScores weighted_avg;  // support-weighted mean
    ConfusionMatrix confusion; // rows = true, cols = predicted
    bool zero_division_hit = false;

    nlohmann::json to_json() const;
    std::string to_text() const;  // aligned classification-report table
};

// Standard per-class precision/recall/F1 with the zero-division -> 0
// convention. Label codes must lie in [0, 7).
ClassificationReport classification_report(const std::vector<int>& y_true,
                                           const std::vector<int>& y_pred);

ConfusionMatrix confusion_matrix(const std::vector<int>& y_true, const std::vector<int>& y_pred);

double macro_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred);

}  // namespace flowsentry
