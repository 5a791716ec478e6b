#include "flowsentry/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "flowsentry/errors.hpp"

namespace flowsentry {

ConfusionMatrix confusion_matrix(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    if (y_true.size() != y_pred.size())
        throw LengthMismatchError("y_true and y_pred differ in length");

    ConfusionMatrix cm{};
    for (size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i];
        const int p = y_pred[i];
        if (t < 0 || t >= kNumGroups || p < 0 || p >= kNumGroups)
            throw BadCodeError("label code out of range");
        cm[static_cast<size_t>(t)][static_cast<size_t>(p)]++;
    }
    return cm;
}

ClassificationReport classification_report(const std::vector<int>& y_true,
                                           const std::vector<int>& y_pred) {
    if (y_true.empty()) throw EmptyDataError("no predictions to score");
    ClassificationReport rep;
    rep.confusion = confusion_matrix(y_true, y_pred);

    std::int64_t correct = 0;
    std::int64_t total_support = 0;
    double macro_p = 0, macro_r = 0, macro_f = 0;
    double weighted_p = 0, weighted_r = 0, weighted_f = 0;

    for (int c = 0; c < kNumGroups; ++c) {
        std::int64_t tp = rep.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)];
        std::int64_t fp = 0, fn = 0, support = 0;
        for (int o = 0; o < kNumGroups; ++o) {
            if (o != c) {
                fp += rep.confusion[static_cast<size_t>(o)][static_cast<size_t>(c)];
                fn += rep.confusion[static_cast<size_t>(c)][static_cast<size_t>(o)];
            }
            support += rep.confusion[static_cast<size_t>(c)][static_cast<size_t>(o)];
        }
        correct += tp;
        total_support += support;

        ClassScores& s = rep.per_class[static_cast<size_t>(c)];
        s.support = support;
        if (tp + fp > 0) {
            s.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        } else {
            s.precision = 0;
            rep.zero_division_hit = true;
        }
        if (tp + fn > 0) {
            s.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        } else {
            s.recall = 0;
            rep.zero_division_hit = true;
        }
        if (s.precision + s.recall > 0) {
            s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
        } else {
            s.f1 = 0;
        }

        macro_p += s.precision;
        macro_r += s.recall;
        macro_f += s.f1;
        weighted_p += s.precision * static_cast<double>(support);
        weighted_r += s.recall * static_cast<double>(support);
        weighted_f += s.f1 * static_cast<double>(support);
    }

    rep.accuracy = static_cast<double>(correct) / static_cast<double>(total_support);
    rep.macro_avg = {macro_p / kNumGroups, macro_r / kNumGroups, macro_f / kNumGroups,
                     total_support};
    rep.weighted_avg = {weighted_p / static_cast<double>(total_support),
                        weighted_r / static_cast<double>(total_support),
                        weighted_f / static_cast<double>(total_support), total_support};
    return rep;
}

double macro_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    return classification_report(y_true, y_pred).macro_avg.f1;
}

nlohmann::json ClassificationReport::to_json() const {
    nlohmann::json j;
    for (int c = 0; c < kNumGroups; ++c) {
        const ClassScores& s = per_class[static_cast<size_t>(c)];
        j["per_class"][group_name(c)] = {{"precision", s.precision},
                                         {"recall", s.recall},
                                         {"f1", s.f1},
                                         {"support", s.support}};
    }
    j["accuracy"] = accuracy;
    j["macro_avg"] = {{"precision", macro_avg.precision},
                      {"recall", macro_avg.recall},
                      {"f1", macro_avg.f1},
                      {"support", macro_avg.support}};
    j["weighted_avg"] = {{"precision", weighted_avg.precision},
                         {"recall", weighted_avg.recall},
                         {"f1", weighted_avg.f1},
                         {"support", weighted_avg.support}};
    nlohmann::json cm = nlohmann::json::array();
    for (const auto& row : confusion) cm.push_back(row);
    j["confusion"] = std::move(cm);
    j["zero_division_hit"] = zero_division_hit;
    return j;
}

std::string ClassificationReport::to_text() const {
    // Classes alphabetically by name, then accuracy / macro avg / weighted avg.
    std::array<int, kNumGroups> order;
    for (int c = 0; c < kNumGroups; ++c) order[static_cast<size_t>(c)] = c;
    std::sort(order.begin(), order.end(),
              [](int a, int b) { return group_name(a) < group_name(b); });

    size_t name_width = std::string("weighted avg").size();
    for (int c = 0; c < kNumGroups; ++c) name_width = std::max(name_width, group_name(c).size());

    char line[160];
    std::string out;
    std::snprintf(line, sizeof(line), "%*s  %9s  %9s  %9s  %9s\n", static_cast<int>(name_width),
                  "", "precision", "recall", "f1-score", "support");
    out += line;
    out += "\n";
    for (int c : order) {
        const ClassScores& s = per_class[static_cast<size_t>(c)];
        std::snprintf(line, sizeof(line), "%*s  %9.4f  %9.4f  %9.4f  %9lld\n",
                      static_cast<int>(name_width), group_name(c).c_str(), s.precision, s.recall,
                      s.f1, static_cast<long long>(s.support));
        out += line;
    }
    out += "\n";
    std::snprintf(line, sizeof(line), "%*s  %9s  %9s  %9.4f  %9lld\n",
                  static_cast<int>(name_width), "accuracy", "", "", accuracy,
                  static_cast<long long>(macro_avg.support));
    out += line;
    std::snprintf(line, sizeof(line), "%*s  %9.4f  %9.4f  %9.4f  %9lld\n",
                  static_cast<int>(name_width), "macro avg", macro_avg.precision, macro_avg.recall,
                  macro_avg.f1, static_cast<long long>(macro_avg.support));
    out += line;
    std::snprintf(line, sizeof(line), "%*s  %9.4f  %9.4f  %9.4f  %9lld\n",
                  static_cast<int>(name_width), "weighted avg", weighted_avg.precision,
                  weighted_avg.recall, weighted_avg.f1,
                  static_cast<long long>(weighted_avg.support));
    out += line;
    return out;
}

}  // namespace flowsentry
