#include "flowsentry/shap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "flowsentry/errors.hpp"

namespace flowsentry {

namespace {

void check_inputs(const Model& model, ConstVectorRef x, const Matrix& background,
                  int target_class) {
    if (background.rows() == 0) throw EmptyBackgroundError("background set is empty");
    if (x.size() != background.cols() || x.size() != model.input_dim())
        throw DimensionMismatchError("x, background and model disagree in feature count");
    if (target_class < 0 || target_class >= model.num_classes())
        throw BadCodeError("target class out of range");
}

// Mean target-class output over the background with `pinned` columns set to x.
double value_of(const Model& model, ConstVectorRef x, const Matrix& background,
                const std::vector<char>& pinned, int target_class) {
    Matrix work = background;
    for (Eigen::Index j = 0; j < work.cols(); ++j) {
        if (pinned[static_cast<size_t>(j)]) work.col(j).setConstant(x[j]);
    }
    double sum = 0;
    for (Eigen::Index i = 0; i < work.rows(); ++i)
        sum += model.predict_proba(work.row(i).transpose())[target_class];
    return sum / static_cast<double>(work.rows());
}

}  // namespace

double coalition_value(const Model& model, ConstVectorRef x, const Matrix& background,
                       const std::vector<int>& subset, int target_class) {
    check_inputs(model, x, background, target_class);
    std::vector<char> pinned(static_cast<size_t>(x.size()), 0);
    for (int j : subset) {
        if (j < 0 || j >= x.size()) throw BadCodeError("feature index out of range");
        pinned[static_cast<size_t>(j)] = 1;
    }
    return value_of(model, x, background, pinned, target_class);
}

ShapExplanation shap_exact(const Model& model, ConstVectorRef x, const Matrix& background,
                           int target_class) {
    check_inputs(model, x, background, target_class);
    const int d = static_cast<int>(x.size());
    if (d > kShapExactMaxFeatures)
        throw TooManyFeaturesError("exact attribution is limited to " +
                                   std::to_string(kShapExactMaxFeatures) + " features, got " +
                                   std::to_string(d));

    const std::uint32_t n_masks = 1u << d;
    std::vector<double> value(n_masks);
    std::vector<char> pinned(static_cast<size_t>(d));
    for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
        for (int j = 0; j < d; ++j) pinned[static_cast<size_t>(j)] = (mask >> j) & 1u;
        value[mask] = value_of(model, x, background, pinned, target_class);
    }

    // weight(|S|) = |S|! (d-|S|-1)! / d!
    std::vector<double> fact(static_cast<size_t>(d) + 1, 1.0);
    for (int i = 1; i <= d; ++i) fact[static_cast<size_t>(i)] = fact[static_cast<size_t>(i - 1)] * i;
    std::vector<double> weight(static_cast<size_t>(d));
    for (int s = 0; s < d; ++s)
        weight[static_cast<size_t>(s)] =
            fact[static_cast<size_t>(s)] * fact[static_cast<size_t>(d - s - 1)] / fact[static_cast<size_t>(d)];

    ShapExplanation exp;
    exp.phi = Vector::Zero(d);
    for (int i = 0; i < d; ++i) {
        const std::uint32_t bit = 1u << i;
        for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
            if (mask & bit) continue;
            const int s = __builtin_popcount(mask);
            exp.phi[i] += weight[static_cast<size_t>(s)] * (value[mask | bit] - value[mask]);
        }
    }
    exp.baseline = value[0];
    exp.fx = value[n_masks - 1];
    exp.class_explained = target_class;
    exp.method = "exact";
    exp.stderr_per_feature = Vector::Zero(d);
    return exp;
}

ShapExplanation shap_sampled(const Model& model, ConstVectorRef x, const Matrix& background,
                             int target_class, int n_permutations, std::uint64_t seed) {
    check_inputs(model, x, background, target_class);
    if (n_permutations < 1) throw BadHyperparameterError("need at least one permutation");
    const int d = static_cast<int>(x.size());

    std::vector<char> pinned(static_cast<size_t>(d), 0);
    const double baseline = value_of(model, x, background, pinned, target_class);

    Vector sum = Vector::Zero(d);
    Vector sum_sq = Vector::Zero(d);

    std::mt19937_64 rng(seed);
    std::vector<int> perm(static_cast<size_t>(d));
    std::iota(perm.begin(), perm.end(), 0);

    double fx = baseline;
    for (int p = 0; p < n_permutations; ++p) {
        std::shuffle(perm.begin(), perm.end(), rng);
        std::fill(pinned.begin(), pinned.end(), 0);
        double prev = baseline;
        for (int step = 0; step < d; ++step) {
            const int feature = perm[static_cast<size_t>(step)];
            pinned[static_cast<size_t>(feature)] = 1;
            const double cur = value_of(model, x, background, pinned, target_class);
            const double contribution = cur - prev;
            sum[feature] += contribution;
            sum_sq[feature] += contribution * contribution;
            prev = cur;
        }
        fx = prev;  // all features pinned: the model output at x itself
    }

    ShapExplanation exp;
    exp.phi = sum / static_cast<double>(n_permutations);
    exp.baseline = baseline;
    exp.fx = fx;
    exp.class_explained = target_class;
    exp.method = "sampled";
    exp.n_permutations = n_permutations;
    exp.seed = seed;
    exp.stderr_per_feature = Vector::Zero(d);
    if (n_permutations > 1) {
        const double np = static_cast<double>(n_permutations);
        for (int i = 0; i < d; ++i) {
            const double var =
                std::max(0.0, (sum_sq[i] - sum[i] * sum[i] / np) / (np - 1.0));
            exp.stderr_per_feature[i] = std::sqrt(var / np);
        }
    }
    return exp;
}

nlohmann::json ShapExplanation::to_json(const std::vector<std::string>& feature_names) const {
    if (static_cast<Eigen::Index>(feature_names.size()) != phi.size())
        throw LengthMismatchError("feature_names does not match the attribution length");
    nlohmann::json j;
    j["feature_names"] = feature_names;
    j["phi"] = std::vector<double>(phi.begin(), phi.end());
    j["baseline"] = baseline;
    j["fx"] = fx;
    j["class_explained"] = class_explained;
    if (class_explained >= 0 && class_explained < kNumGroups)
        j["class_name"] = group_name(class_explained);
    j["method"] = method;
    j["n_permutations"] = n_permutations;
    j["seed"] = seed;
    j["stderr_per_feature"] =
        std::vector<double>(stderr_per_feature.begin(), stderr_per_feature.end());
    return j;
}

}  // namespace flowsentry
