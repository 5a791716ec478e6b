#include "flowsentry/random_forest.hpp"

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "flowsentry/errors.hpp"

namespace flowsentry {

std::vector<int> bootstrap_indices(std::uint64_t seed, int tree_index, int n) {
    // Stream per tree: the base seed is offset by the tree index so trees are
    // independent yet individually reproducible.
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(tree_index + 1));
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = pick(rng);
    return idx;
}

Vector balanced_class_weights(const std::vector<int>& labels, int n_classes) {
    Vector counts = Vector::Zero(n_classes);
    for (int c : labels) {
        if (c < 0 || c >= n_classes) throw BadCodeError("label out of range: " + std::to_string(c));
        counts[c] += 1.0;
    }
    const double n = static_cast<double>(labels.size());
    Vector w(n_classes);
    for (int c = 0; c < n_classes; ++c) {
        w[c] = counts[c] > 0 ? n / (static_cast<double>(n_classes) * counts[c]) : 1.0;
    }
    return w;
}

RandomForest RandomForest::fit(const Matrix& rows, const std::vector<int>& labels,
                               const RandomForestConfig& cfg) {
    const int n = static_cast<int>(rows.rows());
    const int d = static_cast<int>(rows.cols());
    if (n == 0 || d == 0) throw EmptyDataError("cannot fit a forest on empty data");
    if (n != static_cast<int>(labels.size()))
        throw LengthMismatchError("rows and labels differ in length");
    if (cfg.t_trees < 1 || cfg.n_classes < 2 || cfg.max_depth < 0 || cfg.min_samples_leaf < 1 ||
        cfg.feature_fraction > 1.0)
        throw BadHyperparameterError("invalid forest configuration");

    RandomForest rf;
    rf.cfg_ = cfg;
    rf.input_dim_ = d;
    rf.class_weights_ = cfg.class_balanced ? balanced_class_weights(labels, cfg.n_classes)
                                           : Vector::Ones(cfg.n_classes);

    int per_split;
    if (cfg.feature_fraction <= 0) {
        per_split = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d))));
    } else {
        per_split = static_cast<int>(std::lround(cfg.feature_fraction * d));
    }
    per_split = std::max(1, std::min(per_split, d));

    rf.trees_.reserve(static_cast<size_t>(cfg.t_trees));
    for (int t = 0; t < cfg.t_trees; ++t) {
        const std::vector<int> draw = bootstrap_indices(cfg.seed, t, n);

        Matrix boot_rows(n, d);
        std::vector<int> boot_labels(static_cast<size_t>(n));
        Vector boot_weights(n);
        for (int i = 0; i < n; ++i) {
            const int src = draw[static_cast<size_t>(i)];
            boot_rows.row(i) = rows.row(src);
            boot_labels[static_cast<size_t>(i)] = labels[static_cast<size_t>(src)];
            boot_weights[i] = rf.class_weights_[labels[static_cast<size_t>(src)]];
        }

        // Separate stream for split-time feature draws, also offset per tree.
        std::mt19937_64 split_rng(cfg.seed + 0xbf58476d1ce4e5b9ULL *
                                                 static_cast<std::uint64_t>(t + 1));
        TreeFitConfig tree_cfg;
        tree_cfg.max_depth = cfg.max_depth;
        tree_cfg.min_samples_leaf = cfg.min_samples_leaf;
        tree_cfg.n_classes = cfg.n_classes;
        tree_cfg.features_per_split = (per_split < d) ? per_split : 0;
        tree_cfg.rng = &split_rng;
        rf.trees_.push_back(fit_tree(boot_rows, boot_labels, boot_weights, tree_cfg));
    }
    return rf;
}

void RandomForest::check_dim(ConstVectorRef x) const {
    if (x.size() != input_dim_)
        throw DimensionMismatchError("expected " + std::to_string(input_dim_) + " features, got " +
                                     std::to_string(x.size()));
}

Vector RandomForest::predict_proba(ConstVectorRef x) const {
    check_dim(x);
    Vector acc = Vector::Zero(cfg_.n_classes);
    for (const DecisionTree& tree : trees_) acc += tree.predict_hist(x);
    return acc / static_cast<double>(trees_.size());
}

int RandomForest::predict_class(ConstVectorRef x) const {
    check_dim(x);
    Vector votes = Vector::Zero(cfg_.n_classes);
    for (const DecisionTree& tree : trees_) votes[tree.predict_class(x)] += 1.0;
    return argmax_lowest(votes);
}

nlohmann::json RandomForest::hyperparameters_json() const {
    nlohmann::json j;
    j["t_trees"] = cfg_.t_trees;
    j["class_balanced"] = cfg_.class_balanced;
    j["feature_fraction"] = cfg_.feature_fraction;
    j["max_depth"] = cfg_.max_depth;
    j["min_samples_leaf"] = cfg_.min_samples_leaf;
    j["n_classes"] = cfg_.n_classes;
    j["seed"] = cfg_.seed;
    return j;
}

nlohmann::json RandomForest::parameters_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const DecisionTree& tree : trees_) trees.push_back(tree.to_json());
    nlohmann::json j;
    j["input_dim"] = input_dim_;
    j["class_weights"] = std::vector<double>(class_weights_.begin(), class_weights_.end());
    j["trees"] = std::move(trees);
    return j;
}

RandomForest RandomForest::from_json(const nlohmann::json& hyper, const nlohmann::json& params) {
    RandomForest rf;
    rf.cfg_.t_trees = hyper.at("t_trees").get<int>();
    rf.cfg_.class_balanced = hyper.at("class_balanced").get<bool>();
    rf.cfg_.feature_fraction = hyper.at("feature_fraction").get<double>();
    rf.cfg_.max_depth = hyper.at("max_depth").get<int>();
    rf.cfg_.min_samples_leaf = hyper.at("min_samples_leaf").get<int>();
    rf.cfg_.n_classes = hyper.at("n_classes").get<int>();
    rf.cfg_.seed = hyper.at("seed").get<std::uint64_t>();
    rf.input_dim_ = params.at("input_dim").get<int>();
    auto cw = params.at("class_weights").get<std::vector<double>>();
    rf.class_weights_ = Eigen::Map<const Vector>(cw.data(), static_cast<Eigen::Index>(cw.size()));
    for (const auto& tj : params.at("trees")) rf.trees_.push_back(DecisionTree::from_json(tj));
    if (rf.trees_.empty()) throw EmptyDataError("forest has no trees");
    return rf;
}

}  // namespace flowsentry
