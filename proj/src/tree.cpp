#include "flowsentry/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "flowsentry/errors.hpp"

namespace flowsentry {

namespace {

struct SplitChoice {
    int feature = -1;
    Scalar threshold = 0;
    double gain = -std::numeric_limits<double>::infinity();
    std::int64_t left_count = 0;
};

double gini(const Vector& class_weight, double total) {
    if (total <= 0) return 0.0;
    return 1.0 - class_weight.squaredNorm() / (total * total);
}

// Best weighted-Gini split of `idx` over one feature. Thresholds are midpoints
// between consecutive distinct values; candidates leaving fewer than
// min_samples_leaf rows on either side are skipped.
void scan_feature(const Matrix& rows, const std::vector<int>& labels, const Vector& weights,
                  const std::vector<Eigen::Index>& idx, int feature, int n_classes,
                  int min_samples_leaf, const Vector& total_counts, double total_weight,
                  double parent_impurity, SplitChoice& best) {
    std::vector<std::pair<Scalar, Eigen::Index>> vals;
    vals.reserve(idx.size());
    for (Eigen::Index i : idx) vals.emplace_back(rows(i, feature), i);
    std::sort(vals.begin(), vals.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    Vector left_counts = Vector::Zero(n_classes);
    double left_weight = 0;
    const std::int64_t n = static_cast<std::int64_t>(vals.size());

    for (std::int64_t i = 0; i + 1 < n; ++i) {
        const Eigen::Index row = vals[static_cast<size_t>(i)].second;
        const double w = weights[row];
        left_counts[labels[static_cast<size_t>(row)]] += w;
        left_weight += w;

        const Scalar lo = vals[static_cast<size_t>(i)].first;
        const Scalar hi = vals[static_cast<size_t>(i + 1)].first;
        if (lo == hi) continue;
        const std::int64_t left_n = i + 1;
        if (left_n < min_samples_leaf || n - left_n < min_samples_leaf) continue;

        const double right_weight = total_weight - left_weight;
        const Vector right_counts = total_counts - left_counts;
        const double gain = parent_impurity -
                            (left_weight / total_weight) * gini(left_counts, left_weight) -
                            (right_weight / total_weight) * gini(right_counts, right_weight);
        if (gain > best.gain) {
            Scalar thr = (lo + hi) / 2;
            if (thr >= hi) thr = lo;  // adjacent floats: keep the partition exact
            best = {feature, thr, gain, left_n};
        }
    }
}

}  // namespace

const Vector& DecisionTree::predict_hist(ConstVectorRef x) const {
    int node = 0;
    while (!nodes[static_cast<size_t>(node)].is_leaf()) {
        const TreeNode& nd = nodes[static_cast<size_t>(node)];
        node = (x[nd.feature] <= nd.threshold) ? nd.left : nd.right;
    }
    return nodes[static_cast<size_t>(node)].histogram;
}

int DecisionTree::predict_class(ConstVectorRef x) const {
    return argmax_lowest(predict_hist(x));
}

nlohmann::json DecisionTree::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const TreeNode& nd : nodes) {
        nlohmann::json j;
        j["feature"] = nd.feature;
        j["threshold"] = nd.threshold;
        j["left"] = nd.left;
        j["right"] = nd.right;
        j["histogram"] = std::vector<double>(nd.histogram.begin(), nd.histogram.end());
        arr.push_back(std::move(j));
    }
    nlohmann::json j;
    j["nodes"] = std::move(arr);
    j["max_depth"] = max_depth;
    j["min_samples_leaf"] = min_samples_leaf;
    j["n_classes"] = n_classes;
    return j;
}

DecisionTree DecisionTree::from_json(const nlohmann::json& j) {
    DecisionTree tree;
    tree.max_depth = j.at("max_depth").get<int>();
    tree.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    tree.n_classes = j.at("n_classes").get<int>();
    for (const auto& nj : j.at("nodes")) {
        TreeNode nd;
        nd.feature = nj.at("feature").get<int>();
        nd.threshold = nj.at("threshold").get<Scalar>();
        nd.left = nj.at("left").get<int>();
        nd.right = nj.at("right").get<int>();
        auto hist = nj.at("histogram").get<std::vector<double>>();
        nd.histogram = Eigen::Map<const Vector>(hist.data(), static_cast<Eigen::Index>(hist.size()));
        tree.nodes.push_back(std::move(nd));
    }
    if (tree.nodes.empty()) throw EmptyDataError("tree has no nodes");
    return tree;
}

DecisionTree fit_tree(const Matrix& rows, const std::vector<int>& labels,
                      const Vector& sample_weights, const TreeFitConfig& cfg) {
    const Eigen::Index n = rows.rows();
    if (n == 0) throw EmptyDataError("cannot fit a tree on zero rows");
    if (n != static_cast<Eigen::Index>(labels.size()) || n != sample_weights.size())
        throw LengthMismatchError("rows, labels and sample_weights differ in length");
    if (cfg.max_depth < 0 || cfg.min_samples_leaf < 1 || cfg.n_classes < 2)
        throw BadHyperparameterError("invalid tree fit configuration");
    if (cfg.features_per_split > 0 && cfg.rng == nullptr)
        throw BadHyperparameterError("features_per_split requires an rng");
    if (sample_weights.minCoeff() < 0 || sample_weights.sum() <= 0)
        throw BadHyperparameterError("sample weights must be nonnegative and not all zero");
    for (int c : labels) {
        if (c < 0 || c >= cfg.n_classes)
            throw BadCodeError("label out of range: " + std::to_string(c));
    }

    std::vector<int> allowed = cfg.feature_subset;
    if (allowed.empty()) {
        allowed.resize(static_cast<size_t>(rows.cols()));
        std::iota(allowed.begin(), allowed.end(), 0);
    }

    DecisionTree tree;
    tree.max_depth = cfg.max_depth;
    tree.min_samples_leaf = cfg.min_samples_leaf;
    tree.n_classes = cfg.n_classes;

    struct Item {
        int node;
        std::vector<Eigen::Index> idx;
        int depth;
    };

    std::vector<Eigen::Index> all(static_cast<size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    tree.nodes.emplace_back();
    std::vector<Item> stack;
    stack.push_back({0, std::move(all), 0});

    auto make_leaf = [&](int node, const Vector& counts, double total) {
        tree.nodes[static_cast<size_t>(node)].feature = -1;
        tree.nodes[static_cast<size_t>(node)].histogram =
            (total > 0) ? Vector(counts / total)
                        : Vector(Vector::Constant(cfg.n_classes, 1.0 / cfg.n_classes));
    };

    while (!stack.empty()) {
        Item item = std::move(stack.back());
        stack.pop_back();

        Vector counts = Vector::Zero(cfg.n_classes);
        for (Eigen::Index i : item.idx) counts[labels[static_cast<size_t>(i)]] += sample_weights[i];
        const double total = counts.sum();
        const int present = static_cast<int>((counts.array() > 0).count());

        if (item.depth >= cfg.max_depth || present <= 1 ||
            static_cast<std::int64_t>(item.idx.size()) < 2 * cfg.min_samples_leaf) {
            make_leaf(item.node, counts, total);
            continue;
        }

        std::vector<int> candidates;
        if (cfg.features_per_split > 0 &&
            cfg.features_per_split < static_cast<int>(allowed.size())) {
            // Partial Fisher-Yates draw without replacement, then ascending so
            // gain ties still resolve to the lower feature index.
            std::vector<int> pool = allowed;
            for (int i = 0; i < cfg.features_per_split; ++i) {
                std::uniform_int_distribution<size_t> pick(static_cast<size_t>(i), pool.size() - 1);
                std::swap(pool[static_cast<size_t>(i)], pool[pick(*cfg.rng)]);
            }
            pool.resize(static_cast<size_t>(cfg.features_per_split));
            std::sort(pool.begin(), pool.end());
            candidates = std::move(pool);
        } else {
            candidates = allowed;
        }

        const double parent_impurity = gini(counts, total);
        SplitChoice best;
        for (int f : candidates) {
            scan_feature(rows, labels, sample_weights, item.idx, f, cfg.n_classes,
                         cfg.min_samples_leaf, counts, total, parent_impurity, best);
        }

        if (best.feature < 0) {  // no candidate feature admits a valid split
            make_leaf(item.node, counts, total);
            continue;
        }

        std::vector<Eigen::Index> left_idx, right_idx;
        left_idx.reserve(static_cast<size_t>(best.left_count));
        right_idx.reserve(item.idx.size() - static_cast<size_t>(best.left_count));
        for (Eigen::Index i : item.idx) {
            (rows(i, best.feature) <= best.threshold ? left_idx : right_idx).push_back(i);
        }

        const int left_node = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        const int right_node = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        TreeNode& nd = tree.nodes[static_cast<size_t>(item.node)];
        nd.feature = best.feature;
        nd.threshold = best.threshold;
        nd.left = left_node;
        nd.right = right_node;

        // Right pushed first so the left branch is processed (and numbered) first.
        stack.push_back({right_node, std::move(right_idx), item.depth + 1});
        stack.push_back({left_node, std::move(left_idx), item.depth + 1});
    }

    return tree;
}

}  // namespace flowsentry
