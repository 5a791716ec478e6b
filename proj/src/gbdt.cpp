#include "flowsentry/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "flowsentry/errors.hpp"

namespace flowsentry {

Vector softmax(ConstVectorRef logits) {
    const double m = logits.maxCoeff();
    Vector e = (logits.array() - m).exp();
    return e / e.sum();
}

Scalar RegressionTree::predict(ConstVectorRef x) const {
    int node = 0;
    while (!nodes[static_cast<size_t>(node)].is_leaf()) {
        const RegNode& nd = nodes[static_cast<size_t>(node)];
        node = (x[nd.feature] <= nd.threshold) ? nd.left : nd.right;
    }
    return nodes[static_cast<size_t>(node)].value;
}

int RegressionTree::leaf_count() const {
    int count = 0;
    for (const RegNode& nd : nodes) count += nd.is_leaf() ? 1 : 0;
    return count;
}

namespace {

struct SplitInfo {
    int feature = -1;
    Scalar threshold = 0;
    double gain = 0;
    std::int64_t left_count = 0;
};

struct LeafState {
    int node = -1;
    std::vector<int> idx;
    double grad_sum = 0;
    double hess_sum = 0;
    int depth = 0;
    SplitInfo best;  // feature < 0 when the leaf cannot be split further
};

double side_score(double g, double h, double lambda) {
    const double denom = h + lambda;
    return denom > 0 ? g * g / denom : 0.0;
}

// Best second-order split of one leaf: maximizes
// 1/2 (G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)) - gamma.
// Ties resolve to the lower feature index, then the lower threshold.
SplitInfo best_split(const Matrix& rows, const Vector& grad, const Vector& hess,
                     const LeafState& leaf, const GbdtConfig& cfg) {
    SplitInfo best;
    best.gain = 0;  // only strictly positive gains justify a split
    const double parent_score = side_score(leaf.grad_sum, leaf.hess_sum, cfg.lambda_l2);
    const std::int64_t n = static_cast<std::int64_t>(leaf.idx.size());

    std::vector<std::pair<Scalar, int>> vals(static_cast<size_t>(n));
    for (int f = 0; f < rows.cols(); ++f) {
        for (std::int64_t i = 0; i < n; ++i) {
            const int row = leaf.idx[static_cast<size_t>(i)];
            vals[static_cast<size_t>(i)] = {rows(row, f), row};
        }
        std::sort(vals.begin(), vals.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        if (vals.front().first == vals.back().first) continue;

        double gl = 0, hl = 0;
        for (std::int64_t i = 0; i + 1 < n; ++i) {
            const int row = vals[static_cast<size_t>(i)].second;
            gl += grad[row];
            hl += hess[row];
            const Scalar lo = vals[static_cast<size_t>(i)].first;
            const Scalar hi = vals[static_cast<size_t>(i + 1)].first;
            if (lo == hi) continue;
            const std::int64_t left_n = i + 1;
            if (left_n < cfg.min_samples_leaf || n - left_n < cfg.min_samples_leaf) continue;

            const double gain = 0.5 * (side_score(gl, hl, cfg.lambda_l2) +
                                       side_score(leaf.grad_sum - gl, leaf.hess_sum - hl,
                                                  cfg.lambda_l2) -
                                       parent_score) -
                                cfg.gamma_leaf;
            if (gain > best.gain) {
                Scalar thr = (lo + hi) / 2;
                if (thr >= hi) thr = lo;  // adjacent floats: keep the partition exact
                best = {f, thr, gain, left_n};
            }
        }
    }
    return best;
}

// One leaf-wise regression tree on (grad, hess); fills `leaf_of` with the
// final leaf value applied to every training row of this leaf.
RegressionTree grow_tree(const Matrix& rows, const Vector& grad, const Vector& hess,
                         const GbdtConfig& cfg, Vector& row_values) {
    RegressionTree tree;
    tree.nodes.emplace_back();

    LeafState root;
    root.node = 0;
    root.idx.resize(static_cast<size_t>(rows.rows()));
    std::iota(root.idx.begin(), root.idx.end(), 0);
    root.grad_sum = grad.sum();
    root.hess_sum = hess.sum();
    root.depth = 0;

    std::vector<LeafState> leaves;
    auto evaluate = [&](LeafState& leaf) {
        leaf.best = SplitInfo{};
        if (leaf.depth >= cfg.max_depth) return;
        if (static_cast<std::int64_t>(leaf.idx.size()) < 2 * cfg.min_samples_leaf) return;
        leaf.best = best_split(rows, grad, hess, leaf, cfg);
    };
    evaluate(root);
    leaves.push_back(std::move(root));

    int leaf_count = 1;
    while (leaf_count < cfg.max_leaves) {
        int pick = -1;
        for (size_t i = 0; i < leaves.size(); ++i) {
            if (leaves[i].best.feature < 0 || leaves[i].best.gain <= 0) continue;
            if (pick < 0 || leaves[i].best.gain > leaves[static_cast<size_t>(pick)].best.gain)
                pick = static_cast<int>(i);
        }
        if (pick < 0) break;

        LeafState leaf = std::move(leaves[static_cast<size_t>(pick)]);
        leaves.erase(leaves.begin() + pick);

        LeafState left, right;
        left.depth = right.depth = leaf.depth + 1;
        left.idx.reserve(static_cast<size_t>(leaf.best.left_count));
        right.idx.reserve(leaf.idx.size() - static_cast<size_t>(leaf.best.left_count));
        for (int row : leaf.idx) {
            if (rows(row, leaf.best.feature) <= leaf.best.threshold) {
                left.idx.push_back(row);
                left.grad_sum += grad[row];
                left.hess_sum += hess[row];
            } else {
                right.idx.push_back(row);
                right.grad_sum += grad[row];
                right.hess_sum += hess[row];
            }
        }

        left.node = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        right.node = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        RegNode& nd = tree.nodes[static_cast<size_t>(leaf.node)];
        nd.feature = leaf.best.feature;
        nd.threshold = leaf.best.threshold;
        nd.left = left.node;
        nd.right = right.node;

        evaluate(left);
        evaluate(right);
        leaves.push_back(std::move(left));
        leaves.push_back(std::move(right));
        ++leaf_count;
    }

    for (const LeafState& leaf : leaves) {
        const double denom = leaf.hess_sum + cfg.lambda_l2;
        const Scalar value = denom > 0 ? -leaf.grad_sum / denom : 0.0;
        tree.nodes[static_cast<size_t>(leaf.node)].value = value;
        for (int row : leaf.idx) row_values[row] = value;
    }
    return tree;
}

double log_loss(const Matrix& margins, const std::vector<int>& labels) {
    double loss = 0;
    for (Eigen::Index i = 0; i < margins.rows(); ++i) {
        const Vector p = softmax(margins.row(i).transpose());
        loss -= std::log(std::max(p[labels[static_cast<size_t>(i)]], 1e-15));
    }
    return loss / static_cast<double>(margins.rows());
}

}  // namespace

BoostedTrees BoostedTrees::fit(const Matrix& rows, const std::vector<int>& labels,
                               const GbdtConfig& cfg) {
    const Eigen::Index n = rows.rows();
    if (n < 2 || rows.cols() == 0) throw EmptyDataError("need at least two rows to boost");
    if (n != static_cast<Eigen::Index>(labels.size()))
        throw LengthMismatchError("rows and labels differ in length");
    if (cfg.rounds < 1 || cfg.learning_rate <= 0 || cfg.learning_rate > 1 || cfg.max_depth < 0 ||
        cfg.max_leaves < 1 || cfg.lambda_l2 < 0 || cfg.gamma_leaf < 0 ||
        cfg.min_samples_leaf < 1 || cfg.n_classes < 2)
        throw BadHyperparameterError("invalid boosting configuration");
    for (int c : labels) {
        if (c < 0 || c >= cfg.n_classes)
            throw BadCodeError("label out of range: " + std::to_string(c));
    }

    BoostedTrees model;
    model.cfg_ = cfg;
    model.input_dim_ = static_cast<int>(rows.cols());
    model.base_scores_ = Vector::Zero(cfg.n_classes);
    model.rounds_.reserve(static_cast<size_t>(cfg.rounds));
    model.train_loss_.reserve(static_cast<size_t>(cfg.rounds));

    Matrix margins = Matrix::Zero(n, cfg.n_classes);
    Vector grad(n), hess(n), row_values(n);

    for (int t = 0; t < cfg.rounds; ++t) {
        Matrix probs(n, cfg.n_classes);
        for (Eigen::Index i = 0; i < n; ++i)
            probs.row(i) = softmax(margins.row(i).transpose()).transpose();

        std::vector<RegressionTree> round_trees;
        round_trees.reserve(static_cast<size_t>(cfg.n_classes));
        for (int c = 0; c < cfg.n_classes; ++c) {
            for (Eigen::Index i = 0; i < n; ++i) {
                const double p = probs(i, c);
                const double y = labels[static_cast<size_t>(i)] == c ? 1.0 : 0.0;
                grad[i] = p - y;
                hess[i] = p * (1.0 - p);
            }
            round_trees.push_back(grow_tree(rows, grad, hess, cfg, row_values));
            margins.col(c) += cfg.learning_rate * row_values;
        }
        model.rounds_.push_back(std::move(round_trees));
        model.train_loss_.push_back(log_loss(margins, labels));
    }
    return model;
}

Vector BoostedTrees::predict_margins(ConstVectorRef x) const {
    if (x.size() != input_dim_)
        throw DimensionMismatchError("expected " + std::to_string(input_dim_) + " features, got " +
                                     std::to_string(x.size()));
    Vector m = base_scores_;
    for (const auto& round : rounds_) {
        for (int c = 0; c < cfg_.n_classes; ++c) {
            m[c] += cfg_.learning_rate * round[static_cast<size_t>(c)].predict(x);
        }
    }
    return m;
}

Vector BoostedTrees::predict_proba(ConstVectorRef x) const { return softmax(predict_margins(x)); }

void BoostedTrees::set_structure(GbdtConfig cfg, int input_dim, Vector base_scores,
                                 std::vector<std::vector<RegressionTree>> rounds) {
    if (base_scores.size() != cfg.n_classes)
        throw DimensionMismatchError("base_scores length must equal n_classes");
    for (const auto& round : rounds) {
        if (static_cast<int>(round.size()) != cfg.n_classes)
            throw DimensionMismatchError("every round needs one tree per class");
        for (const auto& tree : round) {
            if (tree.nodes.empty()) throw EmptyDataError("regression tree has no nodes");
            if (tree.leaf_count() > cfg.max_leaves)
                throw BadHyperparameterError("tree exceeds max_leaves");
        }
    }
    cfg_ = cfg;
    input_dim_ = input_dim;
    base_scores_ = std::move(base_scores);
    rounds_ = std::move(rounds);
    train_loss_.clear();
}

nlohmann::json BoostedTrees::hyperparameters_json() const {
    nlohmann::json j;
    j["rounds"] = cfg_.rounds;
    j["learning_rate"] = cfg_.learning_rate;
    j["max_depth"] = cfg_.max_depth;
    j["max_leaves"] = cfg_.max_leaves;
    j["lambda_l2"] = cfg_.lambda_l2;
    j["gamma_leaf"] = cfg_.gamma_leaf;
    j["min_samples_leaf"] = cfg_.min_samples_leaf;
    j["n_classes"] = cfg_.n_classes;
    j["seed"] = cfg_.seed;
    return j;
}

namespace {

nlohmann::json reg_tree_to_json(const RegressionTree& tree) {
    nlohmann::json arr = nlohmann::json::array();
    for (const RegNode& nd : tree.nodes) {
        nlohmann::json j;
        j["feature"] = nd.feature;
        j["threshold"] = nd.threshold;
        j["left"] = nd.left;
        j["right"] = nd.right;
        j["value"] = nd.value;
        arr.push_back(std::move(j));
    }
    return arr;
}

RegressionTree reg_tree_from_json(const nlohmann::json& arr) {
    RegressionTree tree;
    for (const auto& nj : arr) {
        RegNode nd;
        nd.feature = nj.at("feature").get<int>();
        nd.threshold = nj.at("threshold").get<Scalar>();
        nd.left = nj.at("left").get<int>();
        nd.right = nj.at("right").get<int>();
        nd.value = nj.at("value").get<Scalar>();
        tree.nodes.push_back(nd);
    }
    return tree;
}

}  // namespace

nlohmann::json BoostedTrees::parameters_json() const {
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& round : rounds_) {
        nlohmann::json rj = nlohmann::json::array();
        for (const auto& tree : round) rj.push_back(reg_tree_to_json(tree));
        rounds.push_back(std::move(rj));
    }
    nlohmann::json j;
    j["input_dim"] = input_dim_;
    j["base_scores"] = std::vector<double>(base_scores_.begin(), base_scores_.end());
    j["rounds"] = std::move(rounds);
    j["train_loss"] = train_loss_;
    return j;
}

BoostedTrees BoostedTrees::from_json(const nlohmann::json& hyper, const nlohmann::json& params) {
    GbdtConfig cfg;
    cfg.rounds = hyper.at("rounds").get<int>();
    cfg.learning_rate = hyper.at("learning_rate").get<double>();
    cfg.max_depth = hyper.at("max_depth").get<int>();
    cfg.max_leaves = hyper.at("max_leaves").get<int>();
    cfg.lambda_l2 = hyper.at("lambda_l2").get<double>();
    cfg.gamma_leaf = hyper.at("gamma_leaf").get<double>();
    cfg.min_samples_leaf = hyper.at("min_samples_leaf").get<int>();
    cfg.n_classes = hyper.at("n_classes").get<int>();
    cfg.seed = hyper.at("seed").get<std::uint64_t>();

    auto bs = params.at("base_scores").get<std::vector<double>>();
    Vector base = Eigen::Map<const Vector>(bs.data(), static_cast<Eigen::Index>(bs.size()));
    std::vector<std::vector<RegressionTree>> rounds;
    for (const auto& rj : params.at("rounds")) {
        std::vector<RegressionTree> round;
        for (const auto& tj : rj) round.push_back(reg_tree_from_json(tj));
        rounds.push_back(std::move(round));
    }

    BoostedTrees model;
    model.set_structure(cfg, params.at("input_dim").get<int>(), std::move(base),
                        std::move(rounds));
    model.train_loss_ = params.at("train_loss").get<std::vector<double>>();
    return model;
}

}  // namespace flowsentry
