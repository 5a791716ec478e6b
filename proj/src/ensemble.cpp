#include "flowsentry/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "flowsentry/errors.hpp"
#include "flowsentry/gbdt.hpp"
#include "flowsentry/metrics.hpp"
#include "flowsentry/mlp.hpp"
#include "flowsentry/random_forest.hpp"

namespace flowsentry {

namespace {

void check_rows_are_distributions(const Matrix& member_probs) {
    if (member_probs.rows() == 0) throw EmptyDataError("no member probabilities");
    for (Eigen::Index m = 0; m < member_probs.rows(); ++m) {
        if (member_probs.row(m).minCoeff() < 0 ||
            std::abs(member_probs.row(m).sum() - 1.0) > 1e-6)
            throw BadDistributionError("member probability row " + std::to_string(m) +
                                       " is not a distribution");
    }
}

}  // namespace

VoteResult soft_vote(const Matrix& member_probs) {
    if (member_probs.rows() == 0) throw EmptyDataError("no member probabilities");
    // Share the weighted path so uniform weights agree with soft voting exactly.
    const Eigen::Index m = member_probs.rows();
    return weighted_vote(member_probs, Vector::Constant(m, 1.0 / static_cast<double>(m)));
}

VoteResult weighted_vote(const Matrix& member_probs, ConstVectorRef weights) {
    check_rows_are_distributions(member_probs);
    if (weights.size() != member_probs.rows())
        throw BadWeightsError("one weight per member required");
    if (weights.minCoeff() < 0 || std::abs(weights.sum() - 1.0) > 1e-9)
        throw BadWeightsError("weights must be nonnegative and sum to 1");

    VoteResult res;
    res.probs = member_probs.transpose() * weights;
    res.cls = argmax_lowest(res.probs);
    return res;
}

WeightSearchResult search_weights_probs(const std::vector<Matrix>& member_probs,
                                        const std::vector<int>& labels, double step) {
    if (member_probs.empty()) throw EmptyDataError("no members to weight");
    if (step <= 0 || step > 1) throw BadStepError("step must lie in (0, 1]");
    const double q_real = 1.0 / step;
    const std::int64_t q = std::llround(q_real);
    if (std::abs(q_real - static_cast<double>(q)) > 1e-9)
        throw BadStepError("1/step must be an integer");

    const size_t m_count = member_probs.size();
    const Eigen::Index n = member_probs[0].rows();
    const Eigen::Index c = member_probs[0].cols();
    for (const Matrix& p : member_probs) {
        if (p.rows() != n || p.cols() != c)
            throw DimensionMismatchError("member probability matrices disagree in shape");
    }
    if (n != static_cast<Eigen::Index>(labels.size()))
        throw LengthMismatchError("probabilities and labels differ in length");

    WeightSearchResult best;
    best.best_metric = -1.0;

    std::vector<std::int64_t> counts(m_count, 0);
    std::vector<int> pred(static_cast<size_t>(n));
    Matrix mix(n, c);

    // Lexicographically ascending walk over {w : w_i = k_i/q, Σk_i = q};
    // strict improvement keeps the first (smallest) vector on metric ties.
    auto evaluate = [&]() {
        Vector w(static_cast<Eigen::Index>(m_count));
        for (size_t i = 0; i < m_count; ++i)
            w[static_cast<Eigen::Index>(i)] =
                static_cast<double>(counts[i]) / static_cast<double>(q);
        mix.setZero();
        for (size_t i = 0; i < m_count; ++i) mix += w[static_cast<Eigen::Index>(i)] * member_probs[i];
        for (Eigen::Index r = 0; r < n; ++r)
            pred[static_cast<size_t>(r)] = argmax_lowest(mix.row(r).transpose());
        const double metric = macro_f1(labels, pred);
        best.log.emplace_back(std::vector<double>(w.begin(), w.end()), metric);
        if (metric > best.best_metric) {
            best.best_metric = metric;
            best.weights = w;
        }
    };

    // Depth-first composition of q into m_count nonnegative parts.
    auto recurse = [&](auto&& self, size_t pos, std::int64_t remaining) -> void {
        if (pos + 1 == m_count) {
            counts[pos] = remaining;
            evaluate();
            return;
        }
        for (std::int64_t k = 0; k <= remaining; ++k) {
            counts[pos] = k;
            self(self, pos + 1, remaining - k);
        }
    };
    recurse(recurse, 0, q);
    return best;
}

WeightSearchResult search_weights(const std::vector<const Model*>& members, const Matrix& val_rows,
                                  const std::vector<int>& val_labels, double step) {
    if (members.empty()) throw EmptyDataError("no members to weight");
    std::vector<Matrix> probs;
    probs.reserve(members.size());
    for (const Model* m : members) probs.push_back(predict_proba_matrix(*m, val_rows));
    return search_weights_probs(probs, val_labels, step);
}

EnsembleModel::EnsembleModel(std::vector<std::unique_ptr<Model>> members, Vector weights,
                             VoteMode mode)
    : members_(std::move(members)), weights_(std::move(weights)), mode_(mode) {
    if (members_.empty()) throw EmptyDataError("ensemble needs at least one member");
    for (const auto& m : members_) {
        if (m->input_dim() != members_[0]->input_dim() ||
            m->num_classes() != members_[0]->num_classes())
            throw DimensionMismatchError("ensemble members disagree in shape");
    }
    const Eigen::Index m_count = static_cast<Eigen::Index>(members_.size());
    if (mode_ == VoteMode::Soft) {
        weights_ = Vector::Constant(m_count, 1.0 / static_cast<double>(m_count));
    } else {
        if (weights_.size() != m_count) throw BadWeightsError("one weight per member required");
        if (weights_.minCoeff() < 0 || std::abs(weights_.sum() - 1.0) > 1e-9)
            throw BadWeightsError("weights must be nonnegative and sum to 1");
    }
}

int EnsembleModel::input_dim() const { return members_.empty() ? 0 : members_[0]->input_dim(); }

int EnsembleModel::num_classes() const {
    return members_.empty() ? 0 : members_[0]->num_classes();
}

Vector EnsembleModel::predict_proba(ConstVectorRef x) const {
    Matrix probs(static_cast<Eigen::Index>(members_.size()), num_classes());
    for (size_t m = 0; m < members_.size(); ++m)
        probs.row(static_cast<Eigen::Index>(m)) = members_[m]->predict_proba(x).transpose();
    return (mode_ == VoteMode::Soft ? soft_vote(probs) : weighted_vote(probs, weights_)).probs;
}

nlohmann::json EnsembleModel::hyperparameters_json() const {
    nlohmann::json j;
    j["mode"] = mode_ == VoteMode::Soft ? "soft" : "weighted";
    j["weights"] = std::vector<double>(weights_.begin(), weights_.end());
    nlohmann::json kinds = nlohmann::json::array();
    for (const auto& m : members_) kinds.push_back(m->kind());
    j["member_kinds"] = std::move(kinds);
    return j;
}

nlohmann::json EnsembleModel::parameters_json() const {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : members_) members.push_back(model_artifact_json(*m, {}));
    nlohmann::json log = nlohmann::json::array();
    for (const auto& [w, metric] : search_log_) {
        log.push_back({{"weights", w}, {"metric", metric}});
    }
    nlohmann::json j;
    j["members"] = std::move(members);
    j["search_log"] = std::move(log);
    return j;
}

EnsembleModel EnsembleModel::from_json(const nlohmann::json& hyper, const nlohmann::json& params) {
    const std::string mode_name = hyper.at("mode").get<std::string>();
    VoteMode mode;
    if (mode_name == "soft") {
        mode = VoteMode::Soft;
    } else if (mode_name == "weighted") {
        mode = VoteMode::Weighted;
    } else {
        throw FormatVersionError("unknown ensemble mode: " + mode_name);
    }
    auto w = hyper.at("weights").get<std::vector<double>>();
    Vector weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));

    std::vector<std::unique_ptr<Model>> members;
    for (const auto& mj : params.at("members")) members.push_back(model_from_artifact_json(mj));

    EnsembleModel ens(std::move(members), std::move(weights), mode);
    if (params.contains("search_log")) {
        std::vector<std::pair<std::vector<double>, double>> log;
        for (const auto& entry : params.at("search_log")) {
            log.emplace_back(entry.at("weights").get<std::vector<double>>(),
                             entry.at("metric").get<double>());
        }
        ens.set_search_log(std::move(log));
    }
    return ens;
}

V2BuildResult build_v2(const Matrix& train_rows, const std::vector<int>& train_labels,
                       const Matrix& val_rows, const std::vector<int>& val_labels,
                       const V2BuildConfig& cfg) {
    RandomForestConfig rf_cfg;
    rf_cfg.t_trees = cfg.rf_trees;
    rf_cfg.class_balanced = cfg.rf_class_balanced;
    rf_cfg.seed = cfg.seed;
    auto rf = std::make_unique<RandomForest>(RandomForest::fit(train_rows, train_labels, rf_cfg));

    GbdtConfig gbdt_cfg;
    gbdt_cfg.rounds = cfg.gbdt_rounds;
    gbdt_cfg.learning_rate = cfg.gbdt_learning_rate;
    gbdt_cfg.max_depth = cfg.gbdt_max_depth;
    gbdt_cfg.max_leaves = cfg.gbdt_max_leaves;
    gbdt_cfg.seed = cfg.seed + 1;
    auto gbdt =
        std::make_unique<BoostedTrees>(BoostedTrees::fit(train_rows, train_labels, gbdt_cfg));

    MlpConfig mlp_cfg;
    mlp_cfg.hidden = cfg.mlp_hidden;
    mlp_cfg.epochs = cfg.mlp_epochs;
    mlp_cfg.batch_size = cfg.mlp_batch_size;
    mlp_cfg.learning_rate = cfg.mlp_learning_rate;
    mlp_cfg.seed = cfg.seed + 2;
    auto mlp = std::make_unique<MlpModel>(
        MlpModel::fit(train_rows, train_labels, mlp_cfg, &val_rows, &val_labels));

    WeightSearchResult search = search_weights({rf.get(), gbdt.get(), mlp.get()}, val_rows,
                                               val_labels, cfg.search_step);

    std::vector<std::unique_ptr<Model>> members;
    members.push_back(std::move(rf));
    members.push_back(std::move(gbdt));
    members.push_back(std::move(mlp));

    V2BuildResult res;
    res.model = EnsembleModel(std::move(members), search.weights, VoteMode::Weighted);
    res.model.set_search_log(search.log);
    res.search = std::move(search);
    return res;
}

}  // namespace flowsentry
