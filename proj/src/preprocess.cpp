#include "flowsentry/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "flowsentry/errors.hpp"

namespace flowsentry {

namespace {

int bin_of(double v, double lo, double hi, int bins) {
    if (hi <= lo) return 0;
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    return std::clamp(b, 0, bins - 1);
}

}  // namespace

double mutual_information(ConstVectorRef feature, const std::vector<int>& labels, int bins) {
    if (bins < 2) throw BadBinsError("bins must be >= 2, got " + std::to_string(bins));
    const Eigen::Index n = feature.size();
    if (n != static_cast<Eigen::Index>(labels.size()))
        throw LengthMismatchError("feature and labels differ in length");
    if (n == 0) throw LengthMismatchError("empty inputs");

    const double lo = feature.minCoeff();
    const double hi = feature.maxCoeff();
    const int used_bins = (hi <= lo) ? 1 : bins;

    int n_classes = 0;
    for (int c : labels) n_classes = std::max(n_classes, c + 1);

    Matrix joint = Matrix::Zero(used_bins, n_classes);
    for (Eigen::Index i = 0; i < n; ++i) {
        joint(bin_of(feature[i], lo, hi, used_bins), labels[static_cast<size_t>(i)]) += 1.0;
    }
    joint /= static_cast<double>(n);

    const Vector pb = joint.rowwise().sum();
    const Vector pc = joint.colwise().sum();

    double mi = 0;
    for (int b = 0; b < used_bins; ++b) {
        for (int c = 0; c < n_classes; ++c) {
            const double p = joint(b, c);
            if (p > 0) mi += p * std::log(p / (pb[b] * pc[c]));
        }
    }
    return std::max(mi, 0.0);
}

PreprocessPlan select_features(const LabeledDataset& train, int k, int bins) {
    const int d = train.d();
    if (k < 1 || k > d) throw BadKError("k must be in [1, " + std::to_string(d) + "]");

    Vector scores(d);
    for (int j = 0; j < d; ++j) {
        scores[j] = mutual_information(train.rows.col(j), train.labels, bins);
    }

    std::vector<int> order(static_cast<size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    order.resize(static_cast<size_t>(k));
    std::sort(order.begin(), order.end());

    PreprocessPlan plan;
    plan.input_schema = train.schema;
    plan.selected = std::move(order);
    plan.selected_names.reserve(static_cast<size_t>(k));
    for (int idx : plan.selected) plan.selected_names.push_back(train.schema[static_cast<size_t>(idx)]);
    plan.mi_scores = std::move(scores);
    return plan;
}

void fit_scaling(PreprocessPlan& plan, const Matrix& train_rows) {
    const int m = static_cast<int>(plan.selected.size());
    plan.mins.resize(m);
    plan.maxs.resize(m);
    for (int j = 0; j < m; ++j) {
        const auto col = train_rows.col(plan.selected[static_cast<size_t>(j)]);
        plan.mins[j] = col.minCoeff();
        plan.maxs[j] = col.maxCoeff();
    }
    plan.fitted = true;
}

Matrix normalize(const Matrix& rows, const PreprocessPlan& plan) {
    if (!plan.fitted) throw PlanNotFitError("scaling statistics not fit");
    if (rows.cols() != plan.mins.size())
        throw LengthMismatchError("column count does not match the plan");

    Matrix out(rows.rows(), rows.cols());
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
        const double lo = plan.mins[j];
        const double range = plan.maxs[j] - lo;
        if (range <= 0) {
            out.col(j).setZero();
        } else {
            out.col(j) = ((rows.col(j).array() - lo) / range).cwiseMax(0.0).cwiseMin(1.0);
        }
    }
    return out;
}

Matrix engineer_features(const Matrix& rows, const std::vector<std::string>& schema,
                         std::vector<std::string>* schema_out) {
    auto col_index = [&](const char* name) {
        auto it = std::find(schema.begin(), schema.end(), name);
        if (it == schema.end()) throw MissingColumnError(std::string("missing column: ") + name);
        return static_cast<Eigen::Index>(it - schema.begin());
    };
    const Eigen::Index fwd_bytes = col_index("fwd_bytes");
    const Eigen::Index bwd_bytes = col_index("bwd_bytes");
    const Eigen::Index pkt_std = col_index("pkt_len_std");
    const Eigen::Index pkt_mean = col_index("pkt_len_mean");

    Matrix out(rows.rows(), rows.cols() + 2);
    out.leftCols(rows.cols()) = rows;
    out.col(rows.cols()) =
        (rows.col(fwd_bytes).array() + 1.0) / (rows.col(bwd_bytes).array() + 1.0);
    out.col(rows.cols() + 1) = rows.col(pkt_std).array() / (rows.col(pkt_mean).array() + 1e-9);

    if (schema_out) {
        *schema_out = schema;
        schema_out->push_back("len_ratio");
        schema_out->push_back("size_var");
    }
    return out;
}

PreprocessPlan fit_plan(const LabeledDataset& train, const PlanConfig& cfg) {
    LabeledDataset work = train;
    std::vector<std::string> schema = train.schema;
    if (cfg.engineer) {
        work.rows = engineer_features(train.rows, train.schema, &schema);
        work.schema = schema;
    }
    PreprocessPlan plan = select_features(work, std::min(cfg.top_k, work.d()), cfg.mi_bins);
    plan.input_schema = train.schema;
    plan.engineered = cfg.engineer;
    plan.seed = cfg.seed;

    fit_scaling(plan, work.rows);
    return plan;
}

Matrix PreprocessPlan::apply(const Matrix& raw_rows) const {
    if (!fitted) throw PlanNotFitError("plan not fit");
    if (raw_rows.cols() != static_cast<Eigen::Index>(input_schema.size()))
        throw LengthMismatchError("input columns do not match the plan schema");

    Matrix work = engineered ? engineer_features(raw_rows, input_schema) : raw_rows;
    Matrix sel(work.rows(), static_cast<Eigen::Index>(selected.size()));
    for (size_t j = 0; j < selected.size(); ++j)
        sel.col(static_cast<Eigen::Index>(j)) = work.col(selected[j]);
    return normalize(sel, *this);
}

nlohmann::json PreprocessPlan::to_json() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["input_schema"] = input_schema;
    j["engineered"] = engineered;
    j["selected"] = selected;
    j["selected_names"] = selected_names;
    j["mins"] = std::vector<double>(mins.begin(), mins.end());
    j["maxs"] = std::vector<double>(maxs.begin(), maxs.end());
    j["mi_scores"] = std::vector<double>(mi_scores.begin(), mi_scores.end());
    j["seed"] = seed;
    j["fitted"] = fitted;
    return j;
}

PreprocessPlan PreprocessPlan::from_json(const nlohmann::json& j) {
    if (j.value("format_version", -1) != 1)
        throw FormatVersionError("unsupported preprocess plan format_version");
    PreprocessPlan plan;
    plan.input_schema = j.at("input_schema").get<std::vector<std::string>>();
    plan.engineered = j.at("engineered").get<bool>();
    plan.selected = j.at("selected").get<std::vector<int>>();
    plan.selected_names = j.at("selected_names").get<std::vector<std::string>>();
    auto mins = j.at("mins").get<std::vector<double>>();
    auto maxs = j.at("maxs").get<std::vector<double>>();
    auto mi = j.at("mi_scores").get<std::vector<double>>();
    plan.mins = Eigen::Map<const Vector>(mins.data(), static_cast<Eigen::Index>(mins.size()));
    plan.maxs = Eigen::Map<const Vector>(maxs.data(), static_cast<Eigen::Index>(maxs.size()));
    plan.mi_scores = Eigen::Map<const Vector>(mi.data(), static_cast<Eigen::Index>(mi.size()));
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.fitted = j.at("fitted").get<bool>();
    return plan;
}

LabeledDataset smote_oversample(const LabeledDataset& ds, int k_neighbors, std::uint64_t seed) {
    if (k_neighbors < 1) throw BadKError("k_neighbors must be >= 1");
    const auto counts = ds.class_counts();
    const std::int64_t majority = *std::max_element(counts.begin(), counts.end());

    bool any_minority = false;
    for (int c = 0; c < kNumGroups; ++c) {
        if (counts[static_cast<size_t>(c)] > 0 && counts[static_cast<size_t>(c)] < majority) {
            any_minority = true;
            if (counts[static_cast<size_t>(c)] < 2)
                throw ClassTooSmallError("class " + group_name(c) + " has fewer than 2 samples");
        }
    }
    if (!any_minority) return ds;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<Vector> synth_rows;
    std::vector<int> synth_labels;

    for (int c = 0; c < kNumGroups; ++c) {
        const std::int64_t count = counts[static_cast<size_t>(c)];
        if (count == 0 || count == majority) continue;

        std::vector<Eigen::Index> members;
        for (size_t i = 0; i < ds.labels.size(); ++i)
            if (ds.labels[i] == c) members.push_back(static_cast<Eigen::Index>(i));

        const int k_eff = static_cast<int>(std::min<std::int64_t>(k_neighbors, count - 1));

        // k nearest same-class neighbors per member, Euclidean, ties by index.
        std::vector<std::vector<Eigen::Index>> neighbors(members.size());
        for (size_t a = 0; a < members.size(); ++a) {
            std::vector<std::pair<double, Eigen::Index>> dists;
            dists.reserve(members.size() - 1);
            for (size_t b = 0; b < members.size(); ++b) {
                if (a == b) continue;
                const double d2 = (ds.rows.row(members[a]) - ds.rows.row(members[b])).squaredNorm();
                dists.emplace_back(d2, members[b]);
            }
            std::sort(dists.begin(), dists.end());
            for (int t = 0; t < k_eff; ++t) neighbors[a].push_back(dists[static_cast<size_t>(t)].second);
        }

        const std::int64_t needed = majority - count;
        std::uniform_int_distribution<int> pick_nn(0, k_eff - 1);
        for (std::int64_t s = 0; s < needed; ++s) {
            const size_t a = static_cast<size_t>(s % count);
            const Eigen::Index nn = neighbors[a][static_cast<size_t>(pick_nn(rng))];
            const double u = unit(rng);
            Vector row = ds.rows.row(members[a]).transpose() +
                         u * (ds.rows.row(nn) - ds.rows.row(members[a])).transpose();
            synth_rows.push_back(std::move(row));
            synth_labels.push_back(c);
        }
    }

    LabeledDataset out;
    out.schema = ds.schema;
    out.rows.resize(ds.rows.rows() + static_cast<Eigen::Index>(synth_rows.size()), ds.rows.cols());
    out.rows.topRows(ds.rows.rows()) = ds.rows;
    for (size_t i = 0; i < synth_rows.size(); ++i)
        out.rows.row(ds.rows.rows() + static_cast<Eigen::Index>(i)) = synth_rows[i].transpose();
    out.labels = ds.labels;
    out.labels.insert(out.labels.end(), synth_labels.begin(), synth_labels.end());
    return out;
}

SplitResult stratified_split(const LabeledDataset& ds, const SplitSpec& spec) {
    auto valid_frac = [](double f) { return f > 0.0 && f < 1.0; };
    if (!valid_frac(spec.train_frac) || !valid_frac(spec.val_frac) || !valid_frac(spec.test_frac) ||
        std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) > 1e-9) {
        throw BadFractionsError("split fractions must lie in (0,1) and sum to 1");
    }
    if (ds.n() < 10) throw EmptyDatasetError("need at least 10 rows to split");

    std::mt19937_64 rng(spec.seed);
    std::array<std::vector<Eigen::Index>, 3> parts;  // train, val, test row indices

    auto allocate = [&](std::vector<Eigen::Index>& idx) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const std::int64_t m = static_cast<std::int64_t>(idx.size());
        std::array<double, 3> fracs = {spec.train_frac, spec.val_frac, spec.test_frac};
        std::array<std::int64_t, 3> take{};
        std::array<double, 3> rema{};
        std::int64_t assigned = 0;
        for (int s = 0; s < 3; ++s) {
            const double want = fracs[static_cast<size_t>(s)] * static_cast<double>(m);
            take[static_cast<size_t>(s)] = static_cast<std::int64_t>(want);
            rema[static_cast<size_t>(s)] = want - static_cast<double>(take[static_cast<size_t>(s)]);
            assigned += take[static_cast<size_t>(s)];
        }
        // Hand out the rounding remainder by largest fractional part,
        // ties in train/val/test order.
        std::array<int, 3> order = {0, 1, 2};
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return rema[static_cast<size_t>(a)] > rema[static_cast<size_t>(b)]; });
        for (int r = 0; r < m - assigned; ++r) take[static_cast<size_t>(order[static_cast<size_t>(r % 3)])]++;

        // Keep every split populated when the class is large enough.
        if (m >= 3) {
            for (int s = 0; s < 3; ++s) {
                if (take[static_cast<size_t>(s)] == 0) {
                    int donor = 0;
                    for (int t = 1; t < 3; ++t)
                        if (take[static_cast<size_t>(t)] > take[static_cast<size_t>(donor)]) donor = t;
                    take[static_cast<size_t>(s)]++;
                    take[static_cast<size_t>(donor)]--;
                }
            }
        }

        std::int64_t pos = 0;
        for (int s = 0; s < 3; ++s) {
            for (std::int64_t i = 0; i < take[static_cast<size_t>(s)]; ++i)
                parts[static_cast<size_t>(s)].push_back(idx[static_cast<size_t>(pos++)]);
        }
    };

    if (spec.stratified) {
        for (int c = 0; c < kNumGroups; ++c) {
            std::vector<Eigen::Index> idx;
            for (size_t i = 0; i < ds.labels.size(); ++i)
                if (ds.labels[i] == c) idx.push_back(static_cast<Eigen::Index>(i));
            if (!idx.empty()) allocate(idx);
        }
    } else {
        std::vector<Eigen::Index> idx(ds.n());
        std::iota(idx.begin(), idx.end(), 0);
        allocate(idx);
    }

    auto subset = [&](std::vector<Eigen::Index>& idx) {
        std::sort(idx.begin(), idx.end());
        LabeledDataset out;
        out.schema = ds.schema;
        out.rows.resize(static_cast<Eigen::Index>(idx.size()), ds.rows.cols());
        out.labels.reserve(idx.size());
        for (size_t i = 0; i < idx.size(); ++i) {
            out.rows.row(static_cast<Eigen::Index>(i)) = ds.rows.row(idx[i]);
            out.labels.push_back(ds.labels[static_cast<size_t>(idx[i])]);
        }
        return out;
    };

    SplitResult res;
    res.train = subset(parts[0]);
    res.val = subset(parts[1]);
    res.test = subset(parts[2]);
    return res;
}

}  // namespace flowsentry
