// flowsentry — flow classification, explanation and automated response.
//
// Subcommands: generate (synthetic data), train, eval, explain, replay.
// Exit codes: 0 success, 2 usage/config error, 3 training failure,
// 4 data integrity error.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "flowsentry/dataset.hpp"
#include "flowsentry/ensemble.hpp"
#include "flowsentry/errors.hpp"
#include "flowsentry/gbdt.hpp"
#include "flowsentry/metrics.hpp"
#include "flowsentry/mlp.hpp"
#include "flowsentry/model.hpp"
#include "flowsentry/preprocess.hpp"
#include "flowsentry/random_forest.hpp"
#include "flowsentry/sentinel.hpp"
#include "flowsentry/shap.hpp"
#include "flowsentry/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace flowsentry;

namespace {

constexpr const char* kCliVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Run manifest

std::uint64_t fnv1a64_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for hashing");
    std::uint64_t h = 14695981039346656037ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Records what a command ran with: config snapshot, input file hashes
// (fnv1a-64 of the bytes, a non-cryptographic provenance check), outputs and
// wall time. Wall time is informational and excluded from any comparison.
class ManifestWriter {
public:
    ManifestWriter(std::string command, std::uint64_t seed)
        : start_(std::chrono::steady_clock::now()) {
        j_["command"] = std::move(command);
        j_["seed"] = seed;
        j_["version"] = kCliVersion;
        j_["inputs"] = json::object();
        j_["artifacts"] = json::array();
    }

    void set_config(json snapshot) { j_["config"] = std::move(snapshot); }

    void add_input(const fs::path& path) {
        j_["inputs"][path.string()] = hex64(fnv1a64_file(path));
    }

    void add_artifact(const fs::path& path) { j_["artifacts"].push_back(path.string()); }

    void write(const fs::path& dir) {
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        j_["wall_time_s"] =
            std::chrono::duration_cast<std::chrono::duration<double>>(elapsed).count();
        std::ofstream out(dir / "run_manifest.json");
        if (!out) throw IoError("cannot write manifest in " + dir.string());
        out << j_.dump(2) << "\n";
    }

private:
    json j_;
    std::chrono::steady_clock::time_point start_;
};

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw IoError("failed writing " + path.string());
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw BadConfigError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOpts {
    std::string spec_path;
    std::string out_dir = ".";
    std::string scenario;
    std::int64_t rows = -1;
    double noise = -1;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool json_out = false;
};

int run_generate(const GenerateOpts& opt) {
    ScenarioSpec spec;
    if (!opt.spec_path.empty()) spec = ScenarioSpec::from_json(read_json_file(opt.spec_path));
    if (!opt.scenario.empty()) spec.scenario = scenario_from_name(opt.scenario);
    if (opt.rows >= 0) spec.n_per_class.fill(opt.rows);
    if (opt.noise >= 0) spec.noise_level = opt.noise;
    if (opt.seed_set) spec.seed = opt.seed;

    fs::create_directories(opt.out_dir);
    ManifestWriter manifest("generate", spec.seed);
    if (!opt.spec_path.empty()) manifest.add_input(opt.spec_path);
    json cfg = spec.to_json();
    manifest.set_config(cfg);

    json summary;
    summary["scenario"] = scenario_name(spec.scenario);
    summary["seed"] = spec.seed;

    std::int64_t total = 0;
    for (std::int64_t c : spec.n_per_class) total += c;
    if (total > 0) {
        const LabeledDataset ds = gen_flows(spec);
        const fs::path csv = fs::path(opt.out_dir) / "flows.csv";
        save_dataset(ds, csv);
        manifest.add_artifact(csv);
        summary["flows_csv"] = csv.string();
        summary["rows"] = ds.n();
    }

    const std::vector<SecurityEvent> events = gen_events(spec);
    if (!events.empty()) {
        const fs::path jp = fs::path(opt.out_dir) / "events.jsonl";
        write_events_jsonl(events, jp);
        manifest.add_artifact(jp);
        summary["events_jsonl"] = jp.string();
        summary["events"] = events.size();
    }

    manifest.write(opt.out_dir);
    if (opt.json_out) {
        std::cout << summary.dump(2) << "\n";
    } else {
        std::cout << "generated scenario '" << scenario_name(spec.scenario) << "' (seed "
                  << spec.seed << ")";
        if (total > 0) std::cout << ": " << total << " flow rows";
        if (!events.empty()) std::cout << ", " << events.size() << " events";
        std::cout << "\nwrote " << opt.out_dir << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
    std::string data_path;
    std::string model_kind = "ens_v2";
    std::string out_dir = ".";
    std::string config_path;
    std::uint64_t seed = 0;
    bool json_out = false;
};

struct TrainConfig {
    int top_k = 20;
    int mi_bins = 10;
    int smote_k = 5;
    double search_step = 0.1;
    int rf_trees = 150;
    int gbdt_rounds = 100;
    double gbdt_learning_rate = 0.05;
    int gbdt_max_depth = 10;
    int gbdt_max_leaves = 64;
    int mlp_epochs = 40;
    int mlp_batch_size = 128;
    double mlp_learning_rate = 1e-3;

    static TrainConfig from_json(const json& j) {
        TrainConfig cfg;
        for (const auto& [key, value] : j.items()) {
            if (key == "top_k") {
                cfg.top_k = value.get<int>();
            } else if (key == "mi_bins") {
                cfg.mi_bins = value.get<int>();
            } else if (key == "smote_k") {
                cfg.smote_k = value.get<int>();
            } else if (key == "search_step") {
                cfg.search_step = value.get<double>();
            } else if (key == "rf_trees") {
                cfg.rf_trees = value.get<int>();
            } else if (key == "gbdt_rounds") {
                cfg.gbdt_rounds = value.get<int>();
            } else if (key == "gbdt_learning_rate") {
                cfg.gbdt_learning_rate = value.get<double>();
            } else if (key == "gbdt_max_depth") {
                cfg.gbdt_max_depth = value.get<int>();
            } else if (key == "gbdt_max_leaves") {
                cfg.gbdt_max_leaves = value.get<int>();
            } else if (key == "mlp_epochs") {
                cfg.mlp_epochs = value.get<int>();
            } else if (key == "mlp_batch_size") {
                cfg.mlp_batch_size = value.get<int>();
            } else if (key == "mlp_learning_rate") {
                cfg.mlp_learning_rate = value.get<double>();
            } else {
                throw BadConfigError("unknown train config key: " + key);
            }
        }
        return cfg;
    }

    json to_json() const {
        json j;
        j["top_k"] = top_k;
        j["mi_bins"] = mi_bins;
        j["smote_k"] = smote_k;
        j["search_step"] = search_step;
        j["rf_trees"] = rf_trees;
        j["gbdt_rounds"] = gbdt_rounds;
        j["gbdt_learning_rate"] = gbdt_learning_rate;
        j["gbdt_max_depth"] = gbdt_max_depth;
        j["gbdt_max_leaves"] = gbdt_max_leaves;
        j["mlp_epochs"] = mlp_epochs;
        j["mlp_batch_size"] = mlp_batch_size;
        j["mlp_learning_rate"] = mlp_learning_rate;
        return j;
    }

    V2BuildConfig v2(std::uint64_t seed) const {
        V2BuildConfig v;
        v.rf_trees = rf_trees;
        v.gbdt_rounds = gbdt_rounds;
        v.gbdt_learning_rate = gbdt_learning_rate;
        v.gbdt_max_depth = gbdt_max_depth;
        v.gbdt_max_leaves = gbdt_max_leaves;
        v.mlp_epochs = mlp_epochs;
        v.mlp_batch_size = mlp_batch_size;
        v.mlp_learning_rate = mlp_learning_rate;
        v.search_step = search_step;
        v.seed = seed;
        return v;
    }
};

const std::vector<std::string>& known_model_kinds() {
    static const std::vector<std::string> kinds = {"rf",     "gbdt",            "mlp",
                                                   "ens_v1", "ens_weighted_fe", "ens_v2"};
    return kinds;
}

int run_train(const TrainOpts& opt) {
    const auto& kinds = known_model_kinds();
    if (std::find(kinds.begin(), kinds.end(), opt.model_kind) == kinds.end())
        throw BadConfigError("unknown model kind: " + opt.model_kind);

    TrainConfig cfg;
    if (!opt.config_path.empty()) cfg = TrainConfig::from_json(read_json_file(opt.config_path));

    LoadReport load_report;
    LoadOptions load_opts;
    load_opts.schema_mode = SchemaMode::Canonical;
    const LabeledDataset ds = load_dataset(opt.data_path, load_opts, &load_report);

    SplitSpec split_spec;
    split_spec.seed = opt.seed;
    const SplitResult split = stratified_split(ds, split_spec);

    PlanConfig plan_cfg;
    plan_cfg.engineer = opt.model_kind == "ens_weighted_fe";
    plan_cfg.top_k = cfg.top_k;
    plan_cfg.mi_bins = cfg.mi_bins;
    plan_cfg.seed = opt.seed;
    const PreprocessPlan plan = fit_plan(split.train, plan_cfg);

    LabeledDataset train_t;
    train_t.schema = plan.selected_names;
    train_t.rows = plan.apply(split.train.rows);
    train_t.labels = split.train.labels;
    const LabeledDataset balanced = smote_oversample(train_t, cfg.smote_k, opt.seed);

    const Matrix val_x = plan.apply(split.val.rows);

    std::unique_ptr<Model> model;
    const WeightSearchResult* search = nullptr;
    WeightSearchResult search_storage;
    {
        const V2BuildConfig v2 = cfg.v2(opt.seed);
        if (opt.model_kind == "rf") {
            RandomForestConfig rf_cfg;
            rf_cfg.t_trees = cfg.rf_trees;
            rf_cfg.seed = opt.seed;
            model = std::make_unique<RandomForest>(
                RandomForest::fit(balanced.rows, balanced.labels, rf_cfg));
        } else if (opt.model_kind == "gbdt") {
            GbdtConfig g;
            g.rounds = cfg.gbdt_rounds;
            g.learning_rate = cfg.gbdt_learning_rate;
            g.max_depth = cfg.gbdt_max_depth;
            g.max_leaves = cfg.gbdt_max_leaves;
            g.seed = opt.seed;
            model = std::make_unique<BoostedTrees>(
                BoostedTrees::fit(balanced.rows, balanced.labels, g));
        } else if (opt.model_kind == "mlp") {
            MlpConfig m;
            m.epochs = cfg.mlp_epochs;
            m.batch_size = cfg.mlp_batch_size;
            m.learning_rate = cfg.mlp_learning_rate;
            m.seed = opt.seed;
            model = std::make_unique<MlpModel>(
                MlpModel::fit(balanced.rows, balanced.labels, m, &val_x, &split.val.labels));
        } else if (opt.model_kind == "ens_v1") {
            RandomForestConfig rf_cfg;
            rf_cfg.t_trees = v2.rf_trees;
            rf_cfg.seed = v2.seed;
            GbdtConfig g;
            g.rounds = v2.gbdt_rounds;
            g.learning_rate = v2.gbdt_learning_rate;
            g.max_depth = v2.gbdt_max_depth;
            g.max_leaves = v2.gbdt_max_leaves;
            g.seed = v2.seed + 1;
            MlpConfig m;
            m.hidden = v2.mlp_hidden;
            m.epochs = v2.mlp_epochs;
            m.batch_size = v2.mlp_batch_size;
            m.learning_rate = v2.mlp_learning_rate;
            m.seed = v2.seed + 2;
            std::vector<std::unique_ptr<Model>> members;
            members.push_back(std::make_unique<RandomForest>(
                RandomForest::fit(balanced.rows, balanced.labels, rf_cfg)));
            members.push_back(std::make_unique<BoostedTrees>(
                BoostedTrees::fit(balanced.rows, balanced.labels, g)));
            members.push_back(std::make_unique<MlpModel>(
                MlpModel::fit(balanced.rows, balanced.labels, m, &val_x, &split.val.labels)));
            model = std::make_unique<EnsembleModel>(std::move(members), Vector(), VoteMode::Soft);
        } else {  // ens_weighted_fe, ens_v2
            V2BuildResult built =
                build_v2(balanced.rows, balanced.labels, val_x, split.val.labels, v2);
            search_storage = std::move(built.search);
            search = &search_storage;
            model = std::make_unique<EnsembleModel>(std::move(built.model));
        }
    }

    const std::vector<int> val_pred = predict_classes(*model, val_x);
    const ClassificationReport report = classification_report(split.val.labels, val_pred);

    fs::create_directories(opt.out_dir);
    ManifestWriter manifest("train", opt.seed);
    manifest.add_input(opt.data_path);
    if (!opt.config_path.empty()) manifest.add_input(opt.config_path);
    json cfg_snapshot = cfg.to_json();
    cfg_snapshot["model_kind"] = opt.model_kind;
    manifest.set_config(cfg_snapshot);

    const fs::path model_path = fs::path(opt.out_dir) / "model.json";
    const fs::path plan_path = fs::path(opt.out_dir) / "plan.json";
    const fs::path report_path = fs::path(opt.out_dir) / "report.json";
    save_model_artifact(*model, plan.selected_names, model_path);
    write_text_file(plan_path, plan.to_json().dump(2) + "\n");

    json report_j;
    report_j["model_kind"] = opt.model_kind;
    report_j["load_report"] = to_json(load_report);
    report_j["split"] = {{"train", split.train.n()}, {"val", split.val.n()}, {"test", split.test.n()}};
    report_j["train_rows_after_oversampling"] = balanced.n();
    report_j["validation"] = report.to_json();
    if (search) {
        json log = json::array();
        for (const auto& [w, metric] : search->log)
            log.push_back({{"weights", w}, {"metric", metric}});
        const std::vector<double> w(search->weights.data(),
                                    search->weights.data() + search->weights.size());
        report_j["weight_search"] = {
            {"weights", w}, {"best_metric", search->best_metric}, {"log", std::move(log)}};
    }
    write_text_file(report_path, report_j.dump(2) + "\n");

    manifest.add_artifact(model_path);
    manifest.add_artifact(plan_path);
    manifest.add_artifact(report_path);
    manifest.write(opt.out_dir);

    if (opt.json_out) {
        json out;
        out["model_kind"] = opt.model_kind;
        out["validation_macro_f1"] = report.macro_avg.f1;
        out["validation_accuracy"] = report.accuracy;
        out["artifacts"] = {model_path.string(), plan_path.string(), report_path.string()};
        if (search)
            out["weights"] = std::vector<double>(search->weights.data(),
                                                 search->weights.data() + search->weights.size());
        std::cout << out.dump(2) << "\n";
    } else {
        std::printf("trained %s on %lld rows (train %lld -> %lld oversampled, val %lld, test %lld)\n",
                    opt.model_kind.c_str(), static_cast<long long>(ds.n()),
                    static_cast<long long>(split.train.n()), static_cast<long long>(balanced.n()),
                    static_cast<long long>(split.val.n()), static_cast<long long>(split.test.n()));
        std::printf("validation macro-F1 %.4f, accuracy %.4f\n", report.macro_avg.f1,
                    report.accuracy);
        if (search) {
            std::printf("voting weights:");
            for (double w : search->weights) std::printf(" %.2f", w);
            std::printf(" (validation macro-F1 %.4f)\n", search->best_metric);
        }
        std::printf("wrote %s\n", opt.out_dir.c_str());
    }
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
    std::string model_path;
    std::string plan_path;
    std::string data_path;
    std::string out_dir;
    bool json_out = false;
};

int run_eval(const EvalOpts& opt) {
    std::vector<std::string> model_schema;
    const std::unique_ptr<Model> model = load_model_artifact(opt.model_path, &model_schema);
    const PreprocessPlan plan = PreprocessPlan::from_json(read_json_file(opt.plan_path));
    if (!model_schema.empty() && model_schema != plan.selected_names)
        throw SchemaMismatchError("model artifact and preprocess plan disagree on features");

    const LabeledDataset ds = load_dataset(opt.data_path, LoadOptions{});
    if (ds.schema != plan.input_schema)
        throw SchemaMismatchError("dataset columns do not match the plan's input schema");
    const Matrix x = plan.apply(ds.rows);
    const std::vector<int> pred = predict_classes(*model, x);
    const ClassificationReport report = classification_report(ds.labels, pred);

    if (opt.json_out) {
        std::cout << report.to_json().dump(2) << "\n";
    } else {
        std::cout << report.to_text();
    }

    if (!opt.out_dir.empty()) {
        fs::create_directories(opt.out_dir);
        ManifestWriter manifest("eval", 0);
        manifest.add_input(opt.model_path);
        manifest.add_input(opt.plan_path);
        manifest.add_input(opt.data_path);
        manifest.set_config(json::object());
        const fs::path jp = fs::path(opt.out_dir) / "report.json";
        const fs::path tp = fs::path(opt.out_dir) / "report.txt";
        write_text_file(jp, report.to_json().dump(2) + "\n");
        write_text_file(tp, report.to_text());
        manifest.add_artifact(jp);
        manifest.add_artifact(tp);
        manifest.write(opt.out_dir);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// explain

struct ExplainOpts {
    std::string model_path;
    std::string plan_path;
    std::string data_path;
    std::string out_path;
    std::int64_t row = 0;
    std::string method = "exact";
    int permutations = 200;
    int background = 50;
    std::string target_class;
    std::uint64_t seed = 0;
    bool json_out = false;
};

int run_explain(const ExplainOpts& opt) {
    if (opt.method != "exact" && opt.method != "sampled")
        throw BadConfigError("method must be 'exact' or 'sampled'");
    if (opt.background < 1) throw BadConfigError("background size must be positive");

    std::vector<std::string> model_schema;
    const std::unique_ptr<Model> model = load_model_artifact(opt.model_path, &model_schema);

    const LabeledDataset ds = load_dataset(opt.data_path, LoadOptions{});
    Matrix x_all;
    std::vector<std::string> names;
    if (!opt.plan_path.empty()) {
        const PreprocessPlan plan = PreprocessPlan::from_json(read_json_file(opt.plan_path));
        if (ds.schema != plan.input_schema)
            throw SchemaMismatchError("dataset columns do not match the plan's input schema");
        x_all = plan.apply(ds.rows);
        names = plan.selected_names;
    } else {
        x_all = ds.rows;
        names = ds.schema;
    }
    if (!model_schema.empty() && model_schema != names)
        throw SchemaMismatchError("model artifact schema does not match the prepared features");
    if (opt.row < 0 || opt.row >= x_all.rows())
        throw BadConfigError("row index out of range (dataset has " +
                             std::to_string(x_all.rows()) + " rows)");

    const Eigen::Index bg_n = std::min<Eigen::Index>(opt.background, x_all.rows());
    const Matrix background = x_all.topRows(bg_n);
    const Vector x = x_all.row(opt.row).transpose();

    int target;
    if (opt.target_class.empty()) {
        target = model->predict_class(x);
    } else {
        target = group_code(group_from_name(opt.target_class));
    }

    const ShapExplanation exp =
        opt.method == "exact"
            ? shap_exact(*model, x, background, target)
            : shap_sampled(*model, x, background, target, opt.permutations, opt.seed);

    json out = exp.to_json(names);
    out["row"] = opt.row;
    out["true_label"] = group_name(ds.labels[static_cast<size_t>(opt.row)]);

    if (!opt.out_path.empty()) {
        write_text_file(opt.out_path, out.dump(2) + "\n");
    }
    if (opt.json_out || opt.out_path.empty()) {
        std::cout << out.dump(2) << "\n";
    } else {
        std::printf("explained row %lld (class %s, %s): wrote %s\n",
                    static_cast<long long>(opt.row), group_name(target).c_str(),
                    exp.method.c_str(), opt.out_path.c_str());
    }
    return 0;
}

// ---------------------------------------------------------------------------
// replay

struct ReplayOpts {
    std::string events_path;
    std::string rules_path;
    std::string model_path;
    std::string plan_path;
    double threshold = 0.8;
    std::string out_dir = ".";
    bool json_out = false;
};

int run_replay(const ReplayOpts& opt) {
    RuleConfig rules;
    if (!opt.rules_path.empty()) rules = RuleConfig::load(opt.rules_path);
    Sentinel sentinel(rules);

    std::unique_ptr<Model> model;
    std::optional<PreprocessPlan> plan;
    if (!opt.model_path.empty()) {
        if (opt.plan_path.empty())
            throw BadConfigError("--model requires --plan for feature preparation");
        model = load_model_artifact(opt.model_path);
        plan = PreprocessPlan::from_json(read_json_file(opt.plan_path));
    }

    std::ifstream in(opt.events_path);
    if (!in) throw IoError("cannot open " + opt.events_path);

    std::vector<AlertRecord> alerts;
    std::vector<BanEntry> bans;
    std::int64_t events_seen = 0, suppressed = 0, ml_verdicts = 0;

    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        SecurityEvent ev;
        try {
            ev = event_from_json(json::parse(line));
        } catch (const std::exception& e) {
            throw SchemaMismatchError(opt.events_path + ":" + std::to_string(line_no) + ": " +
                                      e.what());
        }
        ++events_seen;
        IngestResult res;
        try {
            res = sentinel.ingest(ev);
        } catch (const TimeRegressionError& e) {
            throw TimeRegressionError(opt.events_path + ":" + std::to_string(line_no) + ": " +
                                      e.what());
        }
        suppressed += res.suppressed ? 1 : 0;
        for (auto& a : res.alerts) alerts.push_back(std::move(a));
        for (auto& b : res.bans) bans.push_back(std::move(b));

        if (model && !res.suppressed) {
            if (const auto* f = std::get_if<FlowSeen>(&ev.payload)) {
                auto verdict = sentinel.ml_verdict(f->flow, *model, *plan, opt.threshold);
                if (verdict) {
                    ++ml_verdicts;
                    alerts.push_back(std::move(*verdict));
                }
            }
        }
    }

    fs::create_directories(opt.out_dir);
    ManifestWriter manifest("replay", 0);
    manifest.add_input(opt.events_path);
    if (!opt.rules_path.empty()) manifest.add_input(opt.rules_path);
    if (!opt.model_path.empty()) manifest.add_input(opt.model_path);
    if (!opt.plan_path.empty()) manifest.add_input(opt.plan_path);
    json cfg = rules.to_json();
    cfg["verdict_threshold"] = opt.threshold;
    manifest.set_config(cfg);

    const fs::path alerts_path = fs::path(opt.out_dir) / "alerts.jsonl";
    const fs::path bans_path = fs::path(opt.out_dir) / "bans.jsonl";
    {
        std::ofstream alert_out(alerts_path);
        if (!alert_out) throw IoError("cannot write " + alerts_path.string());
        for (const AlertRecord& a : alerts) alert_out << to_json(a).dump() << "\n";
        std::ofstream ban_out(bans_path);
        if (!ban_out) throw IoError("cannot write " + bans_path.string());
        for (const BanEntry& b : bans) ban_out << to_json(b).dump() << "\n";
    }
    manifest.add_artifact(alerts_path);
    manifest.add_artifact(bans_path);

    json by_rule = json::object();
    for (const AlertRecord& a : alerts) {
        const std::string& name = alert_rule_name(a.rule);
        by_rule[name] = by_rule.value(name, 0) + 1;
    }
    json summary;
    summary["events"] = events_seen;
    summary["alerts"] = {{"total", alerts.size()}, {"by_rule", by_rule}};
    summary["bans"] = bans.size();
    summary["suppressed"] = suppressed;
    summary["ml_verdicts"] = ml_verdicts;

    const fs::path summary_path = fs::path(opt.out_dir) / "summary.json";
    write_text_file(summary_path, summary.dump(2) + "\n");
    manifest.add_artifact(summary_path);
    manifest.write(opt.out_dir);

    if (opt.json_out) {
        std::cout << summary.dump(2) << "\n";
    } else {
        std::printf("replayed %lld events: %zu alerts, %zu bans, %lld suppressed\n",
                    static_cast<long long>(events_seen), alerts.size(), bans.size(),
                    static_cast<long long>(suppressed));
        for (const auto& [rule, count] : by_rule.items())
            std::printf("  %s: %lld\n", rule.c_str(), count.get<long long>());
        std::printf("wrote %s\n", opt.out_dir.c_str());
    }
    return 0;
}

// ---------------------------------------------------------------------------

// Exit-code partition: config/usage problems are 2, data integrity is 4,
// diverging training is 3.
int classify_error(const Error& e) {
    if (dynamic_cast<const NonFiniteLossError*>(&e)) return 3;
    if (dynamic_cast<const SchemaMismatchError*>(&e) ||
        dynamic_cast<const UnknownLabelError*>(&e) ||
        dynamic_cast<const MissingLabelColumnError*>(&e) ||
        dynamic_cast<const EmptyDatasetError*>(&e) || dynamic_cast<const EmptyDataError*>(&e) ||
        dynamic_cast<const TimeRegressionError*>(&e) ||
        dynamic_cast<const ClassTooSmallError*>(&e) ||
        dynamic_cast<const LengthMismatchError*>(&e) ||
        dynamic_cast<const DimensionMismatchError*>(&e) ||
        dynamic_cast<const BadDistributionError*>(&e) || dynamic_cast<const BadCodeError*>(&e))
        return 4;
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flowsentry: flow classification, explanation and automated response"};
    app.require_subcommand(1);

    GenerateOpts gen;
    auto* cmd_gen = app.add_subcommand("generate", "Generate synthetic flows and event streams");
    cmd_gen->add_option("--spec", gen.spec_path, "Scenario spec JSON file");
    cmd_gen->add_option("--out", gen.out_dir, "Output directory")->capture_default_str();
    cmd_gen->add_option("--scenario", gen.scenario,
                        "benign | port_scan | ssh_brute_force | syn_flood | mixed_dataset");
    cmd_gen->add_option("--rows", gen.rows, "Rows per class for the flow dataset");
    cmd_gen->add_option("--noise", gen.noise, "Noise level in [0,1]");
    cmd_gen->add_option("--seed", gen.seed, "Generator seed")->trigger_on_parse();
    cmd_gen->add_flag("--json", gen.json_out, "Machine-readable stdout");

    TrainOpts train;
    auto* cmd_train = app.add_subcommand("train", "Fit a classifier on a labeled flow CSV");
    cmd_train->add_option("--data", train.data_path, "Labeled flow CSV")->required();
    cmd_train->add_option("--model-kind", train.model_kind,
                          "rf | gbdt | mlp | ens_v1 | ens_weighted_fe | ens_v2")
        ->capture_default_str();
    cmd_train->add_option("--out", train.out_dir, "Output directory")->capture_default_str();
    cmd_train->add_option("--config", train.config_path, "Hyperparameter JSON file");
    cmd_train->add_option("--seed", train.seed, "Split/fit seed");
    cmd_train->add_flag("--json", train.json_out, "Machine-readable stdout");

    EvalOpts eval;
    auto* cmd_eval = app.add_subcommand("eval", "Score a model artifact on a labeled CSV");
    cmd_eval->add_option("--model", eval.model_path, "Model artifact JSON")->required();
    cmd_eval->add_option("--plan", eval.plan_path, "Preprocess plan JSON")->required();
    cmd_eval->add_option("--data", eval.data_path, "Labeled flow CSV")->required();
    cmd_eval->add_option("--out", eval.out_dir, "Optional report output directory");
    cmd_eval->add_flag("--json", eval.json_out, "Machine-readable stdout");

    ExplainOpts explain;
    auto* cmd_explain = app.add_subcommand("explain", "Per-feature attribution for one row");
    cmd_explain->add_option("--model", explain.model_path, "Model artifact JSON")->required();
    cmd_explain->add_option("--plan", explain.plan_path, "Preprocess plan JSON");
    cmd_explain->add_option("--data", explain.data_path, "Labeled flow CSV")->required();
    cmd_explain->add_option("--row", explain.row, "Row index to explain")->capture_default_str();
    cmd_explain->add_option("--method", explain.method, "exact | sampled")->capture_default_str();
    cmd_explain->add_option("--permutations", explain.permutations, "Sampled-mode permutations")
        ->capture_default_str();
    cmd_explain->add_option("--background", explain.background, "Background row count")
        ->capture_default_str();
    cmd_explain->add_option("--class", explain.target_class,
                            "Class to explain (default: the prediction)");
    cmd_explain->add_option("--seed", explain.seed, "Sampled-mode seed");
    cmd_explain->add_option("--out", explain.out_path, "Write the explanation JSON here");
    cmd_explain->add_flag("--json", explain.json_out, "Machine-readable stdout");

    ReplayOpts replay;
    auto* cmd_replay = app.add_subcommand("replay", "Run an event stream through the sentinel");
    cmd_replay->add_option("--events", replay.events_path, "Event stream JSON Lines")->required();
    cmd_replay->add_option("--rules", replay.rules_path, "Rule config JSON (defaults if omitted)");
    cmd_replay->add_option("--model", replay.model_path, "Optional model artifact for verdicts");
    cmd_replay->add_option("--plan", replay.plan_path, "Preprocess plan for --model");
    cmd_replay->add_option("--threshold", replay.threshold, "Verdict probability threshold")
        ->capture_default_str();
    cmd_replay->add_option("--out", replay.out_dir, "Output directory")->capture_default_str();
    cmd_replay->add_flag("--json", replay.json_out, "Machine-readable stdout");

    // --seed presence detection for generate (an explicit 0 must override the scenario file).
    bool gen_seed_set = false;
    cmd_gen->callback([&]() { gen_seed_set = cmd_gen->count("--seed") > 0; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cmd_gen->parsed()) {
            gen.seed_set = gen_seed_set;
            return run_generate(gen);
        }
        if (cmd_train->parsed()) return run_train(train);
        if (cmd_eval->parsed()) return run_eval(eval);
        if (cmd_explain->parsed()) return run_explain(explain);
        if (cmd_replay->parsed()) return run_replay(replay);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return classify_error(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
