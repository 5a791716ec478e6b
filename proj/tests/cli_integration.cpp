// End-to-end exercises of the command-line binary: each case launches the
// real executable in a subprocess and inspects exit codes, stdout JSON, and
// the artifact files it leaves behind. Expensive fixtures (one generated
// dataset, one trained forest) are built once and shared.
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string quoted(const fs::path& path) { return "'" + path.string() + "'"; }

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Runs the CLI with the given argument string, capturing stdout/stderr
// through temp files. FLOWSENTRY_CLI_PATH is injected by the build system.
RunResult run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path io_dir = fs::temp_directory_path() / "flowsentry_cli_io";
    fs::create_directories(io_dir);
    const fs::path out_file = io_dir / ("out_" + std::to_string(counter) + ".txt");
    const fs::path err_file = io_dir / ("err_" + std::to_string(counter) + ".txt");
    ++counter;

    std::string cmd = quoted(fs::path(FLOWSENTRY_CLI_PATH)) + " " + args + " >" +
                      quoted(out_file) + " 2>" + quoted(err_file);
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

// Shared fixtures, built lazily on first use: a mixed synthetic dataset, a
// trained random forest over it, and two event-only scenario streams.
struct World {
    fs::path root;
    fs::path data_dir, rf_dir, bf_dir, scan_dir;
    fs::path flows_csv, events_jsonl, config_json;
    fs::path model_json, plan_json, report_json;
    std::string train_stdout;
    bool ok = false;
    std::string fail;

    World() {
        try {
            build();
            ok = true;
        } catch (const std::exception& e) {
            fail = e.what();
        }
    }

    void build() {
        root = fs::temp_directory_path() / "flowsentry_cli_world";
        fs::remove_all(root);
        fs::create_directories(root);
        data_dir = root / "data";
        rf_dir = root / "rf";
        bf_dir = root / "bf";
        scan_dir = root / "scan";

        config_json = root / "config.json";
        spit(config_json, json{{"rf_trees", 10},
                               {"gbdt_rounds", 4},
                               {"gbdt_max_depth", 3},
                               {"gbdt_max_leaves", 8},
                               {"mlp_epochs", 3},
                               {"mlp_batch_size", 64},
                               {"search_step", 0.5}}
                              .dump());

        RunResult g = run_cli("generate --out " + quoted(data_dir) +
                              " --scenario mixed_dataset --rows 40 --noise 0.1 --seed 42");
        if (g.exit_code != 0) throw std::runtime_error("fixture generate failed: " + g.err);
        flows_csv = data_dir / "flows.csv";
        events_jsonl = data_dir / "events.jsonl";

        RunResult t = run_cli("train --data " + quoted(flows_csv) + " --model-kind rf --out " +
                              quoted(rf_dir) + " --config " + quoted(config_json) +
                              " --seed 42 --json");
        if (t.exit_code != 0) throw std::runtime_error("fixture train failed: " + t.err);
        train_stdout = t.out;
        model_json = rf_dir / "model.json";
        plan_json = rf_dir / "plan.json";
        report_json = rf_dir / "report.json";

        RunResult b = run_cli("generate --out " + quoted(bf_dir) +
                              " --scenario ssh_brute_force --seed 1");
        if (b.exit_code != 0) throw std::runtime_error("fixture brute events failed: " + b.err);
        RunResult s =
            run_cli("generate --out " + quoted(scan_dir) + " --scenario port_scan --seed 5");
        if (s.exit_code != 0) throw std::runtime_error("fixture scan events failed: " + s.err);
    }
};

World& world() {
    static World w;
    REQUIRE_MESSAGE(w.ok, "shared CLI fixture: " << w.fail);
    return w;
}

// Fresh scratch directory for a single case.
fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "flowsentry_cli_scratch" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("generation is reproducible byte for byte") {
    const fs::path dir = scratch("gen");
    const std::string common = " --scenario mixed_dataset --rows 12 --noise 0.2 --json";

    RunResult a = run_cli("generate --out " + quoted(dir / "a") + common + " --seed 7");
    RunResult b = run_cli("generate --out " + quoted(dir / "b") + common + " --seed 7");
    RunResult c = run_cli("generate --out " + quoted(dir / "c") + common + " --seed 8");
    REQUIRE_MESSAGE(a.exit_code == 0, a.err);
    REQUIRE(b.exit_code == 0);
    REQUIRE(c.exit_code == 0);

    const json summary = json::parse(a.out);
    CHECK(summary.at("scenario") == "mixed_dataset");
    CHECK(summary.at("seed").get<std::uint64_t>() == 7);
    CHECK(summary.at("rows").get<std::int64_t>() == 7 * 12);
    CHECK(summary.at("events").get<std::int64_t>() == 230);

    CHECK(slurp(dir / "a" / "flows.csv") == slurp(dir / "b" / "flows.csv"));
    CHECK(slurp(dir / "a" / "events.jsonl") == slurp(dir / "b" / "events.jsonl"));
    CHECK(slurp(dir / "a" / "flows.csv") != slurp(dir / "c" / "flows.csv"));

    const json manifest = json::parse(slurp(dir / "a" / "run_manifest.json"));
    CHECK(manifest.at("command") == "generate");
    CHECK(manifest.at("seed").get<std::uint64_t>() == 7);
    CHECK(manifest.at("version").get<std::string>().size() > 0);
    CHECK(manifest.at("artifacts").size() == 2);
    CHECK(manifest.at("config").at("scenario") == "mixed_dataset");
    CHECK(manifest.at("wall_time_s").get<double>() >= 0.0);
}

TEST_CASE("generation accepts a spec file and validates it") {
    const fs::path dir = scratch("gen_spec");

    const fs::path good = dir / "spec.json";
    spit(good, json{{"scenario", "port_scan"}, {"seed", 3}}.dump());
    RunResult r = run_cli("generate --spec " + quoted(good) + " --out " + quoted(dir / "out"));
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    CHECK(fs::exists(dir / "out" / "events.jsonl"));
    CHECK_FALSE(fs::exists(dir / "out" / "flows.csv"));  // no rows requested
    const json manifest = json::parse(slurp(dir / "out" / "run_manifest.json"));
    CHECK(manifest.at("inputs").size() == 1);

    const fs::path bad = dir / "bad_spec.json";
    spit(bad, json{{"scenario", "benign"}, {"noise_level", 2.0}}.dump());
    RunResult e = run_cli("generate --spec " + quoted(bad) + " --out " + quoted(dir / "nope"));
    CHECK(e.exit_code == 2);
    CHECK(e.err.find("error:") != std::string::npos);
}

TEST_CASE("training writes model, plan, and an honest report") {
    World& w = world();

    const json summary = json::parse(w.train_stdout);
    CHECK(summary.at("model_kind") == "rf");
    CHECK(summary.at("validation_macro_f1").get<double>() >= 0.9);
    CHECK(summary.at("validation_accuracy").get<double>() >= 0.9);
    CHECK(summary.at("artifacts").size() == 3);

    REQUIRE(fs::exists(w.model_json));
    REQUIRE(fs::exists(w.plan_json));
    REQUIRE(fs::exists(w.report_json));
    REQUIRE(fs::exists(w.rf_dir / "run_manifest.json"));

    const json model = json::parse(slurp(w.model_json));
    CHECK(model.at("format_version").get<int>() == 1);
    CHECK(model.at("schema").size() == 20);

    const json plan = json::parse(slurp(w.plan_json));
    CHECK(plan.at("selected_names").size() == 20);

    const json report = json::parse(slurp(w.report_json));
    CHECK(report.at("model_kind") == "rf");
    CHECK(report.at("split").at("train").get<int>() == 196);
    CHECK(report.at("split").at("val").get<int>() == 42);
    CHECK(report.at("split").at("test").get<int>() == 42);
    CHECK(report.at("load_report").at("rows_read").get<int>() == 280);
    CHECK(report.at("load_report").at("rows_kept").get<int>() == 280);
    CHECK(report.at("load_report").at("unknown_labels").get<int>() == 0);
    CHECK(report.at("train_rows_after_oversampling").get<int>() >= 196);
    CHECK(report.at("validation").at("macro_avg").at("f1").get<double>() >= 0.9);

    const json manifest = json::parse(slurp(w.rf_dir / "run_manifest.json"));
    CHECK(manifest.at("command") == "train");
    CHECK(manifest.at("inputs").size() == 2);  // data csv + config json
    CHECK(manifest.at("artifacts").size() == 3);
    CHECK(manifest.at("config").at("rf_trees").get<int>() == 10);
}

TEST_CASE("every model kind trains through the same pipeline") {
    World& w = world();
    const fs::path dir = scratch("kinds");

    for (const std::string kind : {"gbdt", "mlp", "ens_v1", "ens_weighted_fe", "ens_v2"}) {
        CAPTURE(kind);
        const fs::path out = dir / kind;
        RunResult r = run_cli("train --data " + quoted(w.flows_csv) + " --model-kind " + kind +
                              " --out " + quoted(out) + " --config " + quoted(w.config_json) +
                              " --seed 42 --json");
        REQUIRE_MESSAGE(r.exit_code == 0, r.err);
        const json summary = json::parse(r.out);
        CHECK(summary.at("model_kind") == kind);
        const double f1 = summary.at("validation_macro_f1").get<double>();
        CHECK(f1 >= 0.0);
        CHECK(f1 <= 1.0);
        if (kind != "mlp") CHECK(f1 >= 0.8);  // three epochs of MLP earn no promises
        CHECK(fs::exists(out / "model.json"));
        CHECK(fs::exists(out / "plan.json"));

        if (kind == "ens_v2") {
            REQUIRE(summary.contains("weights"));
            double sum = 0.0;
            for (const auto& v : summary.at("weights")) sum += v.get<double>();
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
            const json report = json::parse(slurp(out / "report.json"));
            REQUIRE(report.contains("weight_search"));
            CHECK(report.at("weight_search").at("log").size() == 6);  // step 0.5, 3 members

            // The stored ensemble must evaluate cleanly through the eval path.
            RunResult ev = run_cli("eval --model " + quoted(out / "model.json") + " --plan " +
                                   quoted(out / "plan.json") + " --data " + quoted(w.flows_csv) +
                                   " --json");
            REQUIRE_MESSAGE(ev.exit_code == 0, ev.err);
            CHECK(json::parse(ev.out).at("accuracy").get<double>() >= 0.9);
        }
    }
}

TEST_CASE("evaluation reports scores in json, text, and files") {
    World& w = world();
    const fs::path dir = scratch("eval");

    const std::string base = "eval --model " + quoted(w.model_json) + " --plan " +
                             quoted(w.plan_json) + " --data " + quoted(w.flows_csv);

    RunResult j = run_cli(base + " --json");
    REQUIRE_MESSAGE(j.exit_code == 0, j.err);
    const json report = json::parse(j.out);
    CHECK(report.at("accuracy").get<double>() >= 0.9);
    CHECK(report.at("confusion").size() == 7);
    CHECK(report.at("per_class").size() == 7);
    CHECK(report.at("macro_avg").at("f1").get<double>() >= 0.9);
    CHECK(report.contains("zero_division_hit"));

    RunResult t = run_cli(base);
    REQUIRE(t.exit_code == 0);
    CHECK(t.out.find("macro avg") != std::string::npos);
    CHECK(t.out.find("weighted avg") != std::string::npos);

    RunResult o = run_cli(base + " --out " + quoted(dir / "rep"));
    REQUIRE(o.exit_code == 0);
    CHECK(fs::exists(dir / "rep" / "report.json"));
    CHECK(fs::exists(dir / "rep" / "report.txt"));
    const json manifest = json::parse(slurp(dir / "rep" / "run_manifest.json"));
    CHECK(manifest.at("command") == "eval");
    CHECK(manifest.at("inputs").size() == 3);
    CHECK(json::parse(slurp(dir / "rep" / "report.json")).at("accuracy").get<double>() >= 0.9);
}

TEST_CASE("evaluation rejects schema drift and missing artifacts") {
    World& w = world();
    const fs::path dir = scratch("eval_bad");

    // Rename the first feature column: the plan's input schema no longer matches.
    std::string csv = slurp(w.flows_csv);
    const auto nl = csv.find('\n');
    std::string header = csv.substr(0, nl);
    const auto pos = header.find("duration_s");
    REQUIRE(pos != std::string::npos);
    header.replace(pos, std::string("duration_s").size(), "duration_zz");
    const fs::path drifted = dir / "drifted.csv";
    spit(drifted, header + csv.substr(nl));

    RunResult r = run_cli("eval --model " + quoted(w.model_json) + " --plan " +
                          quoted(w.plan_json) + " --data " + quoted(drifted) + " --json");
    CHECK(r.exit_code == 4);
    CHECK(r.err.find("error:") != std::string::npos);

    RunResult m = run_cli("eval --model " + quoted(dir / "missing.json") + " --plan " +
                          quoted(w.plan_json) + " --data " + quoted(w.flows_csv));
    CHECK(m.exit_code == 2);
}

TEST_CASE("training rejects defective datasets with exit code four") {
    World& w = world();
    const fs::path dir = scratch("train_bad");

    const std::string csv = slurp(w.flows_csv);
    const auto nl = csv.find('\n');
    const std::string header = csv.substr(0, nl + 1);

    const fs::path empty = dir / "header_only.csv";
    spit(empty, header);
    RunResult e = run_cli("train --data " + quoted(empty) + " --model-kind rf --out " +
                          quoted(dir / "o1"));
    CHECK(e.exit_code == 4);

    std::string relabeled = header;
    const auto lpos = relabeled.find("label");
    REQUIRE(lpos != std::string::npos);
    relabeled.replace(lpos, 5, "klass");
    const fs::path no_label = dir / "no_label.csv";
    spit(no_label, relabeled + csv.substr(nl + 1));
    RunResult n = run_cli("train --data " + quoted(no_label) + " --model-kind rf --out " +
                          quoted(dir / "o2"));
    CHECK(n.exit_code == 4);

    // One data row with a label no group recognizes.
    const auto second_nl = csv.find('\n', nl + 1);
    std::string row = csv.substr(nl + 1, second_nl - nl - 1);
    row = row.substr(0, row.rfind(',') + 1) + "MARTIAN";
    const fs::path unknown = dir / "unknown_label.csv";
    spit(unknown, header + row + "\n");
    RunResult u = run_cli("train --data " + quoted(unknown) + " --model-kind rf --out " +
                          quoted(dir / "o3"));
    CHECK(u.exit_code == 4);
}

TEST_CASE("explanations honor method, class, and bounds") {
    World& w = world();
    const fs::path dir = scratch("explain");

    const std::string base = "explain --model " + quoted(w.model_json) + " --plan " +
                             quoted(w.plan_json) + " --data " + quoted(w.flows_csv);

    RunResult r = run_cli(base + " --row 3 --method sampled --permutations 40 --background 30" +
                          " --seed 9 --json");
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    const json exp = json::parse(r.out);
    CHECK(exp.at("method") == "sampled");
    CHECK(exp.at("n_permutations").get<int>() == 40);
    CHECK(exp.at("row").get<int>() == 3);
    CHECK(exp.at("phi").size() == 20);
    CHECK(exp.at("feature_names").size() == 20);
    CHECK(exp.at("true_label").get<std::string>().size() > 0);
    CHECK(exp.contains("class_name"));
    double phi_sum = 0.0;
    for (const auto& v : exp.at("phi")) phi_sum += v.get<double>();
    // Permutation attributions telescope, so additivity holds to round-off.
    CHECK(exp.at("baseline").get<double>() + phi_sum ==
          doctest::Approx(exp.at("fx").get<double>()).epsilon(1e-9));

    // A fixed target class is respected rather than the predicted one.
    RunResult cls = run_cli(base + " --row 0 --method sampled --permutations 10 --class DOS" +
                            " --out " + quoted(dir / "exp.json"));
    REQUIRE_MESSAGE(cls.exit_code == 0, cls.err);
    const json from_file = json::parse(slurp(dir / "exp.json"));
    CHECK(from_file.at("class_name") == "DOS");
    CHECK(from_file.at("class_explained").get<int>() == 1);

    // Twenty retained features make exact enumeration unreasonable.
    RunResult exact = run_cli(base + " --row 0 --method exact");
    CHECK(exact.exit_code == 2);
    CHECK(exact.err.find("error:") != std::string::npos);

    RunResult oob = run_cli(base + " --row 99999 --method sampled");
    CHECK(oob.exit_code == 2);
    CHECK(oob.err.find("row index out of range") != std::string::npos);

    RunResult bad = run_cli(base + " --row 0 --method bogus");
    CHECK(bad.exit_code == 2);
}

TEST_CASE("replay counts bans and suppressed events") {
    World& w = world();
    const fs::path dir = scratch("replay_bf");

    RunResult r = run_cli("replay --events " + quoted(w.bf_dir / "events.jsonl") + " --out " +
                          quoted(dir) + " --json");
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    const json summary = json::parse(r.out);
    CHECK(summary.at("events").get<int>() == 8);
    CHECK(summary.at("bans").get<int>() == 1);
    CHECK(summary.at("suppressed").get<int>() == 3);
    CHECK(summary.at("ml_verdicts").get<int>() == 0);
    CHECK(summary.at("alerts").at("total").get<int>() == 1);
    CHECK(summary.at("alerts").at("by_rule").at("brute_force").get<int>() == 1);

    const auto ban_lines = lines_of(slurp(dir / "bans.jsonl"));
    REQUIRE(ban_lines.size() == 1);
    const json ban = json::parse(ban_lines[0]);
    CHECK(ban.at("ip").get<std::string>().size() > 0);
    CHECK(ban.at("ban_count").get<int>() == 1);
    CHECK(ban.at("expires_at").get<double>() > ban.at("banned_at").get<double>());

    const auto alert_lines = lines_of(slurp(dir / "alerts.jsonl"));
    REQUIRE(alert_lines.size() == 1);
    const json alert = json::parse(alert_lines[0]);
    CHECK(alert.at("rule") == "brute_force");
    CHECK(alert.at("severity") == "critical");

    const json on_disk = json::parse(slurp(dir / "summary.json"));
    CHECK(on_disk == summary);
}

TEST_CASE("replay verdicts flag suspicious flows through the model") {
    World& w = world();
    const fs::path dir = scratch("replay_scan");

    RunResult r = run_cli("replay --events " + quoted(w.scan_dir / "events.jsonl") + " --model " +
                          quoted(w.model_json) + " --plan " + quoted(w.plan_json) +
                          " --threshold 0.5 --out " + quoted(dir) + " --json");
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    const json summary = json::parse(r.out);
    CHECK(summary.at("events").get<int>() == 30);
    CHECK(summary.at("suppressed").get<int>() == 0);  // nothing was banned first
    CHECK(summary.at("alerts").at("by_rule").at("port_scan").get<int>() == 1);

    // Every scan flow is confidently non-benign under the fixed seeds in play.
    const int verdicts = summary.at("ml_verdicts").get<int>();
    CHECK(verdicts == 30);
    CHECK(summary.at("alerts").at("by_rule").at("ml_verdict").get<int>() == verdicts);
    CHECK(summary.at("alerts").at("total").get<int>() == verdicts + 1);

    RunResult no_plan = run_cli("replay --events " + quoted(w.scan_dir / "events.jsonl") +
                                " --model " + quoted(w.model_json) + " --out " + quoted(dir));
    CHECK(no_plan.exit_code == 2);
    CHECK(no_plan.err.find("--plan") != std::string::npos);
}

TEST_CASE("corrupted event streams report the offending line") {
    World& w = world();
    const fs::path dir = scratch("replay_bad");

    const std::string good = slurp(w.bf_dir / "events.jsonl");
    const auto lines = lines_of(good);
    REQUIRE(lines.size() == 8);

    // Re-appending the first event makes time run backwards at line 9.
    const fs::path regressed = dir / "regressed.jsonl";
    spit(regressed, good + lines[0] + "\n");
    RunResult r = run_cli("replay --events " + quoted(regressed) + " --out " + quoted(dir / "o1"));
    CHECK(r.exit_code == 4);
    CHECK(r.err.find(":9:") != std::string::npos);
    CHECK(r.err.find("error:") != std::string::npos);

    const fs::path garbled = dir / "garbled.jsonl";
    spit(garbled, "this is not json\n" + good);
    RunResult g = run_cli("replay --events " + quoted(garbled) + " --out " + quoted(dir / "o2"));
    CHECK(g.exit_code == 4);
    CHECK(g.err.find(":1:") != std::string::npos);
}

TEST_CASE("usage and configuration mistakes exit with code two") {
    World& w = world();
    const fs::path dir = scratch("usage");

    RunResult kind = run_cli("train --data " + quoted(w.flows_csv) + " --model-kind forest" +
                             " --out " + quoted(dir / "o1"));
    CHECK(kind.exit_code == 2);
    CHECK(kind.err.find("unknown model kind") != std::string::npos);

    RunResult flag = run_cli("generate --frobnicate");
    CHECK(flag.exit_code == 2);

    RunResult missing = run_cli("train --model-kind rf --out " + quoted(dir / "o2"));
    CHECK(missing.exit_code == 2);

    const fs::path bad_cfg = dir / "bad_config.json";
    spit(bad_cfg, json{{"rf_treez", 5}}.dump());
    RunResult cfg = run_cli("train --data " + quoted(w.flows_csv) + " --model-kind rf --out " +
                            quoted(dir / "o3") + " --config " + quoted(bad_cfg));
    CHECK(cfg.exit_code == 2);
    CHECK(cfg.err.find("unknown train config key") != std::string::npos);

    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("train --help").exit_code == 0);
    CHECK(run_cli("").exit_code == 2);  // a subcommand is required
}

TEST_CASE("diverging training exits with code three") {
    World& w = world();
    const fs::path dir = scratch("diverge");

    const fs::path cfg = dir / "hot.json";
    spit(cfg, json{{"mlp_epochs", 2}, {"mlp_learning_rate", 1e305}}.dump());
    RunResult r = run_cli("train --data " + quoted(w.flows_csv) + " --model-kind mlp --out " +
                          quoted(dir / "o") + " --config " + quoted(cfg));
    CHECK(r.exit_code == 3);
    CHECK(r.err.find("error:") != std::string::npos);
}
