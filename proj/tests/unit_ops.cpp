// The sentinel state machine (ban windows, scan/flood/cpu triggers, ML
// verdicts) and the deterministic scenario generator that feeds it.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "flowsentry/dataset.hpp"
#include "flowsentry/errors.hpp"
#include "flowsentry/preprocess.hpp"
#include "flowsentry/random_forest.hpp"
#include "flowsentry/sentinel.hpp"
#include "flowsentry/synth.hpp"
#include "flowsentry/tree.hpp"
#include "flowsentry/types.hpp"

using namespace flowsentry;

namespace {

SecurityEvent auth_event(double ts, std::string ip, bool success) {
    SecurityEvent ev;
    ev.timestamp = ts;
    ev.payload = AuthAttempt{std::move(ip), success, "ssh"};
    return ev;
}

SecurityEvent flow_event(double ts, std::string src, int dst_port, double syn_count) {
    FlowRecord flow;
    flow.flow_id = "t-" + std::to_string(static_cast<long long>(ts * 1000)) + "-" +
                   std::to_string(dst_port);
    flow.src_ip = std::move(src);
    flow.dst_ip = "203.0.113.5";
    flow.src_port = 40000;
    flow.dst_port = dst_port;
    flow.protocol = Protocol::Tcp;
    flow.timestamp = ts;
    flow.features = Vector::Zero(static_cast<Eigen::Index>(canonical_schema().size()));
    flow.features[canonical_feature_index("syn_count")] = syn_count;
    SecurityEvent ev;
    ev.timestamp = ts;
    ev.payload = FlowSeen{std::move(flow)};
    return ev;
}

SecurityEvent resource_event(double ts, double cpu_pct) {
    SecurityEvent ev;
    ev.timestamp = ts;
    ResourceSample r;
    r.cpu_pct = cpu_pct;
    r.mem_pct = 50;
    r.net_in_bps = 1e6;
    r.net_out_bps = 1e6;
    r.dropped_pkts = 0;
    r.malformed_pkts = 0;
    ev.payload = r;
    return ev;
}

struct ReplaySummary {
    std::vector<AlertRecord> alerts;
    std::vector<BanEntry> bans;
    int suppressed = 0;
};

ReplaySummary replay(Sentinel& s, const std::vector<SecurityEvent>& events) {
    ReplaySummary sum;
    for (const SecurityEvent& ev : events) {
        IngestResult r = s.ingest(ev);
        for (auto& a : r.alerts) sum.alerts.push_back(std::move(a));
        for (auto& b : r.bans) sum.bans.push_back(std::move(b));
        if (r.suppressed) ++sum.suppressed;
    }
    return sum;
}

int count_rule(const std::vector<AlertRecord>& alerts, AlertRule rule) {
    int n = 0;
    for (const auto& a : alerts)
        if (a.rule == rule) ++n;
    return n;
}

// Brute-force reimplementation of the ban window semantics: full rescans over
// unbounded per-ip failure histories instead of incremental deques.
struct BanOracle {
    RuleConfig cfg;
    std::map<std::string, std::vector<double>> fails;
    std::map<std::string, BanEntry> bans;
    std::map<std::string, int> lifetime;
    std::vector<BanEntry> emitted;
    int suppressed = 0;

    bool banned(const std::string& ip, double at) const {
        auto it = bans.find(ip);
        return it != bans.end() && at >= it->second.banned_at && at < it->second.expires_at;
    }

    void feed(const std::string& ip, bool success, double ts) {
        if (banned(ip, ts)) {
            ++suppressed;
            return;
        }
        if (success) return;
        auto& history = fails[ip];
        history.push_back(ts);
        int in_window = 0;
        for (double t : history)
            if (t > ts - cfg.findtime_s) ++in_window;
        if (in_window >= cfg.maxretry) {
            const int count = ++lifetime[ip];
            BanEntry ban;
            ban.ip = ip;
            ban.banned_at = ts;
            ban.expires_at = ts + cfg.bantime_s * std::pow(cfg.ban_escalation_factor, count - 1);
            ban.ban_count = count;
            bans[ip] = ban;
            emitted.push_back(ban);
            history.clear();
        }
    }
};

}  // namespace

// ---------------------------------------------------------------------------
// ban state machine

TEST_CASE("the ban lands exactly on the configured failure") {
    Sentinel s{RuleConfig{}};
    for (int k = 0; k < 4; ++k) {
        const IngestResult r = s.ingest(auth_event(10.0 * k, "10.0.0.9", false));
        CHECK(r.bans.empty());
        CHECK(r.alerts.empty());
    }
    const IngestResult r = s.ingest(auth_event(40.0, "10.0.0.9", false));
    REQUIRE(r.bans.size() == 1);
    CHECK(r.bans[0].ip == "10.0.0.9");
    CHECK(r.bans[0].banned_at == 40.0);
    CHECK(r.bans[0].expires_at == 40.0 + 3600.0);
    CHECK(r.bans[0].ban_count == 1);
    REQUIRE(r.alerts.size() == 1);
    CHECK(r.alerts[0].rule == AlertRule::BruteForce);
    CHECK(r.alerts[0].severity == Severity::Critical);
    CHECK(r.alerts[0].source_ip.value() == "10.0.0.9");
    CHECK(r.alerts[0].raised_at == 40.0);
    CHECK(r.alerts[0].detection_latency_events == 0);
    CHECK(!r.alerts[0].evidence.empty());
    CHECK(s.is_banned("10.0.0.9", 41.0));
    CHECK(!s.is_banned("10.0.0.1", 41.0));
}

TEST_CASE("a window gap resets the failure count") {
    Sentinel s{RuleConfig{}};
    std::vector<SecurityEvent> events;
    for (int k = 0; k < 4; ++k) events.push_back(auth_event(10.0 * k, "10.0.0.9", false));
    for (int k = 0; k < 4; ++k) events.push_back(auth_event(730.0 + 10.0 * k, "10.0.0.9", false));
    const ReplaySummary sum = replay(s, events);
    CHECK(sum.bans.empty());
    CHECK(sum.alerts.empty());
}

TEST_CASE("the window boundary is exclusive on the old side") {
    RuleConfig cfg;
    cfg.maxretry = 2;
    cfg.findtime_s = 600;

    // A failure exactly findtime old has left the window.
    Sentinel at_edge{cfg};
    CHECK(at_edge.ingest(auth_event(0, "a", false)).bans.empty());
    CHECK(at_edge.ingest(auth_event(600, "a", false)).bans.empty());

    // One second fresher and it still counts.
    Sentinel inside{cfg};
    CHECK(inside.ingest(auth_event(0, "a", false)).bans.empty());
    CHECK(inside.ingest(auth_event(599, "a", false)).bans.size() == 1);
}

TEST_CASE("repeat offenders earn geometrically longer bans") {
    RuleConfig cfg;
    cfg.maxretry = 2;
    cfg.findtime_s = 50;
    cfg.bantime_s = 100;
    cfg.ban_escalation_factor = 2.0;
    Sentinel s{cfg};

    auto ban_at = [&](double t1, double t2) {
        CHECK(s.ingest(auth_event(t1, "10.0.0.9", false)).bans.empty());
        IngestResult r = s.ingest(auth_event(t2, "10.0.0.9", false));
        REQUIRE(r.bans.size() == 1);
        return r.bans[0];
    };

    const BanEntry first = ban_at(0, 1);
    CHECK(first.ban_count == 1);
    CHECK(first.expires_at == 1 + 100);

    const BanEntry second = ban_at(200, 201);  // first ban expired at 101
    CHECK(second.ban_count == 2);
    CHECK(second.expires_at == 201 + 200);

    const BanEntry third = ban_at(500, 501);  // second expired at 401
    CHECK(third.ban_count == 3);
    CHECK(third.expires_at == 501 + 400);
}

TEST_CASE("events from a banned source are suppressed, not counted") {
    RuleConfig cfg;
    cfg.maxretry = 2;
    cfg.findtime_s = 500;
    cfg.bantime_s = 100;
    cfg.ban_escalation_factor = 1.0;  // escalation disabled
    Sentinel s{cfg};

    s.ingest(auth_event(0, "10.0.0.9", false));
    REQUIRE(s.ingest(auth_event(1, "10.0.0.9", false)).bans.size() == 1);

    // While banned: recorded as suppressed, no state advances.
    for (double t : {2.0, 50.0, 100.0}) {
        const IngestResult r = s.ingest(auth_event(t, "10.0.0.9", false));
        CHECK(r.suppressed);
        CHECK(r.bans.empty());
        CHECK(r.alerts.empty());
    }
    // The ban lapses at banned_at + bantime; the ip must fail twice afresh.
    const IngestResult after = s.ingest(auth_event(101, "10.0.0.9", false));
    CHECK(!after.suppressed);
    CHECK(after.bans.empty());
    const IngestResult reban = s.ingest(auth_event(102, "10.0.0.9", false));
    REQUIRE(reban.bans.size() == 1);
    CHECK(reban.bans[0].ban_count == 2);
    CHECK(reban.bans[0].expires_at == 102 + 100);  // factor 1.0: no growth

    // Other sources are unaffected by the ban.
    Sentinel fresh{cfg};
    fresh.ingest(auth_event(0, "10.0.0.9", false));
    fresh.ingest(auth_event(1, "10.0.0.9", false));
    CHECK(!fresh.ingest(auth_event(2, "10.0.0.7", false)).suppressed);
}

TEST_CASE("successful logins never count toward a ban") {
    RuleConfig cfg;
    cfg.maxretry = 3;
    Sentinel s{cfg};
    std::vector<SecurityEvent> events;
    for (int k = 0; k < 20; ++k) events.push_back(auth_event(k, "10.0.0.9", (k % 3) != 0));
    // Failures at k = 0,3,6,9,... -> third failure at k=6.
    const ReplaySummary sum = replay(s, events);
    REQUIRE(sum.bans.size() == 1);
    CHECK(sum.bans[0].banned_at == 6);
}

TEST_CASE("ban expiry is idempotent and boundary-exact") {
    RuleConfig cfg;
    cfg.maxretry = 1;
    cfg.bantime_s = 100;
    Sentinel s{cfg};
    REQUIRE(s.ingest(auth_event(0, "10.0.0.9", false)).bans.size() == 1);

    CHECK(s.is_banned("10.0.0.9", 0));
    CHECK(s.is_banned("10.0.0.9", 99));
    CHECK(!s.is_banned("10.0.0.9", 100));  // expiry instant is not banned

    CHECK(s.active_bans(50).size() == 1);
    CHECK(s.active_bans(100).empty());

    s.expire_bans(99);
    CHECK(s.active_bans(50).size() == 1);  // unexpired bans survive
    s.expire_bans(100);
    CHECK(s.active_bans(50).empty());
    s.expire_bans(100);  // second call is a no-op
    CHECK(s.active_bans(50).empty());

    Sentinel empty{RuleConfig{}};
    empty.expire_bans(1e9);  // no state, no effect
    CHECK(empty.active_bans(0).empty());
}

TEST_CASE("time regressions are rejected without touching state") {
    Sentinel s{RuleConfig{}};
    s.ingest(auth_event(10, "10.0.0.9", false));
    CHECK(s.last_timestamp() == 10.0);
    CHECK_THROWS_AS(s.ingest(auth_event(9.5, "10.0.0.9", false)), TimeRegressionError);
    CHECK(s.last_timestamp() == 10.0);

    // Equal timestamps are fine, and the stream continues afterwards.
    CHECK_NOTHROW(s.ingest(auth_event(10, "10.0.0.9", false)));
    CHECK_NOTHROW(s.ingest(auth_event(12, "10.0.0.9", false)));
    CHECK(s.last_timestamp() == 12.0);
}

TEST_CASE("randomized auth streams match a rescan oracle exactly") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> retry_pick(2, 6);
    std::uniform_int_distribution<int> window_pick(5, 30);
    std::uniform_int_distribution<int> step_pick(0, 6);
    std::uniform_int_distribution<int> ip_pick(0, 1);
    std::uniform_real_distribution<double> unif(0, 1);
    const std::array<std::string, 2> ips = {"10.0.0.1", "10.0.0.2"};

    for (int trial = 0; trial < 200; ++trial) {
        RuleConfig cfg;
        cfg.maxretry = retry_pick(rng);
        cfg.findtime_s = window_pick(rng);
        cfg.bantime_s = 40;
        cfg.ban_escalation_factor = 2.0;

        Sentinel s{cfg};
        BanOracle oracle{cfg, {}, {}, {}, {}, 0};

        double ts = 0;
        std::vector<BanEntry> got;
        int suppressed = 0;
        for (int k = 0; k < 60; ++k) {
            ts += step_pick(rng);
            const std::string& ip = ips[static_cast<size_t>(ip_pick(rng))];
            const bool success = unif(rng) < 0.3;

            const IngestResult r = s.ingest(auth_event(ts, ip, success));
            for (const auto& b : r.bans) got.push_back(b);
            if (r.suppressed) ++suppressed;
            oracle.feed(ip, success, ts);
        }

        REQUIRE(got.size() == oracle.emitted.size());
        for (size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].ip == oracle.emitted[i].ip);
            CHECK(got[i].banned_at == oracle.emitted[i].banned_at);
            CHECK(got[i].expires_at == oracle.emitted[i].expires_at);
            CHECK(got[i].ban_count == oracle.emitted[i].ban_count);
        }
        CHECK(suppressed == oracle.suppressed);
    }
}

TEST_CASE("replaying one stream twice yields identical output") {
    ScenarioSpec spec;
    spec.scenario = Scenario::MixedDataset;
    spec.seed = 5;
    const std::vector<SecurityEvent> events = gen_events(spec);

    auto run = [&events] {
        Sentinel s{RuleConfig{}};
        const ReplaySummary sum = replay(s, events);
        nlohmann::json j = nlohmann::json::array();
        for (const auto& a : sum.alerts) j.push_back(to_json(a));
        for (const auto& b : sum.bans) j.push_back(to_json(b));
        j.push_back(sum.suppressed);
        return j.dump();
    };
    CHECK(run() == run());
}

// ---------------------------------------------------------------------------
// scan / flood / cpu triggers

TEST_CASE("a port scan fires exactly at the distinct-port threshold") {
    Sentinel s{RuleConfig{}};  // 20 distinct ports in 60 s
    std::vector<AlertRecord> alerts;
    for (int k = 0; k < 19; ++k) {
        const IngestResult r = s.ingest(flow_event(0.5 * k, "198.51.100.7", 1000 + k, 0));
        CHECK(r.alerts.empty());
    }
    const IngestResult r = s.ingest(flow_event(9.5, "198.51.100.7", 1019, 0));
    REQUIRE(r.alerts.size() == 1);
    CHECK(r.alerts[0].rule == AlertRule::PortScan);
    CHECK(r.alerts[0].severity == Severity::Warning);
    CHECK(r.alerts[0].source_ip.value() == "198.51.100.7");
    CHECK(r.alerts[0].raised_at == 9.5);

    // More distinct ports extend the same episode silently.
    CHECK(s.ingest(flow_event(10.0, "198.51.100.7", 1020, 0)).alerts.empty());

    // Repeated ports never count twice.
    Sentinel rep{RuleConfig{}};
    for (int k = 0; k < 50; ++k)
        CHECK(rep.ingest(flow_event(0.1 * k, "198.51.100.7", 1000 + (k % 5), 0)).alerts.empty());
}

TEST_CASE("a port scan episode re-arms once the window drains") {
    Sentinel s{RuleConfig{}};
    for (int k = 0; k < 20; ++k) s.ingest(flow_event(0.5 * k, "198.51.100.7", 1000 + k, 0));

    // 61 s later everything has left the window; the first new flow sees one
    // distinct port and clears the episode.
    CHECK(s.ingest(flow_event(71.0, "198.51.100.7", 2000, 0)).alerts.empty());
    std::vector<AlertRecord> alerts;
    for (int k = 1; k < 20; ++k) {
        IngestResult r = s.ingest(flow_event(71.0 + 0.5 * k, "198.51.100.7", 2000 + k, 0));
        for (auto& a : r.alerts) alerts.push_back(std::move(a));
    }
    REQUIRE(alerts.size() == 1);
    CHECK(alerts[0].rule == AlertRule::PortScan);
    CHECK(alerts[0].raised_at == 71.0 + 0.5 * 19);
}

TEST_CASE("scans are tracked per source") {
    Sentinel s{RuleConfig{}};
    // Two sources each touch 15 distinct ports: neither crosses 20.
    for (int k = 0; k < 15; ++k) {
        CHECK(s.ingest(flow_event(k, "10.0.0.1", 1000 + k, 0)).alerts.empty());
        CHECK(s.ingest(flow_event(k, "10.0.0.2", 3000 + k, 0)).alerts.empty());
    }
}

TEST_CASE("the flood trigger follows the aggregate rate over its window") {
    RuleConfig cfg;
    cfg.syn_rate_threshold_per_s = 100;  // with window 10: fires when sum > 1000
    cfg.syn_window_s = 10;
    Sentinel s{cfg};
    CHECK(s.ingest(flow_event(0, "198.51.100.7", 80, 300)).alerts.empty());
    CHECK(s.ingest(flow_event(1, "198.51.100.7", 80, 300)).alerts.empty());
    CHECK(s.ingest(flow_event(2, "198.51.100.7", 80, 300)).alerts.empty());
    const IngestResult r = s.ingest(flow_event(3, "198.51.100.7", 80, 300));
    REQUIRE(r.alerts.size() == 1);
    CHECK(r.alerts[0].rule == AlertRule::SynFlood);
    CHECK(r.alerts[0].severity == Severity::Critical);
    CHECK(r.alerts[0].raised_at == 3);

    // Sustained flood: one alert per episode.
    CHECK(s.ingest(flow_event(4, "198.51.100.7", 80, 300)).alerts.empty());

    // Rate decays once the window drains; the next burst is a new episode.
    CHECK(s.ingest(flow_event(30, "198.51.100.7", 80, 0)).alerts.empty());
    CHECK(s.ingest(flow_event(31, "198.51.100.7", 80, 600)).alerts.empty());
    const IngestResult again = s.ingest(flow_event(32, "198.51.100.7", 80, 600));
    REQUIRE(again.alerts.size() == 1);
    CHECK(again.alerts[0].rule == AlertRule::SynFlood);
}

TEST_CASE("cpu alerts demand consecutive high samples") {
    Sentinel s{RuleConfig{}};  // >90% for 5 consecutive samples
    for (int k = 0; k < 4; ++k) CHECK(s.ingest(resource_event(k, 95)).alerts.empty());
    const IngestResult r = s.ingest(resource_event(4, 95));
    REQUIRE(r.alerts.size() == 1);
    CHECK(r.alerts[0].rule == AlertRule::CpuHigh);
    CHECK(r.alerts[0].severity == Severity::Warning);
    CHECK(!r.alerts[0].source_ip.has_value());
    CHECK(r.alerts[0].raised_at == 4);

    // The 6th high sample does not re-raise.
    CHECK(s.ingest(resource_event(5, 95)).alerts.empty());

    // A dip clears the episode and the streak restarts from zero.
    CHECK(s.ingest(resource_event(6, 50)).alerts.empty());
    for (int k = 7; k < 11; ++k) CHECK(s.ingest(resource_event(k, 95)).alerts.empty());
    CHECK(s.ingest(resource_event(11, 95)).alerts.size() == 1);
}

TEST_CASE("an interrupted streak never fires") {
    Sentinel s{RuleConfig{}};
    std::vector<SecurityEvent> events;
    double ts = 0;
    for (int k = 0; k < 4; ++k) events.push_back(resource_event(ts++, 95));
    events.push_back(resource_event(ts++, 80));
    for (int k = 0; k < 4; ++k) events.push_back(resource_event(ts++, 95));
    CHECK(replay(s, events).alerts.empty());

    // Samples exactly at the trigger level do not count as high.
    Sentinel edge{RuleConfig{}};
    for (int k = 0; k < 10; ++k) CHECK(edge.ingest(resource_event(k, 90)).alerts.empty());
}

TEST_CASE("randomized flow streams match window-rescan oracles") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> k_pick(3, 6);
    std::uniform_int_distribution<int> win_pick(5, 10);
    std::uniform_int_distribution<int> port_pick(1, 8);
    std::uniform_int_distribution<int> step_pick(0, 2);
    std::uniform_int_distribution<int> syn_pick(0, 20);

    for (int trial = 0; trial < 100; ++trial) {
        RuleConfig cfg;
        cfg.portscan_distinct_ports = k_pick(rng);
        cfg.portscan_window_s = win_pick(rng);
        cfg.syn_rate_threshold_per_s = 2 + trial % 4;
        cfg.syn_window_s = 2 + trial % 3;
        Sentinel s{cfg};

        // Oracle state: full event histories, rescanned per event.
        std::vector<std::pair<double, int>> scan_hist;   // one source
        std::vector<std::pair<double, double>> syn_hist;
        bool scan_episode = false, syn_episode = false;
        std::vector<double> want_scan, want_syn;
        std::vector<double> got_scan, got_syn;

        double ts = 0;
        for (int k = 0; k < 80; ++k) {
            ts += step_pick(rng);
            const int port = port_pick(rng);
            const double syn = syn_pick(rng);

            const IngestResult r = s.ingest(flow_event(ts, "10.9.9.9", port, syn));
            for (const auto& a : r.alerts) {
                CHECK(a.detection_latency_events == 0);
                CHECK(a.raised_at == ts);
                if (a.rule == AlertRule::PortScan) got_scan.push_back(a.raised_at);
                if (a.rule == AlertRule::SynFlood) got_syn.push_back(a.raised_at);
            }

            scan_hist.emplace_back(ts, port);
            std::set<int> distinct;
            for (const auto& [t, p] : scan_hist)
                if (t > ts - cfg.portscan_window_s) distinct.insert(p);
            if (static_cast<int>(distinct.size()) >= cfg.portscan_distinct_ports) {
                if (!scan_episode) want_scan.push_back(ts);
                scan_episode = true;
            } else {
                scan_episode = false;
            }

            syn_hist.emplace_back(ts, syn);
            double sum = 0;
            for (const auto& [t, c] : syn_hist)
                if (t > ts - cfg.syn_window_s) sum += c;
            if (sum / cfg.syn_window_s > cfg.syn_rate_threshold_per_s) {
                if (!syn_episode) want_syn.push_back(ts);
                syn_episode = true;
            } else {
                syn_episode = false;
            }
        }
        CHECK(got_scan == want_scan);
        CHECK(got_syn == want_syn);
    }
}

// ---------------------------------------------------------------------------
// ML verdicts

TEST_CASE("verdicts respect the class, threshold, and severity rules") {
    ScenarioSpec spec;
    spec.n_per_class.fill(40);
    spec.seed = 7;
    spec.noise_level = 0.1;
    const LabeledDataset ds = gen_flows(spec);

    PlanConfig pc;
    pc.seed = 7;
    const PreprocessPlan plan = fit_plan(ds, pc);
    RandomForestConfig rf_cfg;
    rf_cfg.t_trees = 15;
    rf_cfg.seed = 7;
    const RandomForest rf = RandomForest::fit(plan.apply(ds.rows), ds.labels, rf_cfg);

    Sentinel s{RuleConfig{}};
    auto probe_flow = [](AttackGroup g) {
        FlowRecord flow;
        flow.flow_id = "probe";
        flow.src_ip = "198.51.100.9";
        flow.dst_ip = "203.0.113.5";
        flow.src_port = 40000;
        flow.dst_port = 80;
        flow.protocol = Protocol::Tcp;
        flow.timestamp = 3.0;
        flow.features = class_centroid(g);
        return flow;
    };

    CHECK(!s.ml_verdict(probe_flow(AttackGroup::Benign), rf, plan, 0.8).has_value());

    const auto dos = s.ml_verdict(probe_flow(AttackGroup::Dos), rf, plan, 0.8);
    REQUIRE(dos.has_value());
    CHECK(dos->rule == AlertRule::MlVerdict);
    CHECK(dos->severity == Severity::Critical);
    CHECK(dos->evidence.at("class") == "DOS");
    CHECK(dos->source_ip.value() == "198.51.100.9");
    CHECK(dos->raised_at == 3.0);

    const auto probe = s.ml_verdict(probe_flow(AttackGroup::Other), rf, plan, 0.8);
    REQUIRE(probe.has_value());
    CHECK(probe->severity == Severity::Warning);
    CHECK(probe->evidence.at("class") == "OTHER");

    CHECK_THROWS_AS(s.ml_verdict(probe_flow(AttackGroup::Dos), rf, plan, 0.0), BadConfigError);
    CHECK_THROWS_AS(s.ml_verdict(probe_flow(AttackGroup::Dos), rf, plan, 1.0), BadConfigError);

    // A verdict below the confidence bar is withheld.
    class FixedModel : public Model {
    public:
        explicit FixedModel(int d) : d_(d) {
            probs_ = Vector::Constant(kNumGroups, 0.4 / (kNumGroups - 1));
            probs_[group_code(AttackGroup::Dos)] = 0.6;
        }
        std::string kind() const override { return "fixed_stub"; }
        int input_dim() const override { return d_; }
        int num_classes() const override { return kNumGroups; }
        Vector predict_proba(ConstVectorRef) const override { return probs_; }
        nlohmann::json hyperparameters_json() const override { return nlohmann::json::object(); }
        nlohmann::json parameters_json() const override { return nlohmann::json::object(); }

    private:
        int d_;
        Vector probs_;
    };
    const FixedModel fixed(static_cast<int>(plan.selected.size()));
    CHECK(!s.ml_verdict(probe_flow(AttackGroup::Dos), fixed, plan, 0.8).has_value());
    const auto low_bar = s.ml_verdict(probe_flow(AttackGroup::Dos), fixed, plan, 0.5);
    REQUIRE(low_bar.has_value());
    CHECK(low_bar->evidence.at("probability").substr(0, 3) == "0.6");
}

// ---------------------------------------------------------------------------
// configuration and event IO

TEST_CASE("rule configs validate keys and positivity") {
    const RuleConfig def;
    const RuleConfig back = RuleConfig::from_json(def.to_json());
    CHECK(back.to_json() == def.to_json());

    CHECK_THROWS_AS(RuleConfig::from_json({{"max_retry", 3}}), BadConfigError);
    CHECK_THROWS_AS(RuleConfig::from_json({{"maxretry", 0}}), BadConfigError);
    CHECK_THROWS_AS(RuleConfig::from_json({{"findtime_s", -1.0}}), BadConfigError);
    CHECK_THROWS_AS(RuleConfig::from_json({{"cpu_trigger_pct", 0.0}}), BadConfigError);

    const RuleConfig partial = RuleConfig::from_json({{"maxretry", 3}});
    CHECK(partial.maxretry == 3);
    CHECK(partial.findtime_s == def.findtime_s);
    CHECK(partial.bantime_s == def.bantime_s);
}

TEST_CASE("rule configs load from disk with explicit errors") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "flowsentry_ops_cfg";
    fs::create_directories(dir);

    {
        std::ofstream out(dir / "rules.json");
        out << "{\"maxretry\": 2, \"bantime_s\": 60}\n";
    }
    const RuleConfig cfg = RuleConfig::load(dir / "rules.json");
    CHECK(cfg.maxretry == 2);
    CHECK(cfg.bantime_s == 60);
    CHECK(cfg.findtime_s == RuleConfig{}.findtime_s);

    CHECK_THROWS_AS(RuleConfig::load(dir / "absent.json"), IoError);
    {
        std::ofstream out(dir / "broken.json");
        out << "{maxretry: oops\n";
    }
    CHECK_THROWS_AS(RuleConfig::load(dir / "broken.json"), IoError);
    fs::remove_all(dir);
}

TEST_CASE("event streams round-trip through JSON Lines") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "flowsentry_ops_events";
    fs::create_directories(dir);

    std::vector<SecurityEvent> events;
    events.push_back(auth_event(1.25, "10.0.0.9", false));
    SecurityEvent flow = flow_event(2.5, "10.0.0.9", 443, 3.5);
    std::get<FlowSeen>(flow.payload).flow.raw_label = "Benign";
    std::get<FlowSeen>(flow.payload).flow.features = class_centroid(AttackGroup::Benign);
    events.push_back(std::move(flow));
    events.push_back(resource_event(3.75, 42.5));

    const fs::path path = dir / "events.jsonl";
    write_events_jsonl(events, path);
    const std::vector<SecurityEvent> back = read_events_jsonl(path);
    REQUIRE(back.size() == events.size());
    for (size_t i = 0; i < events.size(); ++i)
        CHECK(event_to_json(back[i]).dump() == event_to_json(events[i]).dump());

    // Blank lines are skipped; the first bad line is named.
    {
        std::ofstream out(dir / "gappy.jsonl");
        out << event_to_json(events[0]).dump() << "\n\n" << event_to_json(events[2]).dump() << "\n";
    }
    CHECK(read_events_jsonl(dir / "gappy.jsonl").size() == 2);

    {
        std::ofstream out(dir / "bad.jsonl");
        out << event_to_json(events[0]).dump() << "\n";
        out << event_to_json(events[0]).dump() << "\n";
        out << "{ not json\n";
    }
    try {
        read_events_jsonl(dir / "bad.jsonl");
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find(":3: ") != std::string::npos);
        CHECK(std::string(e.what()).find("bad.jsonl") != std::string::npos);
    }

    // Structurally valid JSON with out-of-range fields is also positional.
    {
        std::ofstream out(dir / "range.jsonl");
        out << event_to_json(events[0]).dump() << "\n";
        out << R"({"kind":"resource","timestamp":4,"cpu_pct":200,"mem_pct":1,)"
            << R"("net_in_bps":0,"net_out_bps":0,"dropped_pkts":0,"malformed_pkts":0})" << "\n";
    }
    try {
        read_events_jsonl(dir / "range.jsonl");
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find(":2: ") != std::string::npos);
    }

    CHECK_THROWS_AS(read_events_jsonl(dir / "missing.jsonl"), IoError);
    CHECK_THROWS_AS(event_from_json({{"kind", "mystery"}, {"timestamp", 1.0}}), BadConfigError);
    fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// scenario generator: flows

TEST_CASE("single-class specs produce exactly the requested rows") {
    ScenarioSpec spec;
    spec.n_per_class[static_cast<size_t>(group_code(AttackGroup::Dos))] = 100;
    spec.seed = 3;
    const LabeledDataset ds = gen_flows(spec);
    CHECK(ds.n() == 100);
    CHECK(ds.schema == canonical_schema());
    for (int label : ds.labels) CHECK(label == group_code(AttackGroup::Dos));
}

TEST_CASE("generation is bit-identical per seed and varies across seeds") {
    ScenarioSpec spec;
    spec.n_per_class.fill(30);
    spec.seed = 9;
    spec.noise_level = 0.25;
    const LabeledDataset a = gen_flows(spec);
    const LabeledDataset b = gen_flows(spec);
    CHECK(a.labels == b.labels);
    CHECK((a.rows - b.rows).cwiseAbs().maxCoeff() == 0.0);

    spec.seed = 10;
    const LabeledDataset c = gen_flows(spec);
    CHECK((a.rows - c.rows).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("zero noise reproduces the documented centroids exactly") {
    ScenarioSpec spec;
    spec.n_per_class.fill(3);
    spec.noise_level = 0.0;
    const LabeledDataset ds = gen_flows(spec);
    for (Eigen::Index i = 0; i < ds.rows.rows(); ++i) {
        const Vector& c = class_centroid(static_cast<AttackGroup>(ds.labels[static_cast<size_t>(i)]));
        CHECK((ds.rows.row(i).transpose() - c).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("per-class feature means stay near their centroids under noise") {
    ScenarioSpec spec;
    spec.n_per_class.fill(200);
    spec.seed = 11;
    spec.noise_level = 0.3;
    const LabeledDataset ds = gen_flows(spec);

    for (int g = 0; g < kNumGroups; ++g) {
        const Vector& centroid = class_centroid(static_cast<AttackGroup>(g));
        const Vector& spread = class_spread(static_cast<AttackGroup>(g));
        Vector mean = Vector::Zero(ds.d());
        int n = 0;
        for (Eigen::Index i = 0; i < ds.rows.rows(); ++i) {
            if (ds.labels[static_cast<size_t>(i)] != g) continue;
            mean += ds.rows.row(i).transpose();
            ++n;
        }
        mean /= n;
        for (Eigen::Index j = 0; j < mean.size(); ++j)
            CHECK(std::abs(mean[j] - centroid[j]) <= 3 * spec.noise_level * spread[j]);
    }
}

TEST_CASE("a shallow tree separates the seven classes") {
    ScenarioSpec spec;
    spec.n_per_class.fill(100);
    spec.seed = 21;
    spec.noise_level = 0.3;
    const LabeledDataset ds = gen_flows(spec);

    TreeFitConfig cfg;
    cfg.max_depth = 3;
    cfg.n_classes = kNumGroups;
    const DecisionTree tree =
        fit_tree(ds.rows, ds.labels, Vector::Ones(ds.rows.rows()), cfg);
    int hits = 0;
    for (Eigen::Index i = 0; i < ds.rows.rows(); ++i)
        if (tree.predict_class(ds.rows.row(i).transpose()) == ds.labels[static_cast<size_t>(i)])
            ++hits;
    CHECK(static_cast<double>(hits) / static_cast<double>(ds.n()) >= 0.9);
}

TEST_CASE("flow specs are validated") {
    ScenarioSpec spec;  // all counts zero
    CHECK_THROWS_AS(gen_flows(spec), BadSpecError);

    spec.n_per_class.fill(5);
    spec.noise_level = 1.5;
    CHECK_THROWS_AS(gen_flows(spec), BadSpecError);
    spec.noise_level = -0.1;
    CHECK_THROWS_AS(gen_flows(spec), BadSpecError);

    spec.noise_level = 0.1;
    spec.n_per_class[0] = -1;
    CHECK_THROWS_AS(gen_flows(spec), BadSpecError);
}

// ---------------------------------------------------------------------------
// scenario generator: event streams

TEST_CASE("event timestamps strictly increase in every scenario") {
    for (const Scenario sc : {Scenario::Benign, Scenario::PortScan, Scenario::SshBruteForce,
                              Scenario::SynFlood, Scenario::MixedDataset}) {
        ScenarioSpec spec;
        spec.scenario = sc;
        spec.seed = 13;
        const std::vector<SecurityEvent> events = gen_events(spec);
        REQUIRE(!events.empty());
        for (size_t i = 1; i < events.size(); ++i)
            CHECK(events[i].timestamp > events[i - 1].timestamp);
    }
}

TEST_CASE("the brute-force scenario earns one ban at the fifth failure") {
    ScenarioSpec spec;
    spec.scenario = Scenario::SshBruteForce;  // 8 failures, 5 s apart
    const std::vector<SecurityEvent> events = gen_events(spec);
    REQUIRE(events.size() == 8);

    Sentinel s{RuleConfig{}};
    const ReplaySummary sum = replay(s, events);
    REQUIRE(sum.bans.size() == 1);
    CHECK(sum.bans[0].banned_at == events[4].timestamp);  // event #5
    CHECK(sum.bans[0].ip == spec.events.attacker_ip);
    CHECK(count_rule(sum.alerts, AlertRule::BruteForce) == 1);
    CHECK(sum.suppressed == 3);  // the remaining failures hit the ban
}

TEST_CASE("the benign scenario raises nothing") {
    ScenarioSpec spec;
    spec.scenario = Scenario::Benign;
    spec.seed = 17;
    Sentinel s{RuleConfig{}};
    const ReplaySummary sum = replay(s, gen_events(spec));
    CHECK(sum.alerts.empty());
    CHECK(sum.bans.empty());
    CHECK(sum.suppressed == 0);
}

TEST_CASE("the scan scenario trips the distinct-port rule once") {
    ScenarioSpec spec;
    spec.scenario = Scenario::PortScan;  // 30 ports, 0.5 s apart
    spec.seed = 19;
    Sentinel s{RuleConfig{}};
    const ReplaySummary sum = replay(s, gen_events(spec));
    REQUIRE(count_rule(sum.alerts, AlertRule::PortScan) == 1);
    CHECK(sum.alerts.size() == 1);
    CHECK(sum.bans.empty());
    // The 20th distinct port is the 20th flow of the scan.
    CHECK(sum.alerts[0].raised_at == 19 * 0.5);
}

TEST_CASE("the flood scenario trips the rate and cpu rules") {
    ScenarioSpec spec;
    spec.scenario = Scenario::SynFlood;
    spec.seed = 23;
    Sentinel s{RuleConfig{}};
    const ReplaySummary sum = replay(s, gen_events(spec));
    CHECK(count_rule(sum.alerts, AlertRule::SynFlood) == 1);
    CHECK(count_rule(sum.alerts, AlertRule::CpuHigh) == 1);
    CHECK(sum.bans.empty());
}

TEST_CASE("the mixed scenario bans the attacker early, muting later phases") {
    ScenarioSpec spec;
    spec.scenario = Scenario::MixedDataset;
    spec.seed = 29;
    const std::vector<SecurityEvent> events = gen_events(spec);
    CHECK(events.size() == 230);  // 60 benign + 8 auth + 30 scan + 120 flood + 12 resource

    Sentinel s{RuleConfig{}};
    const ReplaySummary sum = replay(s, events);
    REQUIRE(sum.bans.size() == 1);
    CHECK(sum.bans[0].ban_count == 1);
    CHECK(count_rule(sum.alerts, AlertRule::BruteForce) == 1);
    // The attacker is banned for an hour, so its scan and flood flows are
    // suppressed; only the un-attributed resource ramp still fires.
    CHECK(count_rule(sum.alerts, AlertRule::CpuHigh) == 1);
    CHECK(count_rule(sum.alerts, AlertRule::PortScan) == 0);
    CHECK(count_rule(sum.alerts, AlertRule::SynFlood) == 0);
    CHECK(sum.suppressed == 153);  // 3 auth + 30 scan + 120 flood
}

TEST_CASE("event specs validate their parameters") {
    ScenarioSpec spec;
    spec.scenario = Scenario::SshBruteForce;
    spec.events.auth_interval_s = 0;
    CHECK_THROWS_AS(gen_events(spec), BadSpecError);

    spec.events.auth_interval_s = 5;
    spec.events.attacker_ip.clear();
    CHECK_THROWS_AS(gen_events(spec), BadSpecError);

    spec.events.attacker_ip = "198.51.100.66";
    spec.events.flood_flows = -1;
    CHECK_THROWS_AS(gen_events(spec), BadSpecError);
}

TEST_CASE("scenario specs round-trip through JSON") {
    ScenarioSpec spec;
    spec.scenario = Scenario::PortScan;
    spec.n_per_class.fill(12);
    spec.seed = 99;
    spec.noise_level = 0.4;
    spec.events.scan_ports = 25;
    spec.events.attacker_ip = "192.0.2.200";

    const nlohmann::json j = spec.to_json();
    const ScenarioSpec back = ScenarioSpec::from_json(j);
    CHECK(back.to_json().dump() == j.dump());
    CHECK(back.scenario == Scenario::PortScan);
    CHECK(back.events.scan_ports == 25);
    CHECK(back.events.flood_flows == spec.events.flood_flows);  // default survived

    CHECK_THROWS_AS(ScenarioSpec::from_json({{"scenario", "nmap"}}), BadSpecError);
    CHECK_THROWS_AS(ScenarioSpec::from_json({{"noise_level", 2.0}}), BadSpecError);
    CHECK_THROWS_AS(ScenarioSpec::from_json({{"n_per_class", {{"MARTIAN", 5}}}}), BadSpecError);

    for (const Scenario sc : {Scenario::Benign, Scenario::PortScan, Scenario::SshBruteForce,
                              Scenario::SynFlood, Scenario::MixedDataset})
        CHECK(scenario_from_name(scenario_name(sc)) == sc);
    CHECK_THROWS_AS(scenario_from_name("hping3"), BadSpecError);
}
