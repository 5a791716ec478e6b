#include "flowsentry/sentinel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "flowsentry/errors.hpp"

namespace flowsentry {

namespace {

const std::array<std::string, 5> kRuleNames = {"brute_force", "port_scan", "syn_flood",
                                               "cpu_high", "ml_verdict"};
const std::array<std::string, 3> kSeverityNames = {"info", "warning", "critical"};

std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

const std::string& alert_rule_name(AlertRule r) {
    return kRuleNames[static_cast<size_t>(static_cast<int>(r))];
}

const std::string& severity_name(Severity s) {
    return kSeverityNames[static_cast<size_t>(static_cast<int>(s))];
}

nlohmann::json event_to_json(const SecurityEvent& ev) {
    nlohmann::json j;
    j["timestamp"] = ev.timestamp;
    if (const auto* a = std::get_if<AuthAttempt>(&ev.payload)) {
        j["kind"] = "auth";
        j["source_ip"] = a->source_ip;
        j["success"] = a->success;
        j["service"] = a->service;
    } else if (const auto* f = std::get_if<FlowSeen>(&ev.payload)) {
        j["kind"] = "flow";
        const FlowRecord& flow = f->flow;
        j["flow_id"] = flow.flow_id;
        j["src_ip"] = flow.src_ip;
        j["dst_ip"] = flow.dst_ip;
        j["src_port"] = flow.src_port;
        j["dst_port"] = flow.dst_port;
        j["protocol"] = protocol_name(flow.protocol);
        j["flow_timestamp"] = flow.timestamp;
        j["features"] = std::vector<double>(flow.features.begin(), flow.features.end());
        if (flow.raw_label) j["raw_label"] = *flow.raw_label;
    } else {
        const auto& r = std::get<ResourceSample>(ev.payload);
        j["kind"] = "resource";
        j["cpu_pct"] = r.cpu_pct;
        j["mem_pct"] = r.mem_pct;
        j["net_in_bps"] = r.net_in_bps;
        j["net_out_bps"] = r.net_out_bps;
        j["dropped_pkts"] = r.dropped_pkts;
        j["malformed_pkts"] = r.malformed_pkts;
    }
    return j;
}

SecurityEvent event_from_json(const nlohmann::json& j) {
    SecurityEvent ev;
    ev.timestamp = j.at("timestamp").get<double>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "auth") {
        AuthAttempt a;
        a.source_ip = j.at("source_ip").get<std::string>();
        a.success = j.at("success").get<bool>();
        a.service = j.at("service").get<std::string>();
        ev.payload = std::move(a);
    } else if (kind == "flow") {
        FlowRecord flow;
        flow.flow_id = j.at("flow_id").get<std::string>();
        flow.src_ip = j.at("src_ip").get<std::string>();
        flow.dst_ip = j.at("dst_ip").get<std::string>();
        flow.src_port = j.at("src_port").get<int>();
        flow.dst_port = j.at("dst_port").get<int>();
        flow.protocol = protocol_from_name(j.at("protocol").get<std::string>());
        flow.timestamp = j.at("flow_timestamp").get<double>();
        auto feats = j.at("features").get<std::vector<double>>();
        flow.features =
            Eigen::Map<const Vector>(feats.data(), static_cast<Eigen::Index>(feats.size()));
        if (j.contains("raw_label")) flow.raw_label = j.at("raw_label").get<std::string>();
        validate_flow(flow);
        ev.payload = FlowSeen{std::move(flow)};
    } else if (kind == "resource") {
        ResourceSample r;
        r.cpu_pct = j.at("cpu_pct").get<double>();
        r.mem_pct = j.at("mem_pct").get<double>();
        r.net_in_bps = j.at("net_in_bps").get<double>();
        r.net_out_bps = j.at("net_out_bps").get<double>();
        r.dropped_pkts = j.at("dropped_pkts").get<std::int64_t>();
        r.malformed_pkts = j.at("malformed_pkts").get<std::int64_t>();
        if (r.cpu_pct < 0 || r.cpu_pct > 100 || r.mem_pct < 0 || r.mem_pct > 100)
            throw BadConfigError("percentages must lie in [0, 100]");
        ev.payload = r;
    } else {
        throw BadConfigError("unknown event kind: " + kind);
    }
    return ev;
}

nlohmann::json RuleConfig::to_json() const {
    nlohmann::json j;
    j["maxretry"] = maxretry;
    j["findtime_s"] = findtime_s;
    j["bantime_s"] = bantime_s;
    j["ban_escalation_factor"] = ban_escalation_factor;
    j["portscan_distinct_ports"] = portscan_distinct_ports;
    j["portscan_window_s"] = portscan_window_s;
    j["syn_rate_threshold_per_s"] = syn_rate_threshold_per_s;
    j["syn_window_s"] = syn_window_s;
    j["cpu_trigger_pct"] = cpu_trigger_pct;
    j["cpu_consecutive_samples"] = cpu_consecutive_samples;
    return j;
}

RuleConfig RuleConfig::from_json(const nlohmann::json& j) {
    RuleConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "maxretry") {
            cfg.maxretry = value.get<int>();
        } else if (key == "findtime_s") {
            cfg.findtime_s = value.get<double>();
        } else if (key == "bantime_s") {
            cfg.bantime_s = value.get<double>();
        } else if (key == "ban_escalation_factor") {
            cfg.ban_escalation_factor = value.get<double>();
        } else if (key == "portscan_distinct_ports") {
            cfg.portscan_distinct_ports = value.get<int>();
        } else if (key == "portscan_window_s") {
            cfg.portscan_window_s = value.get<double>();
        } else if (key == "syn_rate_threshold_per_s") {
            cfg.syn_rate_threshold_per_s = value.get<double>();
        } else if (key == "syn_window_s") {
            cfg.syn_window_s = value.get<double>();
        } else if (key == "cpu_trigger_pct") {
            cfg.cpu_trigger_pct = value.get<double>();
        } else if (key == "cpu_consecutive_samples") {
            cfg.cpu_consecutive_samples = value.get<int>();
        } else {
            throw BadConfigError("unknown rule config key: " + key);
        }
    }
    if (cfg.maxretry <= 0 || cfg.findtime_s <= 0 || cfg.bantime_s <= 0 ||
        cfg.ban_escalation_factor <= 0 || cfg.portscan_distinct_ports <= 0 ||
        cfg.portscan_window_s <= 0 || cfg.syn_rate_threshold_per_s <= 0 || cfg.syn_window_s <= 0 ||
        cfg.cpu_trigger_pct <= 0 || cfg.cpu_consecutive_samples <= 0)
        throw BadConfigError("all rule thresholds must be positive");
    return cfg;
}

RuleConfig RuleConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed rule config " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::json to_json(const BanEntry& ban) {
    nlohmann::json j;
    j["ip"] = ban.ip;
    j["banned_at"] = ban.banned_at;
    j["expires_at"] = ban.expires_at;
    j["reason"] = ban.reason;
    j["ban_count"] = ban.ban_count;
    return j;
}

nlohmann::json to_json(const AlertRecord& alert) {
    nlohmann::json j;
    j["alert_id"] = alert.alert_id;
    j["rule"] = alert_rule_name(alert.rule);
    if (alert.source_ip) j["source_ip"] = *alert.source_ip;
    j["severity"] = severity_name(alert.severity);
    j["evidence"] = alert.evidence;
    j["raised_at"] = alert.raised_at;
    j["detection_latency_events"] = alert.detection_latency_events;
    return j;
}

Sentinel::Sentinel(RuleConfig cfg)
    : cfg_(RuleConfig::from_json(cfg.to_json())),  // reuse the positivity checks
      last_ts_(-std::numeric_limits<double>::infinity()) {}

AlertRecord Sentinel::make_alert(AlertRule rule, std::optional<std::string> ip, Severity sev,
                                 std::map<std::string, std::string> evidence, double at) {
    AlertRecord alert;
    alert.alert_id = next_alert_id_++;
    alert.rule = rule;
    alert.source_ip = std::move(ip);
    alert.severity = sev;
    alert.evidence = std::move(evidence);
    alert.raised_at = at;
    alert.detection_latency_events = 0;
    return alert;
}

void Sentinel::handle_auth(const AuthAttempt& a, double ts, IngestResult& out) {
    if (a.success) return;

    auto& fails = fail_times_[a.source_ip];
    while (!fails.empty() && fails.front() <= ts - cfg_.findtime_s) fails.pop_front();
    fails.push_back(ts);

    if (static_cast<int>(fails.size()) >= cfg_.maxretry) {
        const int ban_count = ++lifetime_bans_[a.source_ip];
        const double duration =
            cfg_.bantime_s * std::pow(cfg_.ban_escalation_factor, ban_count - 1);
        BanEntry ban;
        ban.ip = a.source_ip;
        ban.banned_at = ts;
        ban.expires_at = ts + duration;
        ban.reason = "brute force: " + std::to_string(fails.size()) + " failed logins within " +
                     fmt_num(cfg_.findtime_s) + " s";
        ban.ban_count = ban_count;
        active_bans_[a.source_ip] = ban;

        out.alerts.push_back(make_alert(
            AlertRule::BruteForce, a.source_ip, Severity::Critical,
            {{"failures", std::to_string(fails.size())},
             {"window_s", fmt_num(cfg_.findtime_s)},
             {"service", a.service},
             {"ban_expires_at", fmt_num(ban.expires_at)}},
            ts));
        out.bans.push_back(std::move(ban));
        fails.clear();
    }
}

void Sentinel::handle_flow(const FlowSeen& f, double ts, IngestResult& out) {
    static const int syn_idx = canonical_feature_index("syn_count");
    const FlowRecord& flow = f.flow;

    // Port-scan rule: distinct destination ports per source within the window.
    ScanState& scan = scans_[flow.src_ip];
    while (!scan.events.empty() && scan.events.front().first <= ts - cfg_.portscan_window_s) {
        auto it = scan.port_counts.find(scan.events.front().second);
        if (--it->second == 0) scan.port_counts.erase(it);
        scan.events.pop_front();
    }
    scan.events.emplace_back(ts, flow.dst_port);
    scan.port_counts[flow.dst_port]++;
    const int distinct = static_cast<int>(scan.port_counts.size());
    if (distinct >= cfg_.portscan_distinct_ports) {
        if (!scan.episode) {
            scan.episode = true;
            out.alerts.push_back(make_alert(AlertRule::PortScan, flow.src_ip, Severity::Warning,
                                            {{"distinct_ports", std::to_string(distinct)},
                                             {"window_s", fmt_num(cfg_.portscan_window_s)},
                                             {"dst_ip", flow.dst_ip}},
                                            ts));
        }
    } else {
        scan.episode = false;
    }

    // SYN-flood rule: aggregate SYN rate across all sources within the window.
    while (!syn_events_.empty() && syn_events_.front().first <= ts - cfg_.syn_window_s) {
        syn_sum_ -= syn_events_.front().second;
        syn_events_.pop_front();
    }
    const double syn_count = flow.features[syn_idx];
    syn_events_.emplace_back(ts, syn_count);
    syn_sum_ += syn_count;
    const double rate = syn_sum_ / cfg_.syn_window_s;
    if (rate > cfg_.syn_rate_threshold_per_s) {
        if (!syn_episode_) {
            syn_episode_ = true;
            out.alerts.push_back(make_alert(AlertRule::SynFlood, flow.src_ip, Severity::Critical,
                                            {{"syn_rate_per_s", fmt_num(rate)},
                                             {"threshold_per_s", fmt_num(cfg_.syn_rate_threshold_per_s)},
                                             {"window_s", fmt_num(cfg_.syn_window_s)}},
                                            ts));
        }
    } else {
        syn_episode_ = false;
    }
}

void Sentinel::handle_resource(const ResourceSample& r, double ts, IngestResult& out) {
    if (r.cpu_pct > cfg_.cpu_trigger_pct) {
        ++cpu_streak_;
        if (cpu_streak_ >= cfg_.cpu_consecutive_samples && !cpu_episode_) {
            cpu_episode_ = true;
            out.alerts.push_back(
                make_alert(AlertRule::CpuHigh, std::nullopt, Severity::Warning,
                           {{"cpu_pct", fmt_num(r.cpu_pct)},
                            {"trigger_pct", fmt_num(cfg_.cpu_trigger_pct)},
                            {"consecutive_samples", std::to_string(cpu_streak_)}},
                           ts));
        }
    } else {
        cpu_streak_ = 0;
        cpu_episode_ = false;
    }
}

IngestResult Sentinel::ingest(const SecurityEvent& ev) {
    if (ev.timestamp < last_ts_)
        throw TimeRegressionError("event at " + fmt_num(ev.timestamp) +
                                  " is older than the last ingested at " + fmt_num(last_ts_));
    last_ts_ = ev.timestamp;

    IngestResult out;
    const std::string* ip = nullptr;
    if (const auto* a = std::get_if<AuthAttempt>(&ev.payload)) ip = &a->source_ip;
    if (const auto* f = std::get_if<FlowSeen>(&ev.payload)) ip = &f->flow.src_ip;
    if (ip && is_banned(*ip, ev.timestamp)) {
        out.suppressed = true;
        return out;
    }

    if (const auto* a = std::get_if<AuthAttempt>(&ev.payload)) {
        handle_auth(*a, ev.timestamp, out);
    } else if (const auto* f = std::get_if<FlowSeen>(&ev.payload)) {
        handle_flow(*f, ev.timestamp, out);
    } else {
        handle_resource(std::get<ResourceSample>(ev.payload), ev.timestamp, out);
    }
    return out;
}

std::optional<AlertRecord> Sentinel::ml_verdict(const FlowRecord& flow, const Model& model,
                                                const PreprocessPlan& plan, double threshold) {
    if (threshold <= 0 || threshold >= 1)
        throw BadConfigError("verdict threshold must lie in (0, 1)");
    validate_flow(flow);

    Matrix raw(1, flow.features.size());
    raw.row(0) = flow.features.transpose();
    const Matrix prepared = plan.apply(raw);
    const Vector x = prepared.row(0).transpose();

    const int cls = model.predict_class(x);
    const double p = model.predict_proba(x)[cls];
    if (cls == group_code(AttackGroup::Benign) || p < threshold) return std::nullopt;

    const bool critical = cls == group_code(AttackGroup::Rce) ||
                          cls == group_code(AttackGroup::Hijacking) ||
                          cls == group_code(AttackGroup::Dos);
    return make_alert(AlertRule::MlVerdict, flow.src_ip,
                      critical ? Severity::Critical : Severity::Warning,
                      {{"class", group_name(cls)},
                       {"probability", fmt_num(p)},
                       {"flow_id", flow.flow_id}},
                      flow.timestamp);
}

void Sentinel::expire_bans(double now) {
    for (auto it = active_bans_.begin(); it != active_bans_.end();) {
        if (it->second.expires_at <= now) {
            it = active_bans_.erase(it);
        } else {
            ++it;
        }
    }
}

bool Sentinel::is_banned(const std::string& ip, double at) const {
    auto it = active_bans_.find(ip);
    return it != active_bans_.end() && at >= it->second.banned_at && at < it->second.expires_at;
}

std::vector<BanEntry> Sentinel::active_bans(double at) const {
    std::vector<BanEntry> out;
    for (const auto& [ip, ban] : active_bans_) {
        if (at >= ban.banned_at && at < ban.expires_at) out.push_back(ban);
    }
    return out;
}

void write_events_jsonl(const std::vector<SecurityEvent>& events,
                        const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const SecurityEvent& ev : events) out << event_to_json(ev).dump() << "\n";
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<SecurityEvent> read_events_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<SecurityEvent> events;
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            events.push_back(event_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return events;
}

}  // namespace flowsentry
