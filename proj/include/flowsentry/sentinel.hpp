#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowsentry/model.hpp"
#include "flowsentry/preprocess.hpp"
#include "flowsentry/types.hpp"

namespace flowsentry {

struct AuthAttempt {
    std::string source_ip;
    bool success = false;
    std::string service;
};

struct FlowSeen {
    FlowRecord flow;
};

struct ResourceSample {
    double cpu_pct = 0;
    double mem_pct = 0;
    double net_in_bps = 0;
    double net_out_bps = 0;
    std::int64_t dropped_pkts = 0;
    std::int64_t malformed_pkts = 0;
};

struct SecurityEvent {
    double timestamp = 0;
    std::variant<AuthAttempt, FlowSeen, ResourceSample> payload;
};

nlohmann::json event_to_json(const SecurityEvent& ev);
SecurityEvent event_from_json(const nlohmann::json& j);

// Thresholds for the detect/ban rules. All values must be positive.
struct RuleConfig {
    int maxretry = 5;
    double findtime_s = 600;
    double bantime_s = 3600;
    double ban_escalation_factor = 2.0;  // 1.0 disables escalation
    int portscan_distinct_ports = 20;
    double portscan_window_s = 60;
    double syn_rate_threshold_per_s = 100;
    double syn_window_s = 10;
    double cpu_trigger_pct = 90;
    int cpu_consecutive_samples = 5;

    nlohmann::json to_json() const;
    // Missing keys take defaults; unknown keys and non-positive values are
    // rejected with BadConfigError.
    static RuleConfig from_json(const nlohmann::json& j);
    static RuleConfig load(const std::filesystem::path& path);
};

struct BanEntry {
    std::string ip;
    double banned_at = 0;
    double expires_at = 0;
    std::string reason;
    int ban_count = 1;  // lifetime bans of this ip, including this one
};

enum class AlertRule { BruteForce, PortScan, SynFlood, CpuHigh, MlVerdict };
enum class Severity { Info, Warning, Critical };

const std::string& alert_rule_name(AlertRule r);
const std::string& severity_name(Severity s);

struct AlertRecord {
    std::uint64_t alert_id = 0;
    AlertRule rule = AlertRule::BruteForce;
    std::optional<std::string> source_ip;
    Severity severity = Severity::Warning;
    std::map<std::string, std::string> evidence;  // never empty
    double raised_at = 0;
    int detection_latency_events = 0;  // threshold rules fire at the crossing event
};

nlohmann::json to_json(const BanEntry& ban);
nlohmann::json to_json(const AlertRecord& alert);

struct IngestResult {
    std::vector<AlertRecord> alerts;
    std::vector<BanEntry> bans;
    bool suppressed = false;  // event came from a currently banned ip
};

// Single-writer detect/ban state machine over a timestamp-ordered event
// stream. Brute-force failures, port scans, SYN-flood rate and CPU streaks
// are tracked with sliding windows; alerts fire at the crossing event, once
// per episode. Events from banned source ips are recorded but suppressed and
// advance no rule state.
class Sentinel {
public:
    explicit Sentinel(RuleConfig cfg = {});

    // Throws TimeRegressionError (state unchanged) when the event is older
    // than the last ingested one; equal timestamps are allowed.
    IngestResult ingest(const SecurityEvent& ev);

    // Classifies a flow and raises an MlVerdict alert when the predicted
    // class is not BENIGN and its probability reaches the threshold.
    // Severity: critical for RCE/HIJACKING/DOS, warning otherwise.
    std::optional<AlertRecord> ml_verdict(const FlowRecord& flow, const Model& model,
                                          const PreprocessPlan& plan, double threshold);

    // Drops bans with expires_at <= now. Idempotent.
    void expire_bans(double now);

    bool is_banned(const std::string& ip, double at) const;
    std::vector<BanEntry> active_bans(double at) const;

    const RuleConfig& config() const { return cfg_; }
    double last_timestamp() const { return last_ts_; }

private:
    struct ScanState {
        std::deque<std::pair<double, int>> events;  // (ts, dst_port)
        std::map<int, int> port_counts;
        bool episode = false;
    };

    RuleConfig cfg_;
    double last_ts_;
    std::uint64_t next_alert_id_ = 1;

    std::map<std::string, std::deque<double>> fail_times_;
    std::map<std::string, int> lifetime_bans_;
    std::map<std::string, BanEntry> active_bans_;

    std::map<std::string, ScanState> scans_;

    std::deque<std::pair<double, double>> syn_events_;  // (ts, syn_count)
    double syn_sum_ = 0;
    bool syn_episode_ = false;

    int cpu_streak_ = 0;
    bool cpu_episode_ = false;

    AlertRecord make_alert(AlertRule rule, std::optional<std::string> ip, Severity sev,
                           std::map<std::string, std::string> evidence, double at);
    void handle_auth(const AuthAttempt& a, double ts, IngestResult& out);
    void handle_flow(const FlowSeen& f, double ts, IngestResult& out);
    void handle_resource(const ResourceSample& r, double ts, IngestResult& out);
};

// JSON Lines event stream I/O. Reading validates each event and reports the
// first bad line in the error message.
void write_events_jsonl(const std::vector<SecurityEvent>& events, const std::filesystem::path& path);
std::vector<SecurityEvent> read_events_jsonl(const std::filesystem::path& path);

}  // namespace flowsentry
