#include "flowsentry/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "flowsentry/errors.hpp"

namespace flowsentry {

namespace {

const std::array<std::string, kNumGroups> kGroupNames = {
    "BENIGN", "DOS", "BRUTEFORCE", "INJECTION", "HIJACKING", "RCE", "OTHER"};

const std::array<std::string, 3> kProtocolNames = {"TCP", "UDP", "ICMP"};

const std::vector<std::string> kCanonicalSchema = {
    "duration_s",    "fwd_pkts",      "bwd_pkts",     "fwd_bytes",     "bwd_bytes",
    "pkt_len_min",   "pkt_len_max",   "pkt_len_mean", "pkt_len_std",   "fwd_iat_mean",
    "fwd_iat_std",   "bwd_iat_mean",  "bwd_iat_std",  "syn_count",     "ack_count",
    "fin_count",     "rst_count",     "psh_count",    "urg_count",     "down_up_ratio",
    "active_mean",   "idle_mean",     "header_len_fwd", "header_len_bwd"};

}  // namespace

const std::string& group_name(AttackGroup g) { return kGroupNames.at(static_cast<size_t>(g)); }

const std::string& group_name(int code) {
    if (code < 0 || code >= kNumGroups) throw Error("group code out of range: " + std::to_string(code));
    return kGroupNames[static_cast<size_t>(code)];
}

AttackGroup group_from_name(const std::string& name) {
    for (int i = 0; i < kNumGroups; ++i) {
        if (kGroupNames[static_cast<size_t>(i)] == name) return static_cast<AttackGroup>(i);
    }
    throw Error("unknown group name: " + name);
}

const std::string& protocol_name(Protocol p) { return kProtocolNames.at(static_cast<size_t>(p)); }

Protocol protocol_from_name(const std::string& name) {
    for (size_t i = 0; i < kProtocolNames.size(); ++i) {
        if (kProtocolNames[i] == name) return static_cast<Protocol>(i);
    }
    throw Error("unknown protocol: " + name);
}

const std::vector<std::string>& canonical_schema() { return kCanonicalSchema; }

int canonical_feature_index(const std::string& name) {
    auto it = std::find(kCanonicalSchema.begin(), kCanonicalSchema.end(), name);
    return it == kCanonicalSchema.end() ? -1 : static_cast<int>(it - kCanonicalSchema.begin());
}

void validate_flow(const FlowRecord& flow) {
    const auto& schema = canonical_schema();
    if (flow.features.size() != static_cast<Eigen::Index>(schema.size())) {
        std::ostringstream os;
        os << "flow " << flow.flow_id << ": expected " << schema.size() << " features, got "
           << flow.features.size();
        throw Error(os.str());
    }
    auto f = [&](const char* name) { return flow.features[canonical_feature_index(name)]; };

    if (flow.src_port < 0 || flow.src_port > 65535 || flow.dst_port < 0 || flow.dst_port > 65535)
        throw Error("flow " + flow.flow_id + ": port out of range");
    if (f("duration_s") < 0) throw Error("flow " + flow.flow_id + ": negative duration");

    for (const char* name : {"fwd_pkts", "bwd_pkts", "fwd_bytes", "bwd_bytes", "syn_count",
                             "ack_count", "fin_count", "rst_count", "psh_count", "urg_count",
                             "header_len_fwd", "header_len_bwd"}) {
        if (f(name) < 0) throw Error("flow " + flow.flow_id + ": negative " + name);
    }
    for (Eigen::Index i = 0; i < flow.features.size(); ++i) {
        if (!std::isfinite(flow.features[i]))
            throw Error("flow " + flow.flow_id + ": non-finite feature " + schema[static_cast<size_t>(i)]);
    }
    if (f("fwd_pkts") + f("bwd_pkts") > 0) {
        if (!(f("pkt_len_min") <= f("pkt_len_mean") && f("pkt_len_mean") <= f("pkt_len_max")))
            throw Error("flow " + flow.flow_id + ": packet length ordering violated");
    }
}

}  // namespace flowsentry
