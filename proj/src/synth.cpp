#include "flowsentry/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include <nlohmann/json.hpp>

#include "flowsentry/errors.hpp"

namespace flowsentry {

namespace {

const std::array<std::string, 5> kScenarioNames = {"benign", "port_scan", "ssh_brute_force",
                                                   "syn_flood", "mixed_dataset"};

// Class-conditional generator parameters over the canonical 24-feature schema,
// mirrored in docs/synth_parameters.md. A generated value is
// centroid + noise_level * spread * N(0,1), clamped nonnegative with the
// packet-length ordering restored.
struct ClassParams {
    Vector centroid;
    Vector spread;
};

ClassParams make_params(std::initializer_list<std::pair<double, double>> rows) {
    ClassParams p;
    p.centroid.resize(static_cast<Eigen::Index>(rows.size()));
    p.spread.resize(static_cast<Eigen::Index>(rows.size()));
    Eigen::Index i = 0;
    for (const auto& [c, s] : rows) {
        p.centroid[i] = c;
        p.spread[i] = s;
        ++i;
    }
    return p;
}

const std::array<ClassParams, kNumGroups>& class_params() {
    // Feature order: duration_s, fwd_pkts, bwd_pkts, fwd_bytes, bwd_bytes,
    // pkt_len_min, pkt_len_max, pkt_len_mean, pkt_len_std, fwd_iat_mean,
    // fwd_iat_std, bwd_iat_mean, bwd_iat_std, syn_count, ack_count, fin_count,
    // rst_count, psh_count, urg_count, down_up_ratio, active_mean, idle_mean,
    // header_len_fwd, header_len_bwd.
    //
    // The first three features carry a binary low/high code that gives every
    // class a distinct 3-bit address (duration: 0.4|6, fwd_pkts: 12|450,
    // bwd_pkts: 8|160, identical within a level). A depth-3 axis-aligned tree
    // can therefore route all seven classes to pure leaves, which keeps the
    // shallow-tree separability gate meaningful; the remaining 21 features
    // add per-class signature structure on top.
    static const std::array<ClassParams, kNumGroups> params = {
        // BENIGN (dur hi, fwd lo, bwd lo): long, light interactive sessions.
        make_params({{6, 1.2},      {12, 2.4},   {8, 1.6},     {2400, 480}, {5200, 1000},
                     {60, 12},      {1200, 240}, {420, 80},    {180, 36},   {0.5, 0.1},
                     {0.2, 0.04},   {0.75, 0.15}, {0.3, 0.06}, {1, 0.2},    {20, 4},
                     {1, 0.2},      {0.5, 0.1},  {6, 1.2},     {0.1, 0.02}, {2.2, 0.44},
                     {4, 0.8},      {1.5, 0.3},  {384, 76},    {256, 51}}),
        // DOS (dur lo, fwd hi, bwd lo): SYN storm, almost no replies.
        make_params({{0.4, 0.08},   {450, 90},   {8, 1.6},     {54000, 10000}, {1200, 240},
                     {40, 8},       {64, 6},     {54, 4},      {6, 1.2},    {0.0009, 0.00018},
                     {0.0004, 0.00008}, {0.05, 0.01}, {0.02, 0.004}, {420, 84}, {2, 0.4},
                     {0.2, 0.04},   {25, 5},     {0.5, 0.1},   {0.05, 0.01}, {0.02, 0.005},
                     {0.35, 0.07},  {0.05, 0.01}, {9000, 1800}, {160, 32}}),
        // BRUTEFORCE (dur hi, fwd lo, bwd hi): drawn-out guessing with
        // chatty server responses.
        make_params({{6, 1.2},      {12, 2.4},   {160, 32},    {1800, 360}, {16000, 3200},
                     {48, 9},       {220, 44},   {95, 19},     {35, 7},     {0.5, 0.1},
                     {0.18, 0.036}, {0.04, 0.008}, {0.015, 0.003}, {4, 1},  {150, 30},
                     {3, 0.6},      {1.5, 0.3},  {12, 2.4},    {0.1, 0.02}, {8.9, 1.8},
                     {2.4, 0.48},   {0.3, 0.06}, {384, 76},    {5120, 1024}}),
        // INJECTION (dur lo, fwd lo, bwd hi): one oversized request, fat
        // response.
        make_params({{0.4, 0.08},   {12, 2.4},   {160, 32},    {12800, 2500}, {76000, 15000},
                     {70, 14},      {1450, 290}, {800, 150},   {420, 84},   {0.033, 0.0066},
                     {0.012, 0.0024}, {0.0025, 0.0005}, {0.001, 0.0002}, {1, 0.2}, {140, 28},
                     {1, 0.2},      {0.4, 0.08}, {10, 2},      {0.1, 0.02}, {5.9, 1.2},
                     {0.3, 0.06},   {0.25, 0.05}, {384, 76},   {5120, 1024}}),
        // HIJACKING (dur hi, fwd hi, bwd hi): long heavy takeover with reset
        // bursts.
        make_params({{6, 1.2},      {450, 90},   {160, 32},    {27000, 5400}, {9600, 1900},
                     {54, 10},      {800, 160},  {260, 52},    {130, 26},   {0.013, 0.0026},
                     {0.006, 0.0012}, {0.04, 0.008}, {0.015, 0.003}, {3, 0.6}, {300, 60},
                     {2, 0.4},      {15, 3},     {18, 3.6},    {0.6, 0.12}, {0.36, 0.07},
                     {3.5, 0.7},    {0.8, 0.16}, {14400, 2880}, {5120, 1024}}),
        // RCE (dur lo, fwd hi, bwd hi): quick exploit upstream, heavy payload
        // downstream.
        make_params({{0.4, 0.08},   {450, 90},   {160, 32},    {20000, 4000}, {96000, 19000},
                     {60, 12},      {1500, 300}, {900, 180},   {380, 76},   {0.0009, 0.00018},
                     {0.0004, 0.00008}, {0.0025, 0.0005}, {0.001, 0.0002}, {2, 0.4}, {280, 56},
                     {1, 0.2},      {0.8, 0.16}, {30, 6},      {0.2, 0.04}, {4.8, 0.96},
                     {0.35, 0.07},  {0.05, 0.01}, {9000, 1800}, {5120, 1024}}),
        // OTHER (dur lo, fwd lo, bwd lo): scan probes — tiny flows, tiny
        // payloads.
        make_params({{0.4, 0.08},   {12, 2.4},   {8, 1.6},     {528, 105},  {352, 70},
                     {40, 8},       {48, 9},     {44, 8},      {3, 0.6},    {0.033, 0.0066},
                     {0.012, 0.0024}, {0.05, 0.01}, {0.02, 0.004}, {2, 0.4}, {6, 1.2},
                     {0.2, 0.04},   {1, 0.2},    {0.1, 0.02},  {0.05, 0.01}, {0.67, 0.13},
                     {0.3, 0.06},   {0.01, 0.002}, {240, 48},  {160, 32}}),
    };
    return params;
}

Vector draw_features(AttackGroup g, double noise, std::mt19937_64& rng) {
    const ClassParams& p = class_params()[static_cast<size_t>(group_code(g))];
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector v(p.centroid.size());
    for (Eigen::Index j = 0; j < v.size(); ++j)
        v[j] = p.centroid[j] + noise * p.spread[j] * gauss(rng);
    v = v.cwiseMax(0.0);
    // Restore pkt_len_min <= pkt_len_mean <= pkt_len_max.
    static const int i_min = canonical_feature_index("pkt_len_min");
    static const int i_max = canonical_feature_index("pkt_len_max");
    static const int i_mean = canonical_feature_index("pkt_len_mean");
    v[i_min] = std::min(v[i_min], v[i_mean]);
    v[i_max] = std::max(v[i_max], v[i_mean]);
    return v;
}

void check_spec(const ScenarioSpec& spec) {
    if (spec.noise_level < 0 || spec.noise_level > 1)
        throw BadSpecError("noise_level must lie in [0, 1]");
    for (int g = 0; g < kNumGroups; ++g) {
        if (spec.n_per_class[static_cast<size_t>(g)] < 0)
            throw BadSpecError("negative row count for " + group_name(g));
    }
}

std::string flow_id(const char* prefix, std::int64_t k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%06lld", prefix, static_cast<long long>(k));
    return buf;
}

FlowRecord make_flow(std::string id, std::string src, std::string dst, int src_port, int dst_port,
                     double ts, Vector features, AttackGroup g) {
    FlowRecord flow;
    flow.flow_id = std::move(id);
    flow.src_ip = std::move(src);
    flow.dst_ip = std::move(dst);
    flow.src_port = src_port;
    flow.dst_port = dst_port;
    flow.protocol = Protocol::Tcp;
    flow.timestamp = ts;
    flow.features = std::move(features);
    flow.raw_label = group_name(g);
    return flow;
}

void append_benign_events(const ScenarioSpec& spec, double t0, std::mt19937_64& rng,
                          std::vector<SecurityEvent>& out) {
    static const std::array<std::string, 3> ips = {"192.0.2.10", "192.0.2.11", "192.0.2.12"};
    static const std::array<int, 3> ports = {443, 80, 8080};
    std::normal_distribution<double> cpu_noise(0.0, 1.0);

    for (int k = 0; k < spec.events.benign_events; ++k) {
        SecurityEvent ev;
        ev.timestamp = t0 + k * spec.events.benign_interval_s;
        if (k % 10 == 7) {
            // Sparse auth traffic: at most one failure per ip per stream, far
            // below any brute-force threshold.
            AuthAttempt a;
            a.source_ip = ips[static_cast<size_t>(k % 3)];
            a.success = (k % 20) != 17;
            a.service = "ssh";
            ev.payload = std::move(a);
        } else if (k % 10 == 5) {
            ResourceSample r;
            r.cpu_pct = std::clamp(50.0 + 8.0 * cpu_noise(rng), 0.0, 85.0);
            r.mem_pct = std::clamp(45.0 + 5.0 * cpu_noise(rng), 0.0, 90.0);
            r.net_in_bps = 4e6 + 4e5 * cpu_noise(rng);
            r.net_out_bps = 1.5e6 + 2e5 * cpu_noise(rng);
            r.dropped_pkts = 0;
            r.malformed_pkts = 0;
            ev.payload = r;
        } else {
            ev.payload = FlowSeen{make_flow(
                flow_id("bn", k), ips[static_cast<size_t>(k % 3)], "203.0.113.5", 40000 + k,
                ports[static_cast<size_t>(k % 3)], ev.timestamp,
                draw_features(AttackGroup::Benign, spec.noise_level, rng), AttackGroup::Benign)};
        }
        out.push_back(std::move(ev));
    }
}

void append_bruteforce_events(const ScenarioSpec& spec, double t0,
                              std::vector<SecurityEvent>& out) {
    for (int k = 0; k < spec.events.auth_failures; ++k) {
        SecurityEvent ev;
        ev.timestamp = t0 + k * spec.events.auth_interval_s;
        ev.payload = AuthAttempt{spec.events.attacker_ip, false, "ssh"};
        out.push_back(std::move(ev));
    }
}

void append_portscan_events(const ScenarioSpec& spec, double t0, std::mt19937_64& rng,
                            std::vector<SecurityEvent>& out) {
    for (int k = 0; k < spec.events.scan_ports; ++k) {
        SecurityEvent ev;
        ev.timestamp = t0 + k * spec.events.scan_interval_s;
        ev.payload = FlowSeen{make_flow(
            flow_id("ps", k), spec.events.attacker_ip, "203.0.113.5", 45000 + k, 1000 + k,
            ev.timestamp, draw_features(AttackGroup::Other, spec.noise_level, rng),
            AttackGroup::Other)};
        out.push_back(std::move(ev));
    }
}

void append_synflood_events(const ScenarioSpec& spec, double t0, std::mt19937_64& rng,
                            std::vector<SecurityEvent>& out) {
    static const int syn_idx = canonical_feature_index("syn_count");
    std::vector<SecurityEvent> burst;

    for (int k = 0; k < spec.events.flood_flows; ++k) {
        SecurityEvent ev;
        ev.timestamp = t0 + k * spec.events.flood_interval_s;
        Vector features = draw_features(AttackGroup::Dos, spec.noise_level, rng);
        features[syn_idx] = spec.events.flood_syn_per_flow;  // exact, for rate math
        ev.payload = FlowSeen{make_flow(flow_id("sf", k), spec.events.attacker_ip, "203.0.113.5",
                                        50000 + k, 80, ev.timestamp, std::move(features),
                                        AttackGroup::Dos)};
        burst.push_back(std::move(ev));
    }
    // cpu/mem ramp crossing the trigger a few samples in; offset avoids
    // timestamp collisions with the flow burst.
    for (int i = 0; i < spec.events.resource_samples; ++i) {
        SecurityEvent ev;
        ev.timestamp = t0 + 0.503 + i * 1.0;
        ResourceSample r;
        r.cpu_pct = i < 3 ? 62.0 + 8.0 * i : std::min(99.0, 95.0 + i % 3);
        r.mem_pct = std::min(96.0, 40.0 + 2.0 * i);
        r.net_in_bps = 2e7 + 1e6 * i;
        r.net_out_bps = 8e5;
        r.dropped_pkts = 50 * i;
        r.malformed_pkts = 20 * i;
        ev.payload = r;
        burst.push_back(std::move(ev));
    }
    std::sort(burst.begin(), burst.end(),
              [](const SecurityEvent& a, const SecurityEvent& b) { return a.timestamp < b.timestamp; });
    for (auto& ev : burst) out.push_back(std::move(ev));
}

}  // namespace

const std::string& scenario_name(Scenario s) {
    return kScenarioNames[static_cast<size_t>(static_cast<int>(s))];
}

Scenario scenario_from_name(const std::string& name) {
    for (size_t i = 0; i < kScenarioNames.size(); ++i) {
        if (kScenarioNames[i] == name) return static_cast<Scenario>(static_cast<int>(i));
    }
    throw BadSpecError("unknown scenario: " + name);
}

const Vector& class_centroid(AttackGroup g) {
    return class_params()[static_cast<size_t>(group_code(g))].centroid;
}

const Vector& class_spread(AttackGroup g) {
    return class_params()[static_cast<size_t>(group_code(g))].spread;
}

nlohmann::json ScenarioSpec::to_json() const {
    nlohmann::json counts;
    for (int g = 0; g < kNumGroups; ++g)
        counts[group_name(g)] = n_per_class[static_cast<size_t>(g)];
    nlohmann::json ev;
    ev["auth_failures"] = events.auth_failures;
    ev["auth_interval_s"] = events.auth_interval_s;
    ev["scan_ports"] = events.scan_ports;
    ev["scan_interval_s"] = events.scan_interval_s;
    ev["flood_flows"] = events.flood_flows;
    ev["flood_interval_s"] = events.flood_interval_s;
    ev["flood_syn_per_flow"] = events.flood_syn_per_flow;
    ev["resource_samples"] = events.resource_samples;
    ev["benign_events"] = events.benign_events;
    ev["benign_interval_s"] = events.benign_interval_s;
    ev["attacker_ip"] = events.attacker_ip;

    nlohmann::json j;
    j["scenario"] = scenario_name(scenario);
    j["n_per_class"] = std::move(counts);
    j["seed"] = seed;
    j["noise_level"] = noise_level;
    j["events"] = std::move(ev);
    j["generator_version"] = kGeneratorVersion;
    return j;
}

ScenarioSpec ScenarioSpec::from_json(const nlohmann::json& j) {
    ScenarioSpec spec;
    try {
        if (j.contains("scenario")) spec.scenario = scenario_from_name(j.at("scenario").get<std::string>());
        if (j.contains("n_per_class")) {
            for (const auto& [name, count] : j.at("n_per_class").items()) {
                const int g = group_code(group_from_name(name));
                spec.n_per_class[static_cast<size_t>(g)] = count.get<std::int64_t>();
            }
        }
        spec.seed = j.value("seed", std::uint64_t{0});
        spec.noise_level = j.value("noise_level", 0.1);
        if (j.contains("events")) {
            const nlohmann::json& ev = j.at("events");
            EventParams d;
            spec.events.auth_failures = ev.value("auth_failures", d.auth_failures);
            spec.events.auth_interval_s = ev.value("auth_interval_s", d.auth_interval_s);
            spec.events.scan_ports = ev.value("scan_ports", d.scan_ports);
            spec.events.scan_interval_s = ev.value("scan_interval_s", d.scan_interval_s);
            spec.events.flood_flows = ev.value("flood_flows", d.flood_flows);
            spec.events.flood_interval_s = ev.value("flood_interval_s", d.flood_interval_s);
            spec.events.flood_syn_per_flow = ev.value("flood_syn_per_flow", d.flood_syn_per_flow);
            spec.events.resource_samples = ev.value("resource_samples", d.resource_samples);
            spec.events.benign_events = ev.value("benign_events", d.benign_events);
            spec.events.benign_interval_s = ev.value("benign_interval_s", d.benign_interval_s);
            spec.events.attacker_ip = ev.value("attacker_ip", d.attacker_ip);
        }
    } catch (const BadSpecError&) {
        throw;
    } catch (const std::exception& e) {
        throw BadSpecError(std::string("invalid scenario spec: ") + e.what());
    }
    check_spec(spec);
    return spec;
}

LabeledDataset gen_flows(const ScenarioSpec& spec) {
    check_spec(spec);
    std::int64_t total = 0;
    for (std::int64_t c : spec.n_per_class) total += c;
    if (total == 0) throw BadSpecError("n_per_class has no nonzero count");

    std::mt19937_64 rng(spec.seed);
    LabeledDataset ds;
    ds.schema = canonical_schema();
    ds.rows.resize(total, static_cast<Eigen::Index>(ds.schema.size()));
    ds.labels.reserve(static_cast<size_t>(total));

    Eigen::Index row = 0;
    for (int g = 0; g < kNumGroups; ++g) {
        for (std::int64_t i = 0; i < spec.n_per_class[static_cast<size_t>(g)]; ++i) {
            ds.rows.row(row) =
                draw_features(static_cast<AttackGroup>(g), spec.noise_level, rng).transpose();
            ds.labels.push_back(g);
            ++row;
        }
    }
    return ds;
}

std::vector<SecurityEvent> gen_events(const ScenarioSpec& spec) {
    check_spec(spec);
    const EventParams& ep = spec.events;
    if (ep.auth_failures < 0 || ep.scan_ports < 0 || ep.flood_flows < 0 ||
        ep.resource_samples < 0 || ep.benign_events < 0 || ep.auth_interval_s <= 0 ||
        ep.scan_interval_s <= 0 || ep.flood_interval_s <= 0 || ep.benign_interval_s <= 0 ||
        ep.flood_syn_per_flow < 0 || ep.attacker_ip.empty())
        throw BadSpecError("invalid event parameters");

    std::mt19937_64 rng(spec.seed);
    std::vector<SecurityEvent> events;

    const double gap = 100.0;
    auto next_t0 = [&]() { return events.empty() ? 0.0 : events.back().timestamp + gap; };

    switch (spec.scenario) {
        case Scenario::Benign:
            append_benign_events(spec, 0.0, rng, events);
            break;
        case Scenario::PortScan:
            append_portscan_events(spec, 0.0, rng, events);
            break;
        case Scenario::SshBruteForce:
            append_bruteforce_events(spec, 0.0, events);
            break;
        case Scenario::SynFlood:
            append_synflood_events(spec, 0.0, rng, events);
            break;
        case Scenario::MixedDataset:
            append_benign_events(spec, 0.0, rng, events);
            append_bruteforce_events(spec, next_t0(), events);
            append_portscan_events(spec, next_t0(), rng, events);
            append_synflood_events(spec, next_t0(), rng, events);
            break;
    }
    return events;
}

}  // namespace flowsentry
