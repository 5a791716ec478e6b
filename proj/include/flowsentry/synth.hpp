#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowsentry/dataset.hpp"
#include "flowsentry/sentinel.hpp"
#include "flowsentry/types.hpp"

namespace flowsentry {

enum class Scenario { Benign, PortScan, SshBruteForce, SynFlood, MixedDataset };

const std::string& scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

// Event-stream knobs; flow-dataset generation only uses n_per_class/noise.
struct EventParams {
    int auth_failures = 8;            // SshBruteForce
    double auth_interval_s = 5.0;
    int scan_ports = 30;              // PortScan
    double scan_interval_s = 0.5;
    int flood_flows = 120;            // SynFlood
    double flood_interval_s = 0.05;
    double flood_syn_per_flow = 40;
    int resource_samples = 12;        // SynFlood cpu/mem ramp
    int benign_events = 60;           // Benign background
    double benign_interval_s = 2.0;
    std::string attacker_ip = "198.51.100.66";
};

struct ScenarioSpec {
    Scenario scenario = Scenario::MixedDataset;
    std::array<std::int64_t, kNumGroups> n_per_class{};  // gen_flows row counts
    std::uint64_t seed = 0;
    double noise_level = 0.1;  // in [0, 1]
    EventParams events;

    nlohmann::json to_json() const;
    static ScenarioSpec from_json(const nlohmann::json& j);
};

// Documented class-conditional generator parameters: feature value =
// centroid + noise_level * spread * N(0,1), clamped to the flow invariants.
// The same table is mirrored in docs/synth_parameters.md.
const Vector& class_centroid(AttackGroup g);
const Vector& class_spread(AttackGroup g);

// Labeled flow dataset over the canonical 24-feature schema; deterministic
// per (spec, seed).
LabeledDataset gen_flows(const ScenarioSpec& spec);

// Sentinel event stream with strictly increasing timestamps. Benign streams
// stay below every default trigger; attack streams cross their matching rule.
std::vector<SecurityEvent> gen_events(const ScenarioSpec& spec);

inline constexpr const char* kGeneratorVersion = "1.0.0";

}  // namespace flowsentry
