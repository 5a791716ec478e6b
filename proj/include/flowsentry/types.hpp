#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace flowsentry {

using Scalar = double;
// Row-major: rows are observations and get sliced constantly on the predict path.
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using ConstMatrixRef = Eigen::Ref<const Matrix>;
using ConstVectorRef = Eigen::Ref<const Vector>;

// Index of the largest coefficient; ties resolve to the lowest index.
inline int argmax_lowest(ConstVectorRef v) {
    int best = 0;
    for (int i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

// The 7-group traffic taxonomy. Codes are stable across serialization.
enum class AttackGroup : int {
    Benign = 0,
    Dos = 1,
    BruteForce = 2,
    Injection = 3,
    Hijacking = 4,
    Rce = 5,
    Other = 6,
};

inline constexpr int kNumGroups = 7;

const std::string& group_name(AttackGroup g);
const std::string& group_name(int code);
AttackGroup group_from_name(const std::string& name);
inline int group_code(AttackGroup g) { return static_cast<int>(g); }

enum class Protocol : int { Tcp = 0, Udp = 1, Icmp = 2 };

const std::string& protocol_name(Protocol p);
Protocol protocol_from_name(const std::string& name);

// Canonical per-flow feature schema (24 columns, fixed order).
const std::vector<std::string>& canonical_schema();
// Index of `name` in the canonical schema, or -1.
int canonical_feature_index(const std::string& name);

// One bidirectional flow, pre-aggregated. Immutable after construction.
struct FlowRecord {
    std::string flow_id;
    std::string src_ip;
    std::string dst_ip;
    int src_port = 0;
    int dst_port = 0;
    Protocol protocol = Protocol::Tcp;
    double timestamp = 0.0;
    Vector features;  // canonical_schema() order
    std::optional<std::string> raw_label;
};

// Throws Error when a FlowRecord violates its invariants (negative counts,
// packet length ordering, wrong feature count, port range).
void validate_flow(const FlowRecord& flow);

}  // namespace flowsentry
