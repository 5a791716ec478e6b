#include "flowsentry/taxonomy.hpp"

#include <cctype>
#include <unordered_map>

#include "flowsentry/errors.hpp"

namespace flowsentry {

std::string normalize_label(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_sep = false;
    for (char ch : raw) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c) || ch == '-') {
            if (!out.empty()) pending_sep = true;
            continue;
        }
        if (pending_sep) {
            out.push_back(' ');
            pending_sep = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

namespace {

struct LabelRules {
    std::unordered_map<std::string, AttackGroup> exact;
    std::vector<std::string> names;  // raw spellings, grouped per taxonomy row

    void add(AttackGroup g, std::initializer_list<const char*> raw_names) {
        for (const char* name : raw_names) {
            exact.emplace(normalize_label(name), g);
            names.emplace_back(name);
        }
    }
};

const LabelRules& rules() {
    static const LabelRules r = [] {
        LabelRules r;
        r.add(AttackGroup::Benign, {"BENIGN"});
        r.add(AttackGroup::Dos, {"DoS Hulk", "Slowhttptest", "GoldenEye", "Slowloris",
                                 "DDoS-LOIC-HTTP", "DDoS-LOIC-UDP", "DDoS-HOIC", "DDoS-Botnet"});
        r.add(AttackGroup::BruteForce, {"Bruteforce-Web", "Bruteforce-XSS", "FTP-Patator",
                                        "SSH-Patator", "Web Brute Force"});
        r.add(AttackGroup::Injection,
              {"SQL Injection", "LDAP Injection", "SIP Injection", "Web SQL Injection"});
        r.add(AttackGroup::Hijacking, {"MITM", "Hijacking"});
        r.add(AttackGroup::Rce, {"RFI", "Exploit", "Cmd Injection", "Upload", "Backdoor"});
        r.add(AttackGroup::Other, {"Infiltration", "Bot", "PortScan", "Web XSS"});
        // Group names map to themselves so saved datasets reload.
        for (int g = 0; g < kNumGroups; ++g) {
            r.exact.emplace(normalize_label(group_name(g)), static_cast<AttackGroup>(g));
        }
        return r;
    }();
    return r;
}

}  // namespace

AttackGroup map_raw_label(const std::string& raw, bool fallback_to_other) {
    const std::string norm = normalize_label(raw);
    if (norm.empty()) throw UnknownLabelError("empty label");

    auto it = rules().exact.find(norm);
    if (it != rules().exact.end()) return it->second;
    if (norm.rfind("ddos", 0) == 0) return AttackGroup::Dos;

    if (fallback_to_other) return AttackGroup::Other;
    throw UnknownLabelError("no taxonomy rule matches label '" + raw + "'");
}

const std::vector<std::string>& known_raw_labels() { return rules().names; }

}  // namespace flowsentry
