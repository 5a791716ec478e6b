#pragma once

#include <string>
#include <vector>

#include "flowsentry/types.hpp"

namespace flowsentry {

// Lowercase, trimmed, runs of spaces/hyphens collapsed to one space.
std::string normalize_label(const std::string& raw);

// Maps a raw dataset label onto its traffic group. Matching is
// case-insensitive on the normalized form; any label starting with "DDoS"
// maps to Dos. Throws UnknownLabelError when nothing matches unless
// fallback_to_other is set.
AttackGroup map_raw_label(const std::string& raw, bool fallback_to_other = false);

// The raw label names the mapping is total over (29 names).
const std::vector<std::string>& known_raw_labels();

}  // namespace flowsentry
