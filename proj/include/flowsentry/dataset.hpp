#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowsentry/types.hpp"

namespace flowsentry {

struct LoadReport {
    std::size_t rows_read = 0;
    std::size_t rows_kept = 0;
    std::size_t rows_dropped = 0;
    std::size_t unknown_labels = 0;
};

nlohmann::json to_json(const LoadReport& report);

enum class SchemaMode { Canonical, Infer };
enum class UnknownLabelPolicy { Error, MapToOther };

// Feature matrix plus group labels. Immutable by convention after load.
struct LabeledDataset {
    std::vector<std::string> schema;  // feature names, column order
    Matrix rows;                      // n x d
    std::vector<int> labels;          // AttackGroup codes, size n

    std::size_t n() const { return labels.size(); }
    int d() const { return static_cast<int>(rows.cols()); }
    std::array<std::int64_t, kNumGroups> class_counts() const;
};

struct LoadOptions {
    SchemaMode schema_mode = SchemaMode::Infer;
    UnknownLabelPolicy unknown_labels = UnknownLabelPolicy::Error;
};

// CSV loader: header row required, `label` column by exact name, remaining
// columns parsed as floats. Rows with NaN/inf or unparsable numerics are
// dropped and counted in the report.
LabeledDataset load_dataset(const std::filesystem::path& path, const LoadOptions& opts = {},
                            LoadReport* report = nullptr);

// Inverse of load_dataset. Floats are written with 17 significant digits so
// the round trip is lossless for finite values.
void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path);

}  // namespace flowsentry
