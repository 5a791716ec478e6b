#include "flowsentry/dataset.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "flowsentry/errors.hpp"
#include "flowsentry/taxonomy.hpp"

namespace flowsentry {

nlohmann::json to_json(const LoadReport& report) {
    return nlohmann::json{{"rows_read", report.rows_read},
                          {"rows_kept", report.rows_kept},
                          {"rows_dropped", report.rows_dropped},
                          {"unknown_labels", report.unknown_labels}};
}

std::array<std::int64_t, kNumGroups> LabeledDataset::class_counts() const {
    std::array<std::int64_t, kNumGroups> counts{};
    for (int code : labels) counts.at(static_cast<size_t>(code))++;
    return counts;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    errno = 0;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size() && errno == 0;
}

}  // namespace

LabeledDataset load_dataset(const std::filesystem::path& path, const LoadOptions& opts,
                            LoadReport* report) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset file: " + path.string());

    std::string header_line;
    if (!std::getline(in, header_line)) throw EmptyDatasetError("no header row in " + path.string());

    std::vector<std::string> header = split_csv_line(header_line);
    for (auto& h : header) h = trim(h);

    int label_col = -1;
    std::vector<int> feature_cols;
    std::vector<std::string> schema;
    for (int i = 0; i < static_cast<int>(header.size()); ++i) {
        if (header[static_cast<size_t>(i)] == "label") {
            if (label_col >= 0) throw SchemaMismatchError("duplicate label column in " + path.string());
            label_col = i;
        } else {
            feature_cols.push_back(i);
            schema.push_back(header[static_cast<size_t>(i)]);
        }
    }
    if (label_col < 0) throw MissingLabelColumnError("no `label` column in " + path.string());

    if (opts.schema_mode == SchemaMode::Canonical && schema != canonical_schema()) {
        throw SchemaMismatchError("columns of " + path.string() +
                                  " do not match the canonical flow schema");
    }

    const int d = static_cast<int>(feature_cols.size());
    LoadReport rep;
    std::vector<Vector> kept_rows;
    std::vector<int> labels;

    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rep.rows_read++;
        std::vector<std::string> fields = split_csv_line(line);
        if (static_cast<int>(fields.size()) != static_cast<int>(header.size())) {
            rep.rows_dropped++;
            continue;
        }

        Vector row(d);
        bool ok = true;
        for (int j = 0; j < d; ++j) {
            double v;
            if (!parse_double(fields[static_cast<size_t>(feature_cols[static_cast<size_t>(j)])], v) ||
                !std::isfinite(v)) {
                ok = false;
                break;
            }
            row[j] = v;
        }
        if (!ok) {
            rep.rows_dropped++;
            continue;
        }

        const std::string raw = trim(fields[static_cast<size_t>(label_col)]);
        AttackGroup g;
        if (opts.unknown_labels == UnknownLabelPolicy::MapToOther) {
            try {
                g = map_raw_label(raw, false);
            } catch (const UnknownLabelError&) {
                g = AttackGroup::Other;
                rep.unknown_labels++;
            }
        } else {
            g = map_raw_label(raw, false);  // propagates UnknownLabelError
        }

        kept_rows.push_back(std::move(row));
        labels.push_back(group_code(g));
        rep.rows_kept++;
    }

    if (kept_rows.empty()) throw EmptyDatasetError("no valid rows in " + path.string());

    LabeledDataset ds;
    ds.schema = std::move(schema);
    ds.rows.resize(static_cast<Eigen::Index>(kept_rows.size()), d);
    for (size_t i = 0; i < kept_rows.size(); ++i) ds.rows.row(static_cast<Eigen::Index>(i)) = kept_rows[i];
    ds.labels = std::move(labels);

    if (report) *report = rep;
    return ds;
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
    if (ds.n() == 0) throw EmptyDatasetError("refusing to save an empty dataset");
    if (ds.rows.rows() != static_cast<Eigen::Index>(ds.labels.size()))
        throw LengthMismatchError("rows/labels length mismatch");

    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());

    for (size_t j = 0; j < ds.schema.size(); ++j) {
        if (j) out << ',';
        out << ds.schema[j];
    }
    out << ",label\n";

    char buf[64];
    for (Eigen::Index i = 0; i < ds.rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.rows.cols(); ++j) {
            // 17 significant digits round-trips any finite double.
            std::snprintf(buf, sizeof buf, "%.17g", ds.rows(i, j));
            if (j) out << ',';
            out << buf;
        }
        out << ',' << group_name(ds.labels[static_cast<size_t>(i)]) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace flowsentry
