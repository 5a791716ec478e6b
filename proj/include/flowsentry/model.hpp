#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowsentry/types.hpp"

namespace flowsentry {

inline constexpr int kModelFormatVersion = 1;

// A fitted classifier exposing class-probability prediction.
class Model {
public:
    virtual ~Model() = default;

    virtual std::string kind() const = 0;
    virtual int input_dim() const = 0;
    virtual int num_classes() const = 0;

    // Length num_classes(), nonnegative, sums to 1 (except explicitly
    // degenerate test stubs). Throws DimensionMismatchError on bad input size.
    virtual Vector predict_proba(ConstVectorRef x) const = 0;

    // Default: argmax of predict_proba, ties to the lowest class code.
    virtual int predict_class(ConstVectorRef x) const;

    virtual nlohmann::json hyperparameters_json() const = 0;
    virtual nlohmann::json parameters_json() const = 0;
};

// Batch helper: one probability row per input row.
Matrix predict_proba_matrix(const Model& model, const Matrix& rows);
std::vector<int> predict_classes(const Model& model, const Matrix& rows);

// Artifact file: {format_version, model_kind, schema, hyperparameters,
// parameters}. Loading refuses a mismatched format_version.
void save_model_artifact(const Model& model, const std::vector<std::string>& schema,
                         const std::filesystem::path& path);

nlohmann::json model_artifact_json(const Model& model, const std::vector<std::string>& schema);

std::unique_ptr<Model> load_model_artifact(const std::filesystem::path& path,
                                           std::vector<std::string>* schema_out = nullptr);
std::unique_ptr<Model> model_from_artifact_json(const nlohmann::json& artifact,
                                                std::vector<std::string>* schema_out = nullptr);

}  // namespace flowsentry
