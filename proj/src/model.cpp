#include "flowsentry/model.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "flowsentry/ensemble.hpp"
#include "flowsentry/errors.hpp"
#include "flowsentry/gbdt.hpp"
#include "flowsentry/mlp.hpp"
#include "flowsentry/random_forest.hpp"

namespace flowsentry {

int Model::predict_class(ConstVectorRef x) const { return argmax_lowest(predict_proba(x)); }

Matrix predict_proba_matrix(const Model& model, const Matrix& rows) {
    Matrix out(rows.rows(), model.num_classes());
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
        out.row(i) = model.predict_proba(rows.row(i).transpose()).transpose();
    return out;
}

std::vector<int> predict_classes(const Model& model, const Matrix& rows) {
    std::vector<int> out;
    out.reserve(static_cast<size_t>(rows.rows()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
        out.push_back(model.predict_class(rows.row(i).transpose()));
    return out;
}

nlohmann::json model_artifact_json(const Model& model, const std::vector<std::string>& schema) {
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["model_kind"] = model.kind();
    j["schema"] = schema;
    j["hyperparameters"] = model.hyperparameters_json();
    j["parameters"] = model.parameters_json();
    return j;
}

void save_model_artifact(const Model& model, const std::vector<std::string>& schema,
                         const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << model_artifact_json(model, schema).dump(2) << "\n";
    if (!out) throw IoError("failed writing " + path.string());
}

std::unique_ptr<Model> model_from_artifact_json(const nlohmann::json& artifact,
                                                std::vector<std::string>* schema_out) {
    const int version = artifact.value("format_version", -1);
    if (version != kModelFormatVersion)
        throw FormatVersionError("artifact format_version " + std::to_string(version) +
                                 " unsupported (expected " +
                                 std::to_string(kModelFormatVersion) + ")");

    if (schema_out) *schema_out = artifact.at("schema").get<std::vector<std::string>>();
    const std::string kind = artifact.at("model_kind").get<std::string>();
    const nlohmann::json& hyper = artifact.at("hyperparameters");
    const nlohmann::json& params = artifact.at("parameters");

    if (kind == "random_forest")
        return std::make_unique<RandomForest>(RandomForest::from_json(hyper, params));
    if (kind == "gbdt") return std::make_unique<BoostedTrees>(BoostedTrees::from_json(hyper, params));
    if (kind == "mlp") return std::make_unique<MlpModel>(MlpModel::from_json(hyper, params));
    if (kind == "ensemble")
        return std::make_unique<EnsembleModel>(EnsembleModel::from_json(hyper, params));
    throw FormatVersionError("unknown model_kind: " + kind);
}

std::unique_ptr<Model> load_model_artifact(const std::filesystem::path& path,
                                           std::vector<std::string>* schema_out) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json artifact;
    try {
        in >> artifact;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed model artifact " + path.string() + ": " + e.what());
    }
    return model_from_artifact_json(artifact, schema_out);
}

}  // namespace flowsentry
