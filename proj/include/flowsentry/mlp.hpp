#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "flowsentry/model.hpp"
#include "flowsentry/types.hpp"

namespace flowsentry {

struct MlpConfig {
    std::vector<int> hidden = {256, 128, 64};
    int epochs = 40;
    int batch_size = 128;
    double learning_rate = 1e-3;
    int patience = 5;  // early-stop epochs without validation improvement
    int n_classes = kNumGroups;
    std::uint64_t seed = 0;
};

// Fully connected net, ReLU hidden layers, softmax output, trained with Adam
// on softmax cross-entropy. He-initialized, fixed shuffle order per seed.
class MlpModel : public Model {
public:
    MlpModel() = default;

    // val rows enable early stopping (best-validation weights are restored);
    // without them training runs all epochs.
    static MlpModel fit(const Matrix& rows, const std::vector<int>& labels,
                        const MlpConfig& cfg, const Matrix* val_rows = nullptr,
                        const std::vector<int>* val_labels = nullptr);

    std::string kind() const override { return "mlp"; }
    int input_dim() const override { return layer_sizes_.empty() ? 0 : layer_sizes_.front(); }
    int num_classes() const override { return layer_sizes_.empty() ? 0 : layer_sizes_.back(); }
    Vector predict_proba(ConstVectorRef x) const override;

    Matrix forward_proba(const Matrix& rows) const;

    // Mean softmax cross-entropy over the batch plus analytic parameter
    // gradients, laid out as per-layer (weight matrix, bias vector) pairs.
    double loss_and_gradients(const Matrix& rows, const std::vector<int>& labels,
                              std::vector<Matrix>* weight_grads,
                              std::vector<Vector>* bias_grads) const;

    nlohmann::json hyperparameters_json() const override;
    nlohmann::json parameters_json() const override;
    static MlpModel from_json(const nlohmann::json& hyper, const nlohmann::json& params);

    // He-initialized untrained network, for gradient checks.
    static MlpModel initialized(int input_dim, const MlpConfig& cfg);

    const std::vector<int>& layer_sizes() const { return layer_sizes_; }
    std::vector<Matrix>& weights() { return weights_; }
    std::vector<Vector>& biases() { return biases_; }
    const std::vector<Matrix>& weights() const { return weights_; }
    const std::vector<Vector>& biases() const { return biases_; }
    const std::vector<double>& train_loss() const { return train_loss_; }

private:
    std::vector<int> layer_sizes_;  // [d, hidden..., n_classes]
    std::vector<Matrix> weights_;   // weights_[l]: layer_sizes_[l+1] x layer_sizes_[l]
    std::vector<Vector> biases_;
    MlpConfig cfg_;
    std::vector<double> train_loss_;
};

}  // namespace flowsentry
