#include "flowsentry/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "flowsentry/errors.hpp"

namespace flowsentry {

namespace {

// Forward pass keeping post-activation values per layer; activations[0] is
// the input batch, activations.back() holds softmax probabilities.
void forward(const std::vector<Matrix>& weights, const std::vector<Vector>& biases,
             const Matrix& rows, std::vector<Matrix>& activations) {
    const size_t layers = weights.size();
    activations.resize(layers + 1);
    activations[0] = rows;
    for (size_t l = 0; l < layers; ++l) {
        Matrix z = activations[l] * weights[l].transpose();
        z.rowwise() += biases[l].transpose();
        if (l + 1 < layers) {
            activations[l + 1] = z.cwiseMax(0.0);  // ReLU
        } else {
            // Row-stable softmax.
            Matrix& p = activations[l + 1];
            p.resize(z.rows(), z.cols());
            for (Eigen::Index i = 0; i < z.rows(); ++i) {
                const double m = z.row(i).maxCoeff();
                p.row(i) = (z.row(i).array() - m).exp();
                p.row(i) /= p.row(i).sum();
            }
        }
    }
}

}  // namespace

MlpModel MlpModel::initialized(int input_dim, const MlpConfig& cfg) {
    if (input_dim < 1 || cfg.n_classes < 2) throw BadHyperparameterError("invalid network shape");
    for (int h : cfg.hidden) {
        if (h < 1) throw BadHyperparameterError("hidden layer sizes must be positive");
    }

    MlpModel net;
    net.cfg_ = cfg;
    net.layer_sizes_.push_back(input_dim);
    for (int h : cfg.hidden) net.layer_sizes_.push_back(h);
    net.layer_sizes_.push_back(cfg.n_classes);

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (size_t l = 0; l + 1 < net.layer_sizes_.size(); ++l) {
        const int fan_in = net.layer_sizes_[l];
        const int fan_out = net.layer_sizes_[l + 1];
        const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
        Matrix w(fan_out, fan_in);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = scale * gauss(rng);
        net.weights_.push_back(std::move(w));
        net.biases_.push_back(Vector::Zero(fan_out));
    }
    return net;
}

Matrix MlpModel::forward_proba(const Matrix& rows) const {
    if (rows.cols() != layer_sizes_.front())
        throw DimensionMismatchError("expected " + std::to_string(layer_sizes_.front()) +
                                     " features, got " + std::to_string(rows.cols()));
    std::vector<Matrix> acts;
    forward(weights_, biases_, rows, acts);
    return acts.back();
}

Vector MlpModel::predict_proba(ConstVectorRef x) const {
    Matrix row(1, x.size());
    row.row(0) = x.transpose();
    return forward_proba(row).row(0).transpose();
}

double MlpModel::loss_and_gradients(const Matrix& rows, const std::vector<int>& labels,
                                    std::vector<Matrix>* weight_grads,
                                    std::vector<Vector>* bias_grads) const {
    const Eigen::Index n = rows.rows();
    if (n == 0) throw EmptyDataError("empty batch");
    if (n != static_cast<Eigen::Index>(labels.size()))
        throw LengthMismatchError("rows and labels differ in length");

    std::vector<Matrix> acts;
    forward(weights_, biases_, rows, acts);
    const Matrix& probs = acts.back();

    double loss = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        loss -= std::log(std::max(probs(i, labels[static_cast<size_t>(i)]), 1e-15));
    loss /= static_cast<double>(n);

    if (!weight_grads || !bias_grads) return loss;

    const size_t layers = weights_.size();
    weight_grads->assign(layers, Matrix());
    bias_grads->assign(layers, Vector());

    // delta: dLoss/dz for the current layer, batch rows.
    Matrix delta = probs;
    for (Eigen::Index i = 0; i < n; ++i) delta(i, labels[static_cast<size_t>(i)]) -= 1.0;
    delta /= static_cast<double>(n);

    for (size_t l = layers; l-- > 0;) {
        (*weight_grads)[l] = delta.transpose() * acts[l];
        (*bias_grads)[l] = delta.colwise().sum().transpose();
        if (l > 0) {
            delta = (delta * weights_[l]).cwiseProduct(
                (acts[l].array() > 0.0).cast<Scalar>().matrix());
        }
    }
    return loss;
}

MlpModel MlpModel::fit(const Matrix& rows, const std::vector<int>& labels, const MlpConfig& cfg,
                       const Matrix* val_rows, const std::vector<int>* val_labels) {
    const Eigen::Index n = rows.rows();
    if (n == 0 || rows.cols() == 0) throw EmptyDataError("cannot train on empty data");
    if (n != static_cast<Eigen::Index>(labels.size()))
        throw LengthMismatchError("rows and labels differ in length");
    if (cfg.batch_size < 1 || n < cfg.batch_size)
        throw BadHyperparameterError("need n >= batch_size >= 1");
    if (cfg.epochs < 1 || cfg.learning_rate <= 0 || cfg.patience < 1)
        throw BadHyperparameterError("invalid training configuration");
    for (int c : labels) {
        if (c < 0 || c >= cfg.n_classes)
            throw BadCodeError("label out of range: " + std::to_string(c));
    }
    if ((val_rows == nullptr) != (val_labels == nullptr))
        throw BadHyperparameterError("validation rows and labels must come together");

    MlpModel net = initialized(static_cast<int>(rows.cols()), cfg);
    const size_t layers = net.weights_.size();

    // Adam state.
    std::vector<Matrix> m_w(layers), v_w(layers);
    std::vector<Vector> m_b(layers), v_b(layers);
    for (size_t l = 0; l < layers; ++l) {
        m_w[l] = Matrix::Zero(net.weights_[l].rows(), net.weights_[l].cols());
        v_w[l] = m_w[l];
        m_b[l] = Vector::Zero(net.biases_[l].size());
        v_b[l] = m_b[l];
    }
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::int64_t step = 0;

    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    std::vector<Matrix> w_grads;
    std::vector<Vector> b_grads;

    double best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<Matrix> best_weights;
    std::vector<Vector> best_biases;
    int epochs_since_best = 0;

    auto eval_loss = [&](const Matrix& r, const std::vector<int>& l) {
        return net.loss_and_gradients(r, l, nullptr, nullptr);
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0;
        std::int64_t batches = 0;
        for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
            const Eigen::Index size = std::min<Eigen::Index>(cfg.batch_size, n - start);
            Matrix batch(size, rows.cols());
            std::vector<int> batch_labels(static_cast<size_t>(size));
            for (Eigen::Index i = 0; i < size; ++i) {
                batch.row(i) = rows.row(order[static_cast<size_t>(start + i)]);
                batch_labels[static_cast<size_t>(i)] =
                    labels[static_cast<size_t>(order[static_cast<size_t>(start + i)])];
            }

            const double loss = net.loss_and_gradients(batch, batch_labels, &w_grads, &b_grads);
            if (!std::isfinite(loss))
                throw NonFiniteLossError("training loss diverged at epoch " +
                                         std::to_string(epoch));
            epoch_loss += loss;
            ++batches;

            ++step;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            for (size_t l = 0; l < layers; ++l) {
                m_w[l] = beta1 * m_w[l] + (1 - beta1) * w_grads[l];
                v_w[l] = beta2 * v_w[l] + (1 - beta2) * w_grads[l].cwiseProduct(w_grads[l]);
                net.weights_[l] -= (cfg.learning_rate * (m_w[l] / bc1).array() /
                                    ((v_w[l] / bc2).array().sqrt() + eps))
                                       .matrix();
                m_b[l] = beta1 * m_b[l] + (1 - beta1) * b_grads[l];
                v_b[l] = beta2 * v_b[l] + (1 - beta2) * b_grads[l].cwiseProduct(b_grads[l]);
                net.biases_[l] -= (cfg.learning_rate * (m_b[l] / bc1).array() /
                                   ((v_b[l] / bc2).array().sqrt() + eps))
                                      .matrix();
            }
        }
        net.train_loss_.push_back(epoch_loss / static_cast<double>(batches));

        if (val_rows) {
            const double val_loss = eval_loss(*val_rows, *val_labels);
            if (!std::isfinite(val_loss)) throw NonFiniteLossError("validation loss diverged");
            if (val_loss < best_val_loss) {
                best_val_loss = val_loss;
                best_weights = net.weights_;
                best_biases = net.biases_;
                epochs_since_best = 0;
            } else if (++epochs_since_best >= cfg.patience) {
                break;
            }
        }
    }

    if (val_rows && !best_weights.empty()) {
        net.weights_ = std::move(best_weights);
        net.biases_ = std::move(best_biases);
    }
    return net;
}

nlohmann::json MlpModel::hyperparameters_json() const {
    nlohmann::json j;
    j["hidden"] = cfg_.hidden;
    j["epochs"] = cfg_.epochs;
    j["batch_size"] = cfg_.batch_size;
    j["learning_rate"] = cfg_.learning_rate;
    j["patience"] = cfg_.patience;
    j["n_classes"] = cfg_.n_classes;
    j["seed"] = cfg_.seed;
    return j;
}

nlohmann::json MlpModel::parameters_json() const {
    nlohmann::json j;
    j["layer_sizes"] = layer_sizes_;
    nlohmann::json ws = nlohmann::json::array();
    nlohmann::json bs = nlohmann::json::array();
    for (size_t l = 0; l < weights_.size(); ++l) {
        nlohmann::json wj = nlohmann::json::array();
        for (Eigen::Index i = 0; i < weights_[l].rows(); ++i) {
            wj.push_back(std::vector<double>(weights_[l].row(i).begin(), weights_[l].row(i).end()));
        }
        ws.push_back(std::move(wj));
        bs.push_back(std::vector<double>(biases_[l].begin(), biases_[l].end()));
    }
    j["weights"] = std::move(ws);
    j["biases"] = std::move(bs);
    j["train_loss"] = train_loss_;
    return j;
}

MlpModel MlpModel::from_json(const nlohmann::json& hyper, const nlohmann::json& params) {
    MlpModel net;
    net.cfg_.hidden = hyper.at("hidden").get<std::vector<int>>();
    net.cfg_.epochs = hyper.at("epochs").get<int>();
    net.cfg_.batch_size = hyper.at("batch_size").get<int>();
    net.cfg_.learning_rate = hyper.at("learning_rate").get<double>();
    net.cfg_.patience = hyper.at("patience").get<int>();
    net.cfg_.n_classes = hyper.at("n_classes").get<int>();
    net.cfg_.seed = hyper.at("seed").get<std::uint64_t>();

    net.layer_sizes_ = params.at("layer_sizes").get<std::vector<int>>();
    if (net.layer_sizes_.size() < 2) throw FormatVersionError("layer_sizes too short");
    const auto& ws = params.at("weights");
    const auto& bs = params.at("biases");
    if (ws.size() + 1 != net.layer_sizes_.size() || bs.size() != ws.size())
        throw DimensionMismatchError("parameter arrays do not match layer_sizes");
    for (size_t l = 0; l < ws.size(); ++l) {
        const int rows = net.layer_sizes_[l + 1];
        const int cols = net.layer_sizes_[l];
        Matrix w(rows, cols);
        if (static_cast<int>(ws[l].size()) != rows)
            throw DimensionMismatchError("weight matrix row count mismatch");
        for (int i = 0; i < rows; ++i) {
            auto row = ws[l][static_cast<size_t>(i)].get<std::vector<double>>();
            if (static_cast<int>(row.size()) != cols)
                throw DimensionMismatchError("weight matrix column count mismatch");
            for (int c = 0; c < cols; ++c) w(i, c) = row[static_cast<size_t>(c)];
        }
        auto bias = bs[l].get<std::vector<double>>();
        if (static_cast<int>(bias.size()) != rows)
            throw DimensionMismatchError("bias length mismatch");
        net.weights_.push_back(std::move(w));
        net.biases_.push_back(
            Eigen::Map<const Vector>(bias.data(), static_cast<Eigen::Index>(bias.size())));
        for (Eigen::Index i = 0; i < net.weights_[l].size(); ++i) {
            if (!std::isfinite(net.weights_[l].data()[i]))
                throw NonFiniteLossError("non-finite weight in artifact");
        }
    }
    net.train_loss_ = params.at("train_loss").get<std::vector<double>>();
    return net;
}

}  // namespace flowsentry
