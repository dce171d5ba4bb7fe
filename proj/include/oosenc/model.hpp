#pragma once

#include "oosenc/common.hpp"
#include "oosenc/encodings.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace oosenc {

// Label value reserved for out-of-scope test samples.
inline constexpr std::size_t kOosLabel = std::numeric_limits<std::size_t>::max();

struct EmbeddedSample {
    Vector embedding;
    std::size_t label = kOosLabel;

    bool is_oos() const { return label == kOosLabel; }
};

enum class LossKind { cross_entropy, mse };

std::string to_string(LossKind loss);
LossKind parse_loss_kind(const std::string& s);

struct NetworkConfig {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 768;
    std::size_t output_dim = 0;
    double dropout_rate = 0.1;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double learning_rate = 0.001;
    LossKind loss = LossKind::cross_entropy;
    std::uint64_t seed = 0;

    // Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

struct Parameters {
    Eigen::MatrixXd w1;  // hidden x input
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // output x hidden
    Eigen::VectorXd b2;

    bool all_finite() const;
    bool operator==(const Parameters& o) const {
        return w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
    }
};

// Feed-forward likelihood function: ReLU hidden layer, tanh output so every
// prediction lies in [-1,1]^p. Immutable once trained.
class LikelihoodModel {
public:
    LikelihoodModel(Parameters params, NetworkConfig config, std::vector<double> loss_history = {});

    const Parameters& params() const { return params_; }
    const NetworkConfig& config() const { return config_; }
    // Mean training loss per epoch, in order.
    const std::vector<double>& loss_history() const { return loss_history_; }

    std::size_t input_dim() const { return static_cast<std::size_t>(params_.w1.cols()); }
    std::size_t hidden_dim() const { return static_cast<std::size_t>(params_.w1.rows()); }
    std::size_t output_dim() const { return static_cast<std::size_t>(params_.w2.rows()); }

private:
    Parameters params_;
    NetworkConfig config_;
    std::vector<double> loss_history_;
};

// Glorot-uniform weights and zero biases drawn from config.seed.
Parameters init_parameters(const NetworkConfig& config);

struct LossAndGradients {
    double loss = 0.0;
    Parameters grad;
};

// Loss over the batch (columns of `inputs`) and its exact gradient.
// Cross-entropy: mean of -log softmax(W2 h + b2)[y], labels in `labels`.
// MSE: mean over samples and components of (tanh(W2 h + b2) - t)^2, targets in
// the columns of `targets`. `dropout_mask`, if given, holds the already
// scaled keep mask applied to the hidden activations.
LossAndGradients loss_and_gradients(const Parameters& params, const Eigen::MatrixXd& inputs,
                                    const std::vector<std::size_t>& labels, const Eigen::MatrixXd& targets,
                                    LossKind loss, const Eigen::MatrixXd* dropout_mask = nullptr);

// Mini-batch Adam trainer. Keeps optimizer state so training can continue
// across calls (CES without weight restarts relies on this).
class Trainer {
public:
    // `targets` defines the output dimension; cross-entropy requires a
    // one-hot set.
    Trainer(Parameters init, NetworkConfig config, ClassEncodingSet targets);

    // One pass over `data` in seeded shuffled order; returns the mean loss.
    // Throws DivergenceError on a non-finite loss.
    double run_epoch(const std::vector<EmbeddedSample>& data);

    void set_targets(ClassEncodingSet targets);
    const ClassEncodingSet& targets() const { return targets_; }
    const Parameters& params() const { return params_; }
    const std::vector<double>& loss_history() const { return history_; }
    LikelihoodModel model() const;

private:
    void check_targets(const ClassEncodingSet& targets) const;

    Parameters params_;
    NetworkConfig config_;
    ClassEncodingSet targets_;
    Parameters m_, v_;
    std::uint64_t step_ = 0;
    Rng rng_;
    std::vector<double> history_;
};

LikelihoodModel train_classifier(const std::vector<EmbeddedSample>& data, const ClassEncodingSet& targets,
                                 const NetworkConfig& config);

LikelihoodVector predict(const LikelihoodModel& model, std::span<const double> embedding);
std::vector<LikelihoodVector> predict_batch(const LikelihoodModel& model, const std::vector<Vector>& embeddings);

void save_model(const LikelihoodModel& model, const std::filesystem::path& path);
LikelihoodModel load_model(const std::filesystem::path& path);
std::string serialize_model(const LikelihoodModel& model);
LikelihoodModel parse_model(const std::string& text);

}  // namespace oosenc
