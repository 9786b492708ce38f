#pragma once

// Fully-connected classifier with inverted dropout.
//
// Dropout masks sit on the input of every layer after the first, i.e. on the
// hidden activations that feed the next fully-connected layer. The raw
// features and the logits are never masked. Retained units are scaled by
// 1/(1-p) so the deterministic network is the expected network.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uncproxy/matrix.hpp"
#include "uncproxy/uncertainty.hpp"

namespace uncproxy {

enum class Activation { relu, identity };

struct Layer {
    Matrix weight;  // out_dim x in_dim
    std::vector<double> bias;
    Activation activation = Activation::relu;

    std::size_t in_dim() const noexcept { return weight.cols(); }
    std::size_t out_dim() const noexcept { return weight.rows(); }

    friend bool operator==(const Layer&, const Layer&) = default;
};

struct NetworkParams {
    std::vector<Layer> layers;

    // Checks dimension chaining, finiteness and that the last layer emits logits.
    void validate() const;
    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }
    std::size_t parameter_count() const;
    double squared_norm() const;

    friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

struct TrainConfig {
    double dropout_p = 0.5;
    double learning_rate = 0.05;
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    // Defaults to (1 - dropout_p) / (2N) for N training rows.
    std::optional<double> weight_decay;
    std::uint64_t seed = 0;
    std::size_t mc_samples_T = 30;

    void validate() const;
    double effective_weight_decay(std::size_t n_train) const;
};

struct Dataset {
    Matrix features;     // N x D
    Matrix soft_labels;  // N x C
    std::vector<std::string> sample_ids;

    void validate() const;
    std::size_t size() const noexcept { return features.rows(); }
};

// One binary mask per masked layer: masks[k] multiplies the input of layer k + 1.
struct DropoutMasks {
    double p = 0.5;
    std::vector<std::vector<std::uint8_t>> masks;
};

struct Batch {
    Matrix features;
    Matrix soft_labels;
};

Batch make_batch(const Dataset& data, std::span<const std::size_t> rows);

std::vector<double> softmax(std::span<const double> logits);

DropoutMasks sample_dropout_masks(const NetworkParams& params, double p, std::uint64_t seed);
DropoutMasks all_ones_masks(const NetworkParams& params, double p);

std::vector<double> forward(const NetworkParams& params, std::span<const double> x);
std::vector<double> forward(const NetworkParams& params, std::span<const double> x, const DropoutMasks& masks);

// Per-layer inputs (after masking and scaling) and pre-activations of one pass.
struct ForwardTrace {
    std::vector<std::vector<double>> inputs;
    std::vector<std::vector<double>> pre_activations;

    std::span<const double> logits() const { return pre_activations.back(); }
};

ForwardTrace forward_trace(const NetworkParams& params, std::span<const double> x, const DropoutMasks* masks);

struct Gradients {
    std::vector<Matrix> weight;
    std::vector<std::vector<double>> bias;
};

struct LossGradient {
    double loss = 0.0;
    Gradients grad;
};

// Mean soft-label cross-entropy (nats) plus weight_decay * ||theta||^2.
// `masks` is either empty (deterministic) or holds one mask set per row.
double loss(const NetworkParams& params, const Batch& batch, double weight_decay,
            std::span<const DropoutMasks> masks = {});
LossGradient loss_gradient(const NetworkParams& params, const Batch& batch, double weight_decay,
                           std::span<const DropoutMasks> masks = {});

// layer_sizes = {input_dim, hidden..., n_classes}; hidden layers use ReLU.
NetworkParams init_params(std::span<const std::size_t> layer_sizes, std::uint64_t seed);

struct TrainResult {
    NetworkParams params;
    std::vector<double> loss_trace;  // mean training loss per epoch
};

TrainResult train(const Dataset& data, const TrainConfig& config, std::span<const std::size_t> layer_sizes);

McPrediction mc_predict(const NetworkParams& params, std::span<const double> x, std::size_t T, double p,
                        std::uint64_t seed, std::string sample_id = {});

}  // namespace uncproxy
