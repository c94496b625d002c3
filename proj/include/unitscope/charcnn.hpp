#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "unitscope/corpus.hpp"

namespace unitscope {

enum class Pooling { mean, max };

struct ConvLayerConfig {
    int units = 0;
    int filter_width = 0;

    bool operator==(const ConvLayerConfig&) const = default;
};

struct ModelConfig {
    int vocab_size = 0;
    int dummy_index = -1;  // embedding row pinned to zero
    int embedding_dim = 0;
    std::vector<ConvLayerConfig> layers;
    int num_classes = 0;
    Pooling pooling = Pooling::mean;

    void validate() const;  // throws std::invalid_argument on bad shapes
    int num_layers() const { return static_cast<int>(layers.size()); }
    int layer_units(int layer) const { return layers[static_cast<std::size_t>(layer)].units; }
    int layer_input_channels(int layer) const {
        return layer == 0 ? embedding_dim : layers[static_cast<std::size_t>(layer - 1)].units;
    }
    int total_units() const;
    int unit_offset(int layer) const;  // global unit index base, layer-major
    bool operator==(const ModelConfig&) const = default;
};

// Character-level CNN: embedding, stacked same-padded 1-D convolutions with
// ReLU, mean or max pooling, linear softmax head. Channels of each
// convolution are the units under analysis.
struct Model {
    struct ConvLayer {
        std::vector<double> weights;  // [out][in][tap]
        std::vector<double> bias;     // [out]
    };

    ModelConfig config;
    std::vector<double> embedding;  // [vocab][dim]
    std::vector<ConvLayer> conv;
    std::vector<double> classifier_weights;  // [class][last_units]
    std::vector<double> classifier_bias;     // [class]

    static Model init(const ModelConfig& config, std::uint64_t seed);

    std::size_t parameter_count() const;
    // Flat parameter view in a fixed order: embedding, then each conv layer's
    // weights and bias, then classifier weights and bias.
    double get_parameter(std::size_t index) const;
    void set_parameter(std::size_t index, double value);
};

struct ActivationRecord {
    int layer = 0;
    int unit = 0;
    std::vector<double> values;  // post-ReLU, one per spatial position

    int spatial_length() const { return static_cast<int>(values.size()); }
};

struct ForwardResult {
    std::vector<double> logits;
    std::vector<ActivationRecord> activations;  // layer-major, unit ascending
};

ForwardResult forward(const Model& model, const Sentence& sentence);

// a_u(s): activation averaged over all spatial positions.
double mean_unit_activation(const ActivationRecord& record);

// Reusable buffers for the hot paths (corpus sweeps, probe scoring).
// maps[0] is the embedding map and maps[1 + l] the post-ReLU map of conv
// layer l, each [channel][position] contiguous.
struct ForwardWorkspace {
    std::vector<std::vector<double>> maps;
    std::vector<double> padded;
    std::vector<double> pooled;
    int length = 0;

    std::span<const double> layer_map(int layer) const;  // post-ReLU conv map
    std::span<const double> unit_row(int layer, int unit) const;
};

// Runs the convolution stack over encoded input, filling the workspace.
// mean_out, when non-empty, must hold config.total_units() slots and receives
// a_u for every unit, layer-major. logits_out is optional.
void forward_pass(const Model& model, std::span<const int> encoded, ForwardWorkspace& ws,
                  std::span<double> mean_out, std::vector<double>* logits_out = nullptr);

double loss_from_logits(std::span<const double> logits, int label);
double loss(const Model& model, const Sentence& sentence, int label);
double loss(const Model& model, const Sentence& sentence);  // uses sentence.label

// Parameter gradients in the same flat order as Model::get_parameter.
struct Gradients {
    std::vector<double> values;
    void resize_for(const Model& model);
    void zero();
};

// Accumulates d(loss)/d(params) for one example into grads; returns the loss.
double loss_gradients(const Model& model, std::span<const int> encoded, int label,
                      Gradients& grads, int* predicted = nullptr);

struct TrainConfig {
    double learning_rate = 0.01;
    int batch_size = 32;
    int epochs = 20;
    std::uint64_t seed = 0;
    std::string optimizer = "sgd";

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

// Plain minibatch SGD; deterministic for a fixed seed. Throws on unlabeled
// corpora and on divergence (non-finite loss).
std::vector<EpochStats> train(Model& model, const Corpus& corpus, const TrainConfig& cfg);

// Checkpoint: versioned binary file with a JSON header (config + alphabet),
// little-endian float64 parameters and a CRC-32 trailer.
void save_checkpoint(const Model& model, const std::string& alphabet_chars,
                     const std::string& path);

struct Checkpoint {
    Model model;
    std::string alphabet_chars;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace unitscope
