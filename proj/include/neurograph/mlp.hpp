#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "neurograph/dataset.hpp"
#include "neurograph/rng.hpp"

namespace neurograph {

// Fully-connected classifier shape: dense layers with ReLU and dropout after
// each hidden layer, softmax on the output layer.
struct Architecture {
    int input_dim = 0;
    std::vector<int> hidden_sizes;
    int output_classes = 0;
    double dropout_rate = 0.2;  // applied after each hidden layer, train mode only
};

struct Model {
    std::vector<Eigen::MatrixXd> weights;  // weights[l] is fan_out x fan_in
    std::vector<Eigen::VectorXd> biases;   // biases[l] has length fan_out
    std::uint64_t rng_seed = 0;

    int layer_count() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return static_cast<int>(weights.front().cols()); }
    int output_classes() const { return static_cast<int>(weights.back().rows()); }
};

struct ForwardResult {
    // Post-ReLU activations per hidden layer (pre-dropout); filled only when
    // capture was requested.
    std::vector<FeatureMatrix> hidden;
    FeatureMatrix probabilities;  // batch x classes, rows sum to 1
};

struct Gradients {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;
};

struct TrainConfig {
    int epochs = 20;
    int batch_size = 64;
    double learning_rate = 0.01;
    int snapshot_count = 20;
    std::uint64_t init_seed = 1;
    std::uint64_t shuffle_seed = 2;
    std::uint64_t dropout_seed = 3;
};

// One saved training state: the model copy is quantized to float32 precision
// (what the checkpoint file stores), and the accuracies are computed on that
// quantized copy so re-analysis from disk reproduces them exactly.
struct Snapshot {
    int epoch = 0;  // 1-based training iteration this snapshot was taken after
    Model model;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
};

struct SnapshotSeries {
    Architecture arch;
    std::vector<Snapshot> snapshots;
};

void validate_architecture(const Architecture& arch);

// Glorot-style init: weights uniform in +-sqrt(6 / (fan_in + fan_out)),
// biases zero. Deterministic for a fixed seed.
Model init_model(const Architecture& arch, std::uint64_t seed);

// Eval-mode forward unless train_mode is set, in which case inverted dropout
// with the given rate is applied after each hidden ReLU (rng required).
ForwardResult forward(const Model& model, const FeatureMatrix& inputs, bool capture,
                      bool train_mode = false, double dropout_rate = 0.0,
                      Rng* dropout_rng = nullptr);

// Mean cross-entropy of the batch in eval mode (no dropout).
double batch_loss(const Model& model, const FeatureMatrix& inputs,
                  const std::vector<int>& labels);

// Backprop gradients of batch_loss, eval mode. Matches central finite
// differences of batch_loss parameter-wise.
Gradients loss_gradients(const Model& model, const FeatureMatrix& inputs,
                         const std::vector<int>& labels);

// One SGD step on mean cross-entropy (dropout active when rate > 0).
// Returns the pre-update batch loss; a non-finite loss aborts training.
double train_step(Model& model, const FeatureMatrix& batch, const std::vector<int>& labels,
                  double learning_rate, double dropout_rate = 0.0, Rng* dropout_rng = nullptr);

// Fraction of argmax-correct predictions, dropout off; argmax ties resolve to
// the lowest class index.
double evaluate(const Model& model, const Dataset& dataset);

// Seeded SGD training with snapshots at uniform epoch intervals: snapshot j
// lands after epoch j*epochs/snapshot_count (j = 1..snapshot_count).
SnapshotSeries train_with_snapshots(const Architecture& arch, const Dataset& train,
                                    const Dataset& test, const TrainConfig& config);

// Copy whose parameters are rounded to float32 granularity (values are still
// doubles, so all downstream math stays in double precision).
Model quantized_to_float32(const Model& model);

// Checkpoint container: magic "NGMDL1", little-endian; u64 seed, u32 layer
// count, per-layer u32 (fan_out, fan_in) pairs, then per layer the row-major
// float32 weights followed by float32 biases.
void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace neurograph
