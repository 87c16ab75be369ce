#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "neurograph/dataset.hpp"
#include "neurograph/mlp.hpp"

namespace neurograph {

// Per-sample hidden activations: row = sample, column = neuron, hidden layers
// concatenated in order (the output layer is excluded). Values are recorded at
// float32 granularity so the snapshot file round-trips bitwise; all arithmetic
// on them stays in double precision.
struct ActivationMatrix {
    FeatureMatrix values;
    std::vector<Eigen::Index> layer_offsets;  // size layer_count+1; first 0, last = cols
    std::vector<int> labels;                  // per-row class id
    int class_count = 0;
    bool normalized = false;
    std::vector<bool> dead_columns;  // filled by normalize_columns

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
    int layer_count() const { return static_cast<int>(layer_offsets.size()) - 1; }
    Eigen::Index layer_begin(int layer) const {
        return layer_offsets[static_cast<std::size_t>(layer)];
    }
    Eigen::Index layer_width(int layer) const {
        return layer_offsets[static_cast<std::size_t>(layer) + 1] -
               layer_offsets[static_cast<std::size_t>(layer)];
    }
};

// Mean activation per (class, layer): means[i][l] has one entry per neuron of
// layer l, the average over class-i rows. Classes absent from the capture set
// get empty vectors; class_counts says which.
struct ClassMeanActivations {
    std::vector<std::vector<Eigen::VectorXd>> means;
    std::vector<Eigen::Index> class_counts;
};

// Runs the model in eval mode over the dataset (stratified-capped to
// sample_cap rows, preserving dataset order) and records every hidden
// activation. sample_cap below the class count cannot give each class a row.
ActivationMatrix record_activations(const Model& model, const Dataset& dataset,
                                    Eigen::Index sample_cap);

// Divides each column by its sum; all-zero columns stay zero and are flagged
// dead.
ActivationMatrix normalize_columns(const ActivationMatrix& f);

// Mean of layer `layer`'s columns over rows labeled `class_id` (must be
// non-empty).
Eigen::VectorXd class_mean_activation(const ActivationMatrix& f, int class_id, int layer);

ClassMeanActivations compute_class_means(const ActivationMatrix& f);

// Snapshot container: magic "NGACT1", little-endian; u32 rows, cols, offset
// count, offsets, class count; then per-row u32 labels; then row-major
// float32 values. Intended for as-captured (unnormalized) matrices, for which
// write-then-read is bitwise identity.
void save_activations(const std::string& path, const ActivationMatrix& f);
ActivationMatrix load_activations(const std::string& path);

}  // namespace neurograph
