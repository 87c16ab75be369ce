#pragma once

#include <vector>

#include <Eigen/Dense>

#include "neurograph/activation.hpp"

namespace neurograph {

struct EntropyConfig {
    int bins = 10;        // R equal-width bins over each column's nonzero range
    bool log_base_2 = true;  // bits when true, nats when false
};

struct EntropyResult {
    std::vector<double> per_neuron;        // E_j, zero for dead neurons
    double total = 0.0;                    // E = sum of E_j
    std::vector<Eigen::Index> dead_neurons;
};

// Histogram entropy of one column's nonzero entries: R equal-width bins over
// [min_nz, max_nz] (last bin right-closed), E_j = -sum h log h. An all-zero
// column is dead and scores 0; a column whose nonzero values are all equal
// occupies one bin and also scores 0.
double neuron_entropy(const Eigen::VectorXd& column, const EntropyConfig& config,
                      bool* dead = nullptr);

// Sum of neuron_entropy over every column.
EntropyResult model_entropy(const ActivationMatrix& f_norm, const EntropyConfig& config);

// Rows filtered to one class, then column-normalized and summed as in
// model_entropy. Takes the raw (unnormalized) activation matrix.
EntropyResult class_entropy(const ActivationMatrix& f, int class_id, const EntropyConfig& config);

struct NormalizedSeries {
    std::vector<double> values;  // min-max normalized into [0,1]
    bool constant = false;       // input had zero range; values all 0.5
};

NormalizedSeries normalize_series(const std::vector<double>& values);

}  // namespace neurograph
