#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "neurograph/dataset.hpp"
#include "neurograph/entropy.hpp"

namespace neurograph {

struct DatasetConfig {
    enum class Kind { idx, synthetic };
    Kind kind = Kind::idx;

    // kind == idx: either the four explicit paths or a manifest file.
    std::string manifest;
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
    Eigen::Index train_cap = 0;  // stratified cap; 0 = use everything
    Eigen::Index test_cap = 0;
    bool shuffle_labels = false;  // label-permutation control ("mixed")

    // kind == synthetic
    int classes = 3;
    int per_class = 100;
    int dim = 20;
    double spread = 0.15;
};

struct ExperimentConfig {
    int schema = 1;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    DatasetConfig dataset;

    std::vector<int> hidden_sizes{512, 512};
    double dropout_rate = 0.2;
    int epochs = 20;
    int batch_size = 64;
    double learning_rate = 0.01;
    int snapshot_count = 20;

    Eigen::Index capture_cap = 2000;   // activation matrix row cap
    Eigen::Index representatives = 50; // S neurons per class
    EntropyConfig entropy;
    double resolution = 0.5;  // community detection resolution

    bool metric_entropy = true;
    bool metric_modularity = true;
    bool metric_communities = true;
    bool metric_unique_neurons = true;

    bool save_checkpoints = true;
    bool save_graphs = true;
    bool save_activations = false;
};

// Strict JSON parsing: unknown keys, wrong types, or invariant violations
// raise config_error.
ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
void write_config(const std::string& path, const ExperimentConfig& config);

struct CorrelationRow {
    std::string metric;
    std::string scope;   // "model", "class:<id>", or "" for layer metrics
    int layer = 0;       // 1-based hidden layer; 0 = not layer-specific
    std::string versus;  // "train_accuracy" or "test_accuracy"
    std::optional<double> pcc;
    std::optional<double> scc;
    int points = 0;
};

struct MetricReport {
    std::vector<int> snapshot_epochs;
    std::vector<double> train_accuracy;
    std::vector<double> test_accuracy;
    int layer_count = 0;  // hidden layers
    int class_count = 0;

    // Per-snapshot series, aligned with snapshot_epochs.
    std::vector<double> entropy_model;
    std::vector<std::vector<double>> entropy_class;  // [class][snapshot]
    // layer_series[layer-1][metric][snapshot]; NA entries preserved.
    std::vector<std::map<std::string, std::vector<std::optional<double>>>> layer_series;
    // community_sizes[snapshot][layer-1]: sizes sorted descending.
    std::vector<std::vector<std::vector<Eigen::Index>>> community_sizes;

    std::vector<Eigen::MatrixXi> unique_first;  // per layer, first snapshot
    std::vector<Eigen::MatrixXi> unique_last;   // per layer, last snapshot

    std::vector<CorrelationRow> correlations;

    const std::vector<std::optional<double>>& series(int layer, const std::string& metric) const;
    const CorrelationRow* find_correlation(const std::string& metric, const std::string& scope,
                                           int layer, const std::string& versus) const;
};

// Full pipeline: dataset -> training with snapshots -> per-snapshot activation
// capture, graphs, communities, modularity, entropy -> correlations. Writes
// accuracy.csv, modularity.csv, entropy.csv, community_sizes.csv,
// correlations.csv, unique_neurons_first.csv / _last.csv, plotdata.json, a
// config echo, and per-(snapshot, layer) graph edge lists under the output
// directory. Deterministic for a fixed config + seed.
MetricReport run_experiment(const ExperimentConfig& config);

// Re-analysis of a finished run directory (config.json + accuracy.csv +
// checkpoints/) without retraining; rewrites the metric outputs.
MetricReport recompute_metrics(const std::string& run_dir);

// Per-layer correlation table between the four modularity variants and
// training accuracy.
struct Table5 {
    std::vector<std::string> rows;  // metric names
    // cells[row][layer-1] = (pcc, scc)
    std::vector<std::vector<std::pair<std::optional<double>, std::optional<double>>>> cells;
};
Table5 table5_from_report(const MetricReport& report);
Table5 table5_runner(const ExperimentConfig& config);

// Community-size table on the deepest layer: eight largest sizes at the
// first and last snapshot (zero-padded) plus the correlation between average
// nodes per community and training accuracy.
struct Table3 {
    std::vector<Eigen::Index> first_sizes;
    std::vector<Eigen::Index> last_sizes;
    std::optional<double> pcc;
};
Table3 table3_from_report(const MetricReport& report);
Table3 table3_runner(const ExperimentConfig& config);

// Parallelism cap for per-snapshot post-processing (training itself is
// sequential): the NEUROGRAPH_THREADS environment variable, else the
// hardware concurrency.
int snapshot_thread_cap();

}  // namespace neurograph
